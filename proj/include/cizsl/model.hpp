#pragma once

// Conditional generator G(t, z) and the two-headed discriminator.
//
// G: t -> reduce (affine, no activation) -> concat z -> hidden layers
//    (leaky rectifier 0.2) -> affine to visual_dim.
// D: x -> hidden trunk (leaky rectifier 0.2) = x^l, then a critic head
//    (affine to 1, unbounded) and either a seen-class head (affine to K^s
//    logits) or the SeGC projection W (x^l W scored against reduced
//    semantic descriptors).
//
// Parameters live in ParamStores under "G.*" and "D.*".

#include <cstddef>
#include <string>

#include "cizsl/autodiff.hpp"
#include "cizsl/diffmath.hpp"
#include "cizsl/random.hpp"

namespace cizsl {

enum class ArchPreset { Base, DoubleNet, DoubleNetReduced };

std::string to_string(ArchPreset p);
ArchPreset arch_preset_from_string(const std::string& s);

struct ArchSpec {
  ArchPreset preset = ArchPreset::Base;
  std::size_t semantic_dim = 0;
  std::size_t reduced_dim = 0;  // 0 means ceil(semantic_dim / 2)
  std::size_t noise_dim = 8;
  std::size_t visual_dim = 0;
  std::size_t hidden_dim = 64;

  std::size_t hidden_layers() const;
  std::size_t effective_hidden_dim() const;
  std::size_t effective_reduced_dim() const;
  void validate() const;
  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

struct HeadSpec {
  std::size_t k_seen = 0;
  bool segc = false;
  /// New-class ablation: one extra logit for hallucinated inputs.
  bool extra_class = false;

  std::size_t classic_outputs() const { return k_seen + (extra_class ? 1 : 0); }
  friend bool operator==(const HeadSpec&, const HeadSpec&) = default;
};

/// Fingerprint of everything that determines parameter shapes.
std::string arch_tag(const ArchSpec& arch, const HeadSpec& head);

ParamStore init_generator(const ArchSpec& arch, Rng& rng);
ParamStore init_discriminator(const ArchSpec& arch, const HeadSpec& head, Rng& rng);

/// Text reduction layer of G (batch x semantic_dim -> batch x reduced_dim).
ad::Var reduce_text(const BoundParams& gen, ad::Var t);
ad::Var generate(const BoundParams& gen, const ArchSpec& arch, ad::Var t, ad::Var z);

struct DiscOutput {
  ad::Var critic;    // batch x 1
  ad::Var logits;    // batch x classic_outputs(); invalid when SeGC is active
  ad::Var features;  // x^l, batch x hidden
};

DiscOutput discriminate(const BoundParams& disc, const ArchSpec& arch, const HeadSpec& head, ad::Var x);

/// S[i][c] = <x^l_i W, t_c>, or eta^2 cos(x^l_i W, t_c) when normalized. A
/// zero-norm vector under normalization scores 0 and is counted in
/// `degenerate` (when non-null).
ad::Var segc_scores(ad::Var w, ad::Var features, ad::Var semantics, bool normalized, double eta,
                    std::size_t* degenerate = nullptr);

/// Generator noise: n x dim standard normal draws.
Tensor sample_noise(Rng& rng, std::size_t n, std::size_t dim);

// Forward-only helpers over plain tensors.
Tensor generate_features(const ParamStore& gen, const ArchSpec& arch, const Tensor& t, const Tensor& z);
Tensor reduce_semantics(const ParamStore& gen, const Tensor& t);
Tensor segc_score(const Tensor& w, const Tensor& features, const Tensor& semantics, bool normalized, double eta,
                  std::size_t* degenerate = nullptr);

}  // namespace cizsl
