#pragma once

// Training objectives. Each loss is built on a tape from bound parameter
// stores so the same code serves forward evaluation, reverse-mode
// gradients and finite-difference checks.

#include <cstddef>
#include <span>
#include <vector>

#include "cizsl/autodiff.hpp"
#include "cizsl/diffmath.hpp"
#include "cizsl/divergence.hpp"
#include "cizsl/model.hpp"
#include "cizsl/random.hpp"

namespace cizsl {

struct LossConfig {
  double lambda_creativity = 0.1;
  bool realism_term = true;
  bool entropy_term = true;
  /// Hallucinated generations are classified as an extra class K^s + 1
  /// instead of being pushed toward the uniform softmax.
  bool new_class_ablation = false;
  bool creativity_on_discriminator = false;
  bool segc_active = false;
  bool segc_normalized = false;
  double eta = 3.0;
  /// Hallucinated generations are scored as fake by the critic (L_h).
  bool rf_hallucinated = false;
  /// Semantic softmax over K^u fresh hallucinated classes (L_G^u).
  bool u_categorization = false;
  std::size_t k_unseen_cap = 10;
  bool visual_pivot = true;
  /// Noise draws per seen class for the visual pivot.
  std::size_t pivot_samples = 10;
  DivergenceSpec divergence;

  void validate() const;
  HeadSpec head(std::size_t k_seen) const;
};

/// Everything a loss needs to know about the networks.
struct Nets {
  const BoundParams& gen;
  const BoundParams& disc;
  const BoundParams* div = nullptr;  // learnable divergence parameters, may be null
  const ArchSpec& arch;
  HeadSpec head;
  const LossConfig& cfg;
  DivergenceSigns signs;
};

struct SeenTextBatch {
  Tensor t;                     // batch x semantic_dim
  std::vector<std::size_t> y;   // seen class index per row
  Tensor z;                     // batch x noise_dim
};

struct TextNoiseBatch {
  Tensor t;
  Tensor z;
};

struct RealBatch {
  Tensor x;
  std::vector<std::size_t> y;
};

struct PivotInputs {
  Tensor seen_semantics;  // K^s x semantic_dim
  Tensor real_means;      // K^s x visual_dim
  Tensor z;               // (K^s * n) x noise_dim, class-major blocks of n rows
};

/// (v - min) / (max - min); all zeros when max - min < 1e-12.
std::vector<double> minmax_normalize(std::span<const double> values);
ad::Var minmax_normalize(ad::Var column);

/// -mean_i log_probs[i][labels[i]].
ad::Var cross_entropy(ad::Var log_probs, std::span<const std::size_t> labels);

/// Semantics passed through G's reduction layer with no gradient.
ad::Var reduced_semantics(const Nets& nets, const Tensor& semantics);


/// Log class probabilities of D for features x: the classic head over
/// K^s (+1) logits, or the semantic softmax over `class_semantics` with
/// SeGC active.
ad::Var class_log_probs(const Nets& nets, const DiscOutput& out, ad::Var class_semantics);

/// Per-row L_e of D's seen-class softmax for generated features, B x 1.
ad::Var entropy_rows(const Nets& nets, const DiscOutput& out, ad::Var class_semantics);

ad::Var creativity_loss(const Nets& nets, const TextNoiseBatch& hallucinated, const Tensor& seen_table);

ad::Var visual_pivot(const Nets& nets, const PivotInputs& pivot);

ad::Var segc_categorizer_loss(const Nets& nets, ad::Var features, std::span<const std::size_t> labels,
                              ad::Var class_semantics);

/// Semantic softmax over K^u hallucinated descriptors, each sample labeled
/// with its own descriptor index. `table` holds the reduced descriptors
/// (computed from the generator when empty).
ad::Var hallucinated_categorization_loss(const Nets& nets, const TextNoiseBatch& unseen, const Tensor& table = {});

struct GeneratorTerms {
  ad::Var total;
  ad::Var creativity;      // L_G^C (0 when both terms are disabled)
  ad::Var realism_seen;    // -mean D^r(G(t^s, z))
  ad::Var classification;  // -mean log D^s(G(t^s, z))[y]
  ad::Var pivot;
  ad::Var unseen_cat;      // L_G^u or 0
};

struct GeneratorInputs {
  SeenTextBatch seen;
  TextNoiseBatch hallucinated;
  PivotInputs pivot;
  TextNoiseBatch unseen;  // only used with u_categorization
  Tensor seen_semantics;  // K^s x semantic_dim
  // Reduced descriptors scored by the SeGC head, held fixed during the
  // step. Computed from the current generator when left empty.
  Tensor seen_table;
  Tensor unseen_table;
};

GeneratorTerms generator_loss(const Nets& nets, const GeneratorInputs& in);

struct DiscriminatorTerms {
  ad::Var total;
  ad::Var fake;        // mean D^r(G(t^s, z))
  ad::Var real;        // -mean D^r(x)
  ad::Var lipschitz;
  ad::Var cls_real;    // 1/2 CE on real features
  ad::Var cls_fake;    // 1/2 CE on generated features
  ad::Var hallucinated_rf;  // L_h or 0
  ad::Var creativity;       // entropy term on D, or new-class CE, or 0
  std::size_t degenerate_rows = 0;
};

struct DiscriminatorInputs {
  RealBatch real;
  SeenTextBatch seen;
  TextNoiseBatch hallucinated;
  Tensor interpolate;     // x-tilde
  Tensor seen_semantics;
  Tensor seen_table;      // as in GeneratorInputs
};

DiscriminatorTerms discriminator_loss(const Nets& nets, const DiscriminatorInputs& in);

/// Fills the SeGC class tables of `in` from the generator `gen`.
void freeze_class_tables(const ParamStore& gen, GeneratorInputs& in);
void freeze_class_tables(const ParamStore& gen, DiscriminatorInputs& in);

/// Row-wise u x + (1 - u) x_fake with u ~ U(0, 1) per row.
Tensor lipschitz_interpolate(const Tensor& x_real, const Tensor& x_fake, Rng& rng);
Tensor lipschitz_interpolate(const Tensor& x_real, const Tensor& x_fake, std::span<const double> u);

}  // namespace cizsl
