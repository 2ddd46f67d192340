#pragma once

// Hallucinated text descriptors t^h = alpha t_a + (1 - alpha) t_b built from
// pairs of distinct seen classes.

#include <string>
#include <vector>

#include "cizsl/random.hpp"
#include "cizsl/tensor.hpp"

namespace cizsl {

/// Open interval (lo, hi).
struct AlphaInterval {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const AlphaInterval&, const AlphaInterval&) = default;
};

struct HallucinationPolicy {
  enum class Kind { Uniform, Fixed, Gaussian };

  Kind kind = Kind::Uniform;
  /// Support for Kind::Uniform; alpha is uniform over the union.
  std::vector<AlphaInterval> intervals{{0.2, 0.8}};
  /// Kind::Fixed uses `mean`; Kind::Gaussian draws N(mean, stddev^2).
  double mean = 0.5;
  double stddev = 0.5 / 3.0;

  static HallucinationPolicy interpolate();
  static HallucinationPolicy neg_extrapolate();
  static HallucinationPolicy pos_extrapolate();
  static HallucinationPolicy neg_pos();
  static HallucinationPolicy all();
  static HallucinationPolicy fixed_half();
  static HallucinationPolicy gaussian();
  /// Preset by name: interpolate, neg_extrapolate, pos_extrapolate, neg_pos,
  /// all, fixed, gaussian.
  static HallucinationPolicy preset(const std::string& name);
  static HallucinationPolicy from_intervals(std::vector<AlphaInterval> intervals);

  /// Human-readable support, e.g. "U(-0.5, -0.2) U (1.2, 1.5)".
  std::string label() const;
  void validate() const;

  friend bool operator==(const HallucinationPolicy&, const HallucinationPolicy&) = default;
};

double sample_alpha(const HallucinationPolicy& policy, Rng& rng);

struct HallucinatedBatch {
  Tensor text;                    // batch x semantic_dim
  std::vector<std::size_t> class_a;
  std::vector<std::size_t> class_b;
  std::vector<double> alpha;
};

/// alpha * a + (1 - alpha) * b.
std::vector<double> combine_descriptors(std::span<const double> a, std::span<const double> b, double alpha);

/// One hallucinated descriptor per row, each from an independently drawn
/// pair of distinct seen classes and an independently drawn alpha.
HallucinatedBatch sample_hallucinated_text(const Tensor& seen_semantics, const HallucinationPolicy& policy,
                                           std::size_t batch_size, Rng& rng);

}  // namespace cizsl
