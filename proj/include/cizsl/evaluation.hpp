#pragma once

// Zero-shot metrics over a pool of generated features: unseen Top-1, the
// Seen-Unseen curve and its area, harmonic mean and retrieval precision.
//
// Score matrices are N x K with one column per class; prediction is the
// arg max with ties going to the lowest column.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cizsl/dataio.hpp"
#include "cizsl/model.hpp"
#include "cizsl/random.hpp"

namespace cizsl {

enum class PoolMetric { Euclidean, Cosine };

std::string to_string(PoolMetric m);
PoolMetric pool_metric_from_string(const std::string& s);

/// Generated features with the class (column) each one belongs to.
struct PoolClassifier {
  Tensor pool;
  std::vector<std::size_t> pool_class;
  std::size_t n_classes = 0;
  PoolMetric metric = PoolMetric::Euclidean;
};

/// n_generate features per row of `semantics`, drawn class by class.
PoolClassifier build_classifier(const ParamStore& gen, const ArchSpec& arch, const Tensor& semantics,
                                std::size_t n_generate, Rng& rng, PoolMetric metric = PoolMetric::Euclidean);

/// N x n_classes scores: minus the distance to the nearest pool member of
/// each class (Euclidean), or the largest cosine similarity (Cosine).
Tensor class_scores(const PoolClassifier& clf, const Tensor& x);

/// Arg max per row, lowest index on ties. `column_bias` (optional) is added
/// to each column first.
std::vector<std::size_t> predict(const Tensor& scores, std::span<const double> column_bias = {});

/// Fraction of rows whose prediction equals the label.
double top1(const Tensor& scores, std::span<const std::size_t> labels);

struct SuPoint {
  double bias = 0.0;
  double seen_acc = 0.0;
  double unseen_acc = 0.0;
};

struct SuCurve {
  std::vector<SuPoint> points;  // sorted by bias
  double auc = 0.0;
  double harmonic_mean = 0.0;   // best over the curve
};

/// Bias values: `n` points uniform on [-3s, 3s] (s = standard deviation of
/// all scores) plus two extremes that force every prediction to one side.
std::vector<double> default_bias_grid(const Tensor& scores, std::size_t n = 201);

/// `scores` covers seen classes in columns [0, k_seen) and unseen classes
/// after them; `labels` uses the same numbering. The bias is added to every
/// unseen column. Seen and unseen accuracies are measured on the rows whose
/// label is seen and unseen respectively.
SuCurve su_curve_auc(const Tensor& scores, std::span<const std::size_t> labels, std::size_t k_seen,
                     std::span<const double> bias_grid);

/// Area under a curve given as (seen_acc, unseen_acc) points, after adding
/// (0, unseen_acc at the largest bias) and (seen_acc at the smallest bias, 0).
double su_auc(std::span<const SuPoint> points);

/// 2 s u / (s + u), 0 when both are 0.
double harmonic_mean(double seen_acc, double unseen_acc);

struct RetrievalResult {
  double fraction = 0.0;
  double precision_at_k = 0.0;     // mean over query classes
  double average_precision = 0.0;  // mean over query classes, truncated at k
};

/// Each center queries `images` ranked by ascending Euclidean distance (ties
/// by image index). k = ceil(fraction x number of images of that class).
std::vector<RetrievalResult> retrieval_map(const Tensor& centers, std::span<const std::size_t> center_labels,
                                           const Tensor& images, std::span<const std::size_t> image_labels,
                                           std::span<const double> fractions);

/// Mean of n_generate generated features per row of `semantics`.
Tensor generated_centers(const ParamStore& gen, const ArchSpec& arch, const Tensor& semantics,
                         std::size_t n_generate, Rng& rng);

struct EvalConfig {
  std::size_t n_generate = 60;
  PoolMetric metric = PoolMetric::Euclidean;
  std::size_t bias_points = 201;
  std::vector<double> fractions{0.25, 0.5, 1.0};
  std::uint64_t seed = 0;

  void validate() const;
};

struct EvalReport {
  double top1_unseen = 0.0;
  SuCurve su;
  std::vector<RetrievalResult> retrieval;
};

/// Full report on a dataset. Seen-Unseen figures need seen test examples;
/// without them the curve is empty and its area 0.
EvalReport evaluate(const ParamStore& gen, const ArchSpec& arch, const ZslDataset& ds, const EvalConfig& cfg);

/// Unseen Top-1 and Seen-Unseen area only (no retrieval), as used during
/// training for model selection.
EvalReport evaluate_recognition(const ParamStore& gen, const ArchSpec& arch, const ZslDataset& ds,
                                const EvalConfig& cfg);

}  // namespace cizsl
