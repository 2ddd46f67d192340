#include "cizsl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cizsl/errors.hpp"
#include "cizsl/kernels.hpp"

namespace cizsl {

namespace {

Tensor unit_rows(const Tensor& x) {
  Tensor out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row_span(r);
    double n = 0.0;
    for (double v : row) n += v * v;
    n = std::sqrt(n);
    if (n > 0.0)
      for (double& v : row) v /= n;
  }
  return out;
}

Tensor sq_distances(const Tensor& x, const Tensor& y) {
  if (x.cols() != y.cols())
    throw DimensionError("feature dim " + std::to_string(x.cols()) + " vs " + std::to_string(y.cols()));
  Tensor d(x.rows(), y.rows());
  kernels::pairwise_sq_dist(x.data(), y.data(), d.data(), x.rows(), y.rows(), x.cols());
  return d;
}

std::size_t argmax_row(std::span<const double> row, std::span<const double> bias) {
  std::size_t best = 0;
  double best_v = row[0] + (bias.empty() ? 0.0 : bias[0]);
  for (std::size_t c = 1; c < row.size(); ++c) {
    const double v = row[c] + (bias.empty() ? 0.0 : bias[c]);
    if (v > best_v) {
      best_v = v;
      best = c;
    }
  }
  return best;
}

}  // namespace

std::string to_string(PoolMetric m) { return m == PoolMetric::Cosine ? "cosine" : "euclidean"; }

PoolMetric pool_metric_from_string(const std::string& s) {
  if (s == "euclidean") return PoolMetric::Euclidean;
  if (s == "cosine") return PoolMetric::Cosine;
  throw ValidationError("unknown pool metric '" + s + "' (expected euclidean or cosine)");
}

PoolClassifier build_classifier(const ParamStore& gen, const ArchSpec& arch, const Tensor& semantics,
                                std::size_t n_generate, Rng& rng, PoolMetric metric) {
  if (n_generate == 0) throw ValidationError("n_generate must be at least 1");
  const std::size_t k = semantics.rows();
  std::vector<std::size_t> rows(k * n_generate);
  PoolClassifier clf;
  clf.n_classes = k;
  clf.metric = metric;
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t i = 0; i < n_generate; ++i) {
      rows[c * n_generate + i] = c;
      clf.pool_class.push_back(c);
    }
  const Tensor t = gather_rows(semantics, rows);
  const Tensor z = sample_noise(rng, rows.size(), arch.noise_dim);
  clf.pool = generate_features(gen, arch, t, z);
  return clf;
}

Tensor class_scores(const PoolClassifier& clf, const Tensor& x) {
  const bool cosine = clf.metric == PoolMetric::Cosine;
  // cosine: |a - b|^2 = 2 - 2 cos for unit rows
  const Tensor d = cosine ? sq_distances(unit_rows(x), unit_rows(clf.pool)) : sq_distances(x, clf.pool);
  Tensor best(x.rows(), clf.n_classes, INFINITY);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < clf.pool.rows(); ++j) {
      double& b = best(i, clf.pool_class[j]);
      b = std::min(b, d(i, j));
    }
  for (double& v : best.storage()) v = cosine ? 1.0 - 0.5 * v : -std::sqrt(v);
  return best;
}

std::vector<std::size_t> predict(const Tensor& scores, std::span<const double> column_bias) {
  if (!column_bias.empty() && column_bias.size() != scores.cols())
    throw DimensionError("bias has " + std::to_string(column_bias.size()) + " entries for " +
                         std::to_string(scores.cols()) + " columns");
  if (scores.cols() == 0) throw ValidationError("score matrix has no columns");
  std::vector<std::size_t> out(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) out[r] = argmax_row(scores.row_span(r), column_bias);
  return out;
}

double top1(const Tensor& scores, std::span<const std::size_t> labels) {
  if (labels.size() != scores.rows()) throw DimensionError("top1: label count differs from score rows");
  if (labels.empty()) throw ValidationError("top1 needs a non-empty test set");
  const auto pred = predict(scores);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += pred[i] == labels[i];
  return double(hit) / double(labels.size());
}

std::vector<double> default_bias_grid(const Tensor& scores, std::size_t n) {
  if (scores.empty()) throw ValidationError("bias grid needs scores");
  double mean = 0.0;
  for (double v : scores.data()) mean += v;
  mean /= double(scores.size());
  double var = 0.0;
  for (double v : scores.data()) var += (v - mean) * (v - mean);
  double sigma = std::sqrt(var / double(scores.size()));
  if (!(sigma > 0.0)) sigma = 1.0;
  const auto [lo, hi] = std::minmax_element(scores.data().begin(), scores.data().end());
  const double extreme = std::max(*hi - *lo + 1.0, 3.0 * sigma + 1.0);

  std::vector<double> grid{-extreme};
  for (std::size_t i = 0; i < n; ++i)
    grid.push_back(n == 1 ? 0.0 : -3.0 * sigma + 6.0 * sigma * double(i) / double(n - 1));
  grid.push_back(extreme);
  return grid;
}

double harmonic_mean(double s, double u) { return s + u > 0.0 ? 2.0 * s * u / (s + u) : 0.0; }

double su_auc(std::span<const SuPoint> points) {
  if (points.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(points.begin(), points.end(),
                                            [](const SuPoint& a, const SuPoint& b) { return a.bias < b.bias; });
  std::vector<std::pair<double, double>> xy;
  xy.emplace_back(0.0, hi->unseen_acc);
  for (const auto& p : points) xy.emplace_back(p.seen_acc, p.unseen_acc);
  xy.emplace_back(lo->seen_acc, 0.0);
  std::stable_sort(xy.begin(), xy.end(), [](const auto& a, const auto& b) {
    return a.first < b.first || (a.first == b.first && a.second > b.second);
  });
  double area = 0.0;
  for (std::size_t i = 1; i < xy.size(); ++i)
    area += (xy[i].first - xy[i - 1].first) * 0.5 * (xy[i].second + xy[i - 1].second);
  return area;
}

SuCurve su_curve_auc(const Tensor& scores, std::span<const std::size_t> labels, std::size_t k_seen,
                     std::span<const double> bias_grid) {
  if (bias_grid.empty()) throw ValidationError("Seen-Unseen curve needs a non-empty bias grid");
  if (labels.size() != scores.rows()) throw DimensionError("su_curve: label count differs from score rows");
  if (k_seen == 0 || k_seen >= scores.cols()) throw ValidationError("su_curve needs both seen and unseen columns");
  std::size_t n_seen = 0, n_unseen = 0;
  for (std::size_t y : labels) {
    if (y >= scores.cols()) throw ValidationError("su_curve: label outside the score columns");
    (y < k_seen ? n_seen : n_unseen)++;
  }
  if (n_seen == 0 || n_unseen == 0) throw ValidationError("su_curve needs both seen and unseen test examples");

  std::vector<double> grid(bias_grid.begin(), bias_grid.end());
  std::sort(grid.begin(), grid.end());
  SuCurve curve;
  curve.points.resize(grid.size());
  std::vector<double> bias(scores.cols(), 0.0);
#pragma omp parallel for schedule(static) firstprivate(bias)
  for (std::size_t g = 0; g < grid.size(); ++g) {
    std::fill(bias.begin() + static_cast<std::ptrdiff_t>(k_seen), bias.end(), grid[g]);
    std::size_t hit_s = 0, hit_u = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const std::size_t p = argmax_row(scores.row_span(i), bias);
      if (p == labels[i]) (labels[i] < k_seen ? hit_s : hit_u)++;
    }
    curve.points[g] = {grid[g], double(hit_s) / double(n_seen), double(hit_u) / double(n_unseen)};
  }
  curve.auc = su_auc(curve.points);
  for (const auto& p : curve.points) curve.harmonic_mean = std::max(curve.harmonic_mean, harmonic_mean(p.seen_acc, p.unseen_acc));
  return curve;
}

std::vector<RetrievalResult> retrieval_map(const Tensor& centers, std::span<const std::size_t> center_labels,
                                           const Tensor& images, std::span<const std::size_t> image_labels,
                                           std::span<const double> fractions) {
  if (center_labels.size() != centers.rows()) throw DimensionError("retrieval: one label per center required");
  if (image_labels.size() != images.rows()) throw DimensionError("retrieval: one label per image required");
  for (double f : fractions)
    if (!(f > 0.0 && f <= 1.0)) throw ValidationError("retrieval fractions must lie in (0, 1]");
  const Tensor d = sq_distances(centers, images);

  std::vector<RetrievalResult> out;
  for (double f : fractions) out.push_back({f, 0.0, 0.0});
  std::vector<std::size_t> order(images.rows());
  for (std::size_t q = 0; q < centers.rows(); ++q) {
    const std::size_t n_rel = static_cast<std::size_t>(std::count(image_labels.begin(), image_labels.end(), center_labels[q]));
    if (n_rel == 0) throw ValidationError("retrieval: class " + std::to_string(center_labels[q]) + " has no images");
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return d(q, a) < d(q, b); });
    for (auto& r : out) {
      const auto k = static_cast<std::size_t>(std::ceil(r.fraction * double(n_rel) - 1e-9));
      std::size_t hits = 0;
      double ap = 0.0;
      for (std::size_t i = 0; i < k; ++i)
        if (image_labels[order[i]] == center_labels[q]) {
          ++hits;
          ap += double(hits) / double(i + 1);
        }
      r.precision_at_k += double(hits) / double(k);
      r.average_precision += ap / double(k);
    }
  }
  for (auto& r : out) {
    r.precision_at_k /= double(centers.rows());
    r.average_precision /= double(centers.rows());
  }
  return out;
}

Tensor generated_centers(const ParamStore& gen, const ArchSpec& arch, const Tensor& semantics,
                         std::size_t n_generate, Rng& rng) {
  const PoolClassifier clf = build_classifier(gen, arch, semantics, n_generate, rng);
  Tensor centers(semantics.rows(), clf.pool.cols());
  for (std::size_t j = 0; j < clf.pool.rows(); ++j) {
    auto dst = centers.row_span(clf.pool_class[j]);
    auto src = clf.pool.row_span(j);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
  }
  for (double& v : centers.storage()) v /= double(n_generate);
  return centers;
}

void EvalConfig::validate() const {
  if (n_generate == 0) throw ValidationError("n_generate must be at least 1");
  if (bias_points < 2) throw ValidationError("bias_points must be at least 2");
  for (double f : fractions)
    if (!(f > 0.0 && f <= 1.0)) throw ValidationError("retrieval fractions must lie in (0, 1]");
}

namespace {

EvalReport evaluate_impl(const ParamStore& gen, const ArchSpec& arch, const ZslDataset& ds, const EvalConfig& cfg,
                         bool retrieval) {
  cfg.validate();
  if (ds.k_unseen() == 0 || ds.unseen_test_labels.empty())
    throw ValidationError("evaluation needs unseen classes with test examples");
  const std::size_t ks = ds.k_seen(), ku = ds.k_unseen();
  Rng rng(cfg.seed, 0x65);
  const std::vector<Tensor> sem_blocks{ds.seen_semantics, ds.unseen_semantics};
  const PoolClassifier clf = build_classifier(gen, arch, vstack(sem_blocks), cfg.n_generate, rng, cfg.metric);

  EvalReport report;
  const Tensor unseen_scores_all = class_scores(clf, ds.unseen_test_features);
  Tensor unseen_only(unseen_scores_all.rows(), ku);
  for (std::size_t i = 0; i < unseen_only.rows(); ++i)
    for (std::size_t c = 0; c < ku; ++c) unseen_only(i, c) = unseen_scores_all(i, ks + c);
  std::vector<std::size_t> local(ds.unseen_test_labels.size());
  for (std::size_t i = 0; i < local.size(); ++i) local[i] = ds.unseen_test_labels[i] - ks;
  report.top1_unseen = top1(unseen_only, local);

  if (!ds.seen_test_labels.empty()) {
    const Tensor seen_scores = class_scores(clf, ds.seen_test_features);
    const std::vector<Tensor> blocks{seen_scores, unseen_scores_all};
    const Tensor all = vstack(blocks);
    std::vector<std::size_t> labels = ds.seen_test_labels;
    labels.insert(labels.end(), ds.unseen_test_labels.begin(), ds.unseen_test_labels.end());
    const auto grid = default_bias_grid(all, cfg.bias_points);
    report.su = su_curve_auc(all, labels, ks, grid);
  }

  if (retrieval) {
    // visual centers: means of the unseen pools
    Tensor centers(ku, clf.pool.cols());
    for (std::size_t j = 0; j < clf.pool.rows(); ++j) {
      if (clf.pool_class[j] < ks) continue;
      auto dst = centers.row_span(clf.pool_class[j] - ks);
      auto src = clf.pool.row_span(j);
      for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
    }
    for (double& v : centers.storage()) v /= double(cfg.n_generate);
    std::vector<std::size_t> center_labels(ku);
    std::iota(center_labels.begin(), center_labels.end(), ks);
    report.retrieval =
        retrieval_map(centers, center_labels, ds.unseen_test_features, ds.unseen_test_labels, cfg.fractions);
  }
  return report;
}

}  // namespace

EvalReport evaluate(const ParamStore& gen, const ArchSpec& arch, const ZslDataset& ds, const EvalConfig& cfg) {
  return evaluate_impl(gen, arch, ds, cfg, true);
}

EvalReport evaluate_recognition(const ParamStore& gen, const ArchSpec& arch, const ZslDataset& ds,
                                const EvalConfig& cfg) {
  return evaluate_impl(gen, arch, ds, cfg, false);
}

}  // namespace cizsl
