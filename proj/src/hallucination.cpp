#include "cizsl/hallucination.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "cizsl/errors.hpp"

namespace cizsl {

namespace {

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

HallucinationPolicy HallucinationPolicy::interpolate() { return from_intervals({{0.2, 0.8}}); }
HallucinationPolicy HallucinationPolicy::neg_extrapolate() { return from_intervals({{-0.5, -0.2}}); }
HallucinationPolicy HallucinationPolicy::pos_extrapolate() { return from_intervals({{1.2, 1.5}}); }
HallucinationPolicy HallucinationPolicy::neg_pos() { return from_intervals({{-0.5, -0.2}, {1.2, 1.5}}); }
HallucinationPolicy HallucinationPolicy::all() { return from_intervals({{-0.5, -0.2}, {0.2, 0.8}, {1.2, 1.5}}); }

HallucinationPolicy HallucinationPolicy::fixed_half() {
  HallucinationPolicy p;
  p.kind = Kind::Fixed;
  p.intervals.clear();
  return p;
}

HallucinationPolicy HallucinationPolicy::gaussian() {
  HallucinationPolicy p;
  p.kind = Kind::Gaussian;
  p.intervals.clear();
  return p;
}

HallucinationPolicy HallucinationPolicy::preset(const std::string& name) {
  if (name == "interpolate") return interpolate();
  if (name == "neg_extrapolate") return neg_extrapolate();
  if (name == "pos_extrapolate") return pos_extrapolate();
  if (name == "neg_pos") return neg_pos();
  if (name == "all") return all();
  if (name == "fixed") return fixed_half();
  if (name == "gaussian") return gaussian();
  throw ValidationError("unknown hallucination preset '" + name + "'");
}

HallucinationPolicy HallucinationPolicy::from_intervals(std::vector<AlphaInterval> intervals) {
  HallucinationPolicy p;
  p.intervals = std::move(intervals);
  std::sort(p.intervals.begin(), p.intervals.end(),
            [](const AlphaInterval& a, const AlphaInterval& b) { return a.lo < b.lo; });
  p.validate();
  return p;
}

std::string HallucinationPolicy::label() const {
  switch (kind) {
    case Kind::Fixed:
      return "alpha=" + number(mean);
    case Kind::Gaussian:
      return "N(" + number(mean) + ", " + number(stddev) + ")";
    case Kind::Uniform:
      break;
  }
  std::string out = "U";
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    if (i > 0) out += " U ";
    out += "(" + number(intervals[i].lo) + ", " + number(intervals[i].hi) + ")";
  }
  return out;
}

void HallucinationPolicy::validate() const {
  if (kind == Kind::Fixed) {
    if (!std::isfinite(mean)) throw ValidationError("fixed alpha must be finite");
    return;
  }
  if (kind == Kind::Gaussian) {
    if (!std::isfinite(mean) || !(stddev > 0.0) || !std::isfinite(stddev))
      throw ValidationError("gaussian alpha needs a finite mean and positive stddev");
    return;
  }
  if (intervals.empty()) throw ValidationError("hallucination policy needs at least one interval");
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const auto& [lo, hi] = intervals[i];
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi))
      throw ValidationError("alpha interval needs finite lo < hi");
    if ((lo < 0.0 && 0.0 < hi) || (lo < 1.0 && 1.0 < hi))
      throw ValidationError("alpha interval " + label() + " must not contain 0 or 1");
    for (std::size_t j = 0; j < i; ++j)
      if (lo < intervals[j].hi && intervals[j].lo < hi) throw ValidationError("alpha intervals overlap");
  }
}

double sample_alpha(const HallucinationPolicy& policy, Rng& rng) {
  switch (policy.kind) {
    case HallucinationPolicy::Kind::Fixed:
      return policy.mean;
    case HallucinationPolicy::Kind::Gaussian:
      return policy.mean + policy.stddev * rng.normal();
    case HallucinationPolicy::Kind::Uniform:
      break;
  }
  double total = 0.0;
  for (const auto& iv : policy.intervals) total += iv.hi - iv.lo;
  for (;;) {
    double u = rng.uniform() * total;
    for (const auto& iv : policy.intervals) {
      const double len = iv.hi - iv.lo;
      if (u < len) {
        const double alpha = iv.lo + u;
        // open interval: redraw the measure-zero endpoints
        if (alpha > iv.lo && alpha < iv.hi) return alpha;
        break;
      }
      u -= len;
    }
  }
}

std::vector<double> combine_descriptors(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() != b.size()) throw DimensionError("descriptor widths differ");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = alpha * a[i] + (1.0 - alpha) * b[i];
  return out;
}

HallucinatedBatch sample_hallucinated_text(const Tensor& seen_semantics, const HallucinationPolicy& policy,
                                           std::size_t batch_size, Rng& rng) {
  const std::size_t k = seen_semantics.rows();
  if (k < 2) throw ValidationError("hallucination needs at least 2 seen classes");
  if (batch_size == 0) throw ValidationError("hallucination batch size must be positive");
  HallucinatedBatch out;
  out.text = Tensor(batch_size, seen_semantics.cols());
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t a = rng.uniform_int(k);
    std::size_t b = rng.uniform_int(k);
    while (b == a) b = rng.uniform_int(k);
    const double alpha = sample_alpha(policy, rng);
    const auto row = combine_descriptors(seen_semantics.row_span(a), seen_semantics.row_span(b), alpha);
    std::copy(row.begin(), row.end(), out.text.row_span(i).begin());
    out.class_a.push_back(a);
    out.class_b.push_back(b);
    out.alpha.push_back(alpha);
  }
  return out;
}

}  // namespace cizsl
