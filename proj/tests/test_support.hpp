#pragma once

// Finite-difference oracles and small random fixtures shared by the test
// suites. Everything here evaluates losses forward only, so it stays
// independent of the reverse-mode code it checks.

#include <algorithm>
#include <cmath>
#include <vector>

#include "cizsl/diffmath.hpp"
#include "cizsl/random.hpp"

namespace cizsl::testing {

inline double eval_loss(const ParamStore& params, const ScalarLoss& loss) {
  ad::Tape tape;
  BoundParams bound(tape, params, false);
  return loss(tape, bound).item();
}

/// Relative error with a floor on the denominator, so entries whose true
/// value is ~0 are compared on an absolute scale of `floor`.
inline double rel_error(double a, double b, double floor = 1e-5) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct FdReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Compares `analytic` against central differences of `loss` on up to
/// `max_coords` coordinates per parameter (all of them when 0).
inline FdReport fd_compare(const ParamStore& params, const ParamStore& analytic, const ScalarLoss& loss,
                           double h = 1e-5, std::size_t max_coords = 0, std::uint64_t seed = 7) {
  FdReport report;
  Rng rng(seed, 99);
  ParamStore probe = params;
  for (auto& entry : probe) {
    const Tensor& grad = analytic.at(entry.name);
    std::vector<std::size_t> coords;
    const std::size_t n = entry.value.size();
    if (max_coords == 0 || n <= max_coords) {
      for (std::size_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (std::size_t k = 0; k < max_coords; ++k) coords.push_back(rng.uniform_int(n));
    }
    for (std::size_t i : coords) {
      const double saved = entry.value[i];
      entry.value[i] = saved + h;
      const double up = eval_loss(probe, loss);
      entry.value[i] = saved - h;
      const double down = eval_loss(probe, loss);
      entry.value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      report.max_rel_error = std::max(report.max_rel_error, rel_error(grad[i], numeric));
      ++report.checked;
    }
  }
  return report;
}

inline Tensor random_tensor(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Tensor t(rows, cols);
  for (double& v : t.storage()) v = scale * rng.normal();
  return t;
}

/// A random probability row (entries bounded away from zero).
inline std::vector<double> random_simplex(Rng& rng, std::size_t n) {
  std::vector<double> p(n);
  double s = 0.0;
  for (double& v : p) {
    v = 0.05 + rng.uniform();
    s += v;
  }
  for (double& v : p) v /= s;
  return p;
}

}  // namespace cizsl::testing
