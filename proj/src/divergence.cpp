#include "cizsl/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cizsl/errors.hpp"

namespace cizsl {

namespace {

bool near(double a, double b) { return std::abs(a - b) < kSingularThreshold; }

std::vector<double> floored(std::span<const double> p) {
  std::vector<double> out(p.begin(), p.end());
  double total = 0.0;
  for (double& v : out) {
    v = std::clamp(v, kProbabilityFloor, 1.0);
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

void check_probability(std::span<const double> p, const char* what) {
  if (p.size() < 2) throw ValidationError(std::string(what) + " must have at least 2 entries");
  double total = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) throw ValidationError(std::string(what) + " has a negative or non-finite entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError(std::string(what) + " does not sum to 1");
}

struct Pair {
  std::vector<double> p, q;
};

Pair prepare(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionError("probability vectors differ in length");
  check_probability(p, "p");
  check_probability(q, "q");
  return {floored(p), floored(q)};
}

// sum_i p_i^g q_i^(1-g) - 1, written so it stays accurate as g -> 1.
double power_sum_minus_one(const Pair& v, double gamma) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.p.size(); ++i) s += v.p[i] * std::expm1((gamma - 1.0) * std::log(v.p[i] / v.q[i]));
  return s;
}

double kl_of(const Pair& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.p.size(); ++i) s += v.p[i] * std::log(v.p[i] / v.q[i]);
  return s;
}

double sm_of(const Pair& v, double gamma, double beta) {
  const double log_s = std::log1p(power_sum_minus_one(v, gamma));
  return std::expm1((beta - 1.0) / (gamma - 1.0) * log_s) / (beta - 1.0);
}

double routed(const Pair& v, const DivergenceSpec& spec) {
  const double g = spec.gamma, b = spec.beta;
  switch (spec.family) {
    case DivergenceFamily::KL:
      return kl_of(v);
    case DivergenceFamily::Bhattacharyya: {
      double s = 0.0;
      for (std::size_t i = 0; i < v.p.size(); ++i) s += std::sqrt(v.p[i] * v.q[i]);
      return -std::log(s);
    }
    case DivergenceFamily::Renyi:
      if (near(g, 1.0)) return kl_of(v);
      return std::log1p(power_sum_minus_one(v, g)) / (g - 1.0);
    case DivergenceFamily::Tsallis:
      if (near(g, 1.0)) return kl_of(v);
      return power_sum_minus_one(v, g) / (g - 1.0);
    case DivergenceFamily::SharmaMittal:
      if (near(g, 1.0) && near(b, 1.0)) return kl_of(v);
      if (near(g, 1.0)) return std::expm1((b - 1.0) * kl_of(v)) / (b - 1.0);
      if (near(b, 1.0)) return std::log1p(power_sum_minus_one(v, g)) / (g - 1.0);
      if (near(b, g)) return power_sum_minus_one(v, g) / (g - 1.0);
      return sm_of(v, g, b);
  }
  throw ValidationError("unknown divergence family");
}

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::string to_string(DivergenceFamily f) {
  switch (f) {
    case DivergenceFamily::SharmaMittal: return "sharma_mittal";
    case DivergenceFamily::Renyi: return "renyi";
    case DivergenceFamily::Tsallis: return "tsallis";
    case DivergenceFamily::KL: return "kl";
    case DivergenceFamily::Bhattacharyya: return "bhattacharyya";
  }
  return "unknown";
}

DivergenceFamily divergence_family_from_string(const std::string& s) {
  for (auto f : {DivergenceFamily::SharmaMittal, DivergenceFamily::Renyi, DivergenceFamily::Tsallis,
                 DivergenceFamily::KL, DivergenceFamily::Bhattacharyya})
    if (to_string(f) == s) return f;
  throw ValidationError("unknown divergence family '" + s + "'");
}

std::string to_string(Orientation o) { return o == Orientation::SoftmaxFirst ? "softmax_first" : "uniform_first"; }

Orientation orientation_from_string(const std::string& s) {
  if (s == "softmax_first") return Orientation::SoftmaxFirst;
  if (s == "uniform_first") return Orientation::UniformFirst;
  throw ValidationError("unknown orientation '" + s + "'");
}

bool DivergenceSpec::gamma_is_learnable() const {
  return learn_gamma && (family == DivergenceFamily::SharmaMittal || family == DivergenceFamily::Renyi ||
                         family == DivergenceFamily::Tsallis);
}

bool DivergenceSpec::beta_is_learnable() const { return learn_beta && family == DivergenceFamily::SharmaMittal; }

void DivergenceSpec::validate() const {
  if (!std::isfinite(gamma) || gamma <= 0.0) throw ValidationError("divergence gamma must be positive");
  if (!std::isfinite(beta)) throw ValidationError("divergence beta must be finite");
  if (gamma_is_learnable() && gamma == 1.0) throw ValidationError("learnable gamma cannot start at 1");
  if (beta_is_learnable() && beta == 1.0) throw ValidationError("learnable beta cannot start at 1");
}

double sm_divergence(std::span<const double> p, std::span<const double> q, double gamma, double beta) {
  if (!(gamma > 0.0) || gamma == 1.0 || beta == 1.0 || !std::isfinite(beta))
    throw ValidationError("sm_divergence needs gamma > 0, gamma != 1 and beta != 1");
  return sm_of(prepare(p, q), gamma, beta);
}

double renyi_divergence(std::span<const double> p, std::span<const double> q, double gamma) {
  return special_case(p, q, {.family = DivergenceFamily::Renyi, .gamma = gamma});
}

double tsallis_divergence(std::span<const double> p, std::span<const double> q, double gamma) {
  return special_case(p, q, {.family = DivergenceFamily::Tsallis, .gamma = gamma});
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  return special_case(p, q, {.family = DivergenceFamily::KL});
}

double bhattacharyya_divergence(std::span<const double> p, std::span<const double> q) {
  return special_case(p, q, {.family = DivergenceFamily::Bhattacharyya});
}

double special_case(std::span<const double> p, std::span<const double> q, const DivergenceSpec& spec) {
  if (!(spec.gamma > 0.0) || !std::isfinite(spec.beta)) throw ValidationError("invalid divergence parameters");
  return routed(prepare(p, q), spec);
}

double entropy_loss(std::span<const double> softmax, const DivergenceSpec& spec) {
  const std::vector<double> u(softmax.size(), 1.0 / static_cast<double>(softmax.size()));
  return spec.orientation == Orientation::SoftmaxFirst ? special_case(softmax, u, spec)
                                                       : special_case(u, softmax, spec);
}

DivergenceSigns divergence_signs(const DivergenceSpec& spec) {
  return {spec.gamma > 1.0 ? 1 : -1, spec.beta > 1.0 ? 1 : -1};
}

double gamma_from_raw(double raw, int sign) { return sign > 0 ? 1.0 + softplus(raw) : sigmoid(raw); }

double beta_from_raw(double raw, int sign) { return 1.0 + sign * softplus(raw); }

double raw_from_gamma(double gamma) {
  if (!(gamma > 0.0) || gamma == 1.0) throw ValidationError("gamma must be positive and != 1");
  return gamma > 1.0 ? std::log(std::expm1(gamma - 1.0)) : std::log(gamma / (1.0 - gamma));
}

double raw_from_beta(double beta) {
  if (beta == 1.0 || !std::isfinite(beta)) throw ValidationError("beta must be finite and != 1");
  return std::log(std::expm1(std::abs(beta - 1.0)));
}

ParamStore init_divergence_params(const DivergenceSpec& spec) {
  spec.validate();
  ParamStore store;
  if (spec.gamma_is_learnable()) store.add("E.gamma", Tensor(1, 1, raw_from_gamma(spec.gamma)));
  if (spec.beta_is_learnable()) store.add("E.beta", Tensor(1, 1, raw_from_beta(spec.beta)));
  return store;
}

DivergenceSpec resolve(const DivergenceSpec& spec, const ParamStore& params, DivergenceSigns signs) {
  DivergenceSpec out = spec;
  if (spec.gamma_is_learnable() && params.contains("E.gamma"))
    out.gamma = gamma_from_raw(params.at("E.gamma").item(), signs.gamma);
  if (spec.beta_is_learnable() && params.contains("E.beta"))
    out.beta = beta_from_raw(params.at("E.beta").item(), signs.beta);
  return out;
}

ad::Var entropy_loss_rows(ad::Tape& tape, ad::Var softmax, const DivergenceSpec& spec, const BoundParams* params,
                          DivergenceSigns signs) {
  const std::size_t k = softmax.cols();
  if (k < 2) throw ValidationError("entropy loss needs at least 2 classes");

  ad::Var gamma = tape.constant(Tensor(1, 1, spec.gamma));
  ad::Var beta = tape.constant(Tensor(1, 1, spec.beta));
  if (params != nullptr && spec.gamma_is_learnable() && params->contains("E.gamma")) {
    ad::Var u = (*params)["E.gamma"];
    gamma = signs.gamma > 0 ? 1.0 + ad::softplus(u) : ad::sigmoid(u);
  }
  if (params != nullptr && spec.beta_is_learnable() && params->contains("E.beta")) {
    ad::Var v = (*params)["E.beta"];
    beta = signs.beta > 0 ? 1.0 + ad::softplus(v) : 1.0 - ad::softplus(v);
  }
  const double g = gamma.item(), b = beta.item();

  ad::Var clamped = ad::clamp(softmax, kProbabilityFloor, 1.0);
  ad::Var a = ad::div(clamped, ad::sum_cols(clamped));
  ad::Var log_a = ad::log(a);
  const double log_u = -std::log(static_cast<double>(k));
  ad::Var uniform = tape.constant(Tensor(softmax.rows(), k, 1.0 / static_cast<double>(k)));

  // p is the first argument; r = ln(p / q).
  const bool softmax_first = spec.orientation == Orientation::SoftmaxFirst;
  ad::Var p = softmax_first ? a : uniform;
  ad::Var r = softmax_first ? log_a - log_u : log_u - log_a;

  auto kl = [&] { return ad::sum_cols(p * r); };
  auto power_sum_minus_one = [&] { return ad::sum_cols(p * (ad::exp(r * (gamma - 1.0)) - 1.0)); };
  auto renyi = [&] { return ad::log(1.0 + power_sum_minus_one()) / (gamma - 1.0); };
  auto tsallis = [&] { return power_sum_minus_one() / (gamma - 1.0); };

  switch (spec.family) {
    case DivergenceFamily::KL:
      return kl();
    case DivergenceFamily::Bhattacharyya:
      return -ad::log(ad::sum_cols(p * ad::exp(r * -0.5)));
    case DivergenceFamily::Renyi:
      return near(g, 1.0) ? kl() : renyi();
    case DivergenceFamily::Tsallis:
      return near(g, 1.0) ? kl() : tsallis();
    case DivergenceFamily::SharmaMittal:
      if (near(g, 1.0) && near(b, 1.0)) return kl();
      if (near(g, 1.0)) return (ad::exp(kl() * (beta - 1.0)) - 1.0) / (beta - 1.0);
      if (near(b, 1.0)) return renyi();
      if (near(b, g)) return tsallis();
      {
        ad::Var log_s = ad::log(1.0 + power_sum_minus_one());
        return (ad::exp(log_s * ((beta - 1.0) / (gamma - 1.0))) - 1.0) / (beta - 1.0);
      }
  }
  throw ValidationError("unknown divergence family");
}

EntropyLossGrad entropy_loss_grad(std::span<const double> softmax, const DivergenceSpec& spec) {
  check_probability(softmax, "softmax");
  const DivergenceSigns signs = divergence_signs(spec);
  ParamStore e = init_divergence_params(spec);

  ad::Tape tape;
  ad::Var x = tape.variable(Tensor({1, softmax.size()}, std::vector<double>(softmax.begin(), softmax.end())));
  BoundParams bound(tape, e, true);
  ad::Var loss = entropy_loss_rows(tape, x, spec, &bound, signs);

  std::vector<ad::Var> wrt{x};
  for (const auto& [name, var] : bound.vars()) wrt.push_back(var);
  const auto grads = tape.gradient(loss, wrt);

  EntropyLossGrad out;
  out.value = loss.item();
  const Tensor& gx = grads[0].value();
  out.d_softmax.assign(gx.data().begin(), gx.data().end());
  for (std::size_t i = 0; i < bound.vars().size(); ++i) {
    const std::string& name = bound.vars()[i].first;
    const double d_raw = grads[i + 1].item();
    const double raw = e.at(name).item();
    if (name == "E.gamma") {
      out.d_gamma_raw = d_raw;
      const double s = sigmoid(raw);
      out.d_gamma = d_raw / (signs.gamma > 0 ? s : s * (1.0 - s));
    } else {
      out.d_beta_raw = d_raw;
      out.d_beta = d_raw / (signs.beta * sigmoid(raw));
    }
  }
  return out;
}

}  // namespace cizsl
