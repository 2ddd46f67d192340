#include "cizsl/diffmath.hpp"

#include <cmath>

#include "cizsl/errors.hpp"

namespace cizsl {

void ParamStore::add(std::string name, Tensor value) {
  if (index_.contains(name)) throw ValidationError("duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), std::move(value)});
}

std::size_t ParamStore::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ValidationError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

bool ParamStore::contains(std::string_view name) const { return index_.contains(std::string(name)); }

const Tensor& ParamStore::at(std::string_view name) const { return entries_[index_of(name)].value; }

Tensor& ParamStore::at(std::string_view name) { return entries_[index_of(name)].value; }

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (const auto& e : entries_) out.add(e.name, Tensor(e.value.rows(), e.value.cols(), 0.0));
  return out;
}

ParamStore ParamStore::subset(std::string_view prefix) const {
  ParamStore out;
  for (const auto& e : entries_) {
    if (e.name.starts_with(prefix)) out.add(e.name, e.value);
  }
  return out;
}

void ParamStore::merge(const ParamStore& other) {
  for (const auto& e : other) add(e.name, e.value);
}

BoundParams::BoundParams(ad::Tape& tape, const ParamStore& store, bool trainable) {
  vars_.reserve(store.size());
  for (const auto& e : store) {
    index_.emplace(e.name, vars_.size());
    vars_.emplace_back(e.name, trainable ? tape.variable(e.value) : tape.constant(e.value));
  }
}

ad::Var BoundParams::operator[](std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ValidationError("parameter '" + std::string(name) + "' not bound");
  return vars_[it->second].second;
}

bool BoundParams::contains(std::string_view name) const { return index_.contains(std::string(name)); }

ScalarGrad grad_scalar(const ParamStore& params, const ScalarLoss& loss) {
  ad::Tape tape;
  BoundParams bound(tape, params, true);
  ad::Var out = loss(tape, bound);
  const double value = out.item();
  if (!std::isfinite(value)) throw NumericError("loss evaluated to a non-finite value");

  std::vector<ad::Var> wrt;
  wrt.reserve(bound.vars().size());
  for (const auto& [name, v] : bound.vars()) wrt.push_back(v);
  std::vector<ad::Var> g = tape.gradient(out, wrt, false);

  ScalarGrad result;
  result.value = value;
  for (std::size_t i = 0; i < wrt.size(); ++i) {
    const std::string& name = bound.vars()[i].first;
    if (!g[i].value().all_finite()) throw NumericError("non-finite gradient for parameter '" + name + "'");
    result.grads.add(name, g[i].value());
  }
  return result;
}

Tensor input_gradient(const Critic& critic, const Tensor& x) {
  ad::Tape tape;
  ad::Var xv = tape.variable(x);
  ad::Var scores = critic(tape, xv);
  if (scores.rows() != x.rows() || scores.cols() != 1) {
    throw DimensionError("critic must return one score per input row");
  }
  const ad::Var wrt[] = {xv};
  return tape.gradient(ad::sum(scores), wrt, false)[0].value();
}

ad::Var gradient_penalty(ad::Tape& tape, const Critic& critic, const Tensor& x_tilde,
                         std::size_t& degenerate_rows) {
  ad::Var x = tape.variable(x_tilde);
  ad::Var scores = critic(tape, x);
  const ad::Var wrt[] = {x};
  ad::Var g = tape.gradient(ad::sum(scores), wrt, true)[0];
  ad::Var sq_norm = ad::sum_cols(ad::square(g));

  const Tensor& sq = sq_norm.value();
  Tensor keep(sq.rows(), 1);
  Tensor fill(sq.rows(), 1);
  for (std::size_t i = 0; i < sq.rows(); ++i) {
    const bool ok = std::sqrt(sq(i, 0)) >= kDegenerateNorm;
    keep(i, 0) = ok ? 1.0 : 0.0;
    fill(i, 0) = ok ? 0.0 : 1.0;
    if (!ok) ++degenerate_rows;
  }
  // Degenerate rows get sqrt(0 + 1) in the graph and are then masked out.
  ad::Var norm = ad::sqrt(ad::add(sq_norm, tape.constant(fill)));
  ad::Var per_row = ad::add(ad::mul_const(ad::square(norm - 1.0), keep), tape.constant(fill));
  return ad::mean(per_row);
}

PenaltyGrad grad_penalty_param_grad(const ParamStore& critic_params, const BoundCritic& critic,
                                    const Tensor& x_tilde) {
  PenaltyGrad out;
  ScalarGrad sg = grad_scalar(critic_params, [&](ad::Tape& tape, const BoundParams& bound) {
    return gradient_penalty(
        tape, [&](ad::Tape& t, ad::Var x) { return critic(t, bound, x); }, x_tilde, out.degenerate_rows);
  });
  out.value = sg.value;
  out.grads = std::move(sg.grads);
  return out;
}

AdamState AdamState::for_params(const ParamStore& params) {
  AdamState s;
  s.first_moment = params.zeros_like();
  s.second_moment = params.zeros_like();
  return s;
}

void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state, const AdamConfig& cfg) {
  if (!(cfg.lr > 0) || cfg.beta1 < 0 || cfg.beta1 >= 1 || cfg.beta2 < 0 || cfg.beta2 >= 1) {
    throw ValidationError("invalid Adam hyperparameters");
  }
  if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
    throw DimensionError("Adam: gradient/state count does not match parameters");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);

  auto g_it = grads.begin();
  auto m_it = state.first_moment.begin();
  auto v_it = state.second_moment.begin();
  for (auto& p : params) {
    if (g_it->name != p.name || !g_it->value.same_shape(p.value) || !m_it->value.same_shape(p.value)) {
      throw DimensionError("Adam: gradient for '" + p.name + "' does not match parameter");
    }
    auto w = p.value.data();
    auto g = g_it->value.data();
    auto m = m_it->value.data();
    auto v = v_it->value.data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
    ++g_it;
    ++m_it;
    ++v_it;
  }
}

}  // namespace cizsl
