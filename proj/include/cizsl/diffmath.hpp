#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cizsl/autodiff.hpp"
#include "cizsl/tensor.hpp"

namespace cizsl {

/// Named parameter tensors. Iteration follows insertion order.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
    friend bool operator==(const Entry&, const Entry&) = default;
  };

  void add(std::string name, Tensor value);
  bool contains(std::string_view name) const;
  const Tensor& at(std::string_view name) const;
  Tensor& at(std::string_view name);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  /// Total number of scalar parameters.
  std::size_t scalar_count() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  /// Same names and shapes, all zeros.
  ParamStore zeros_like() const;
  /// Entries whose names start with `prefix`.
  ParamStore subset(std::string_view prefix) const;
  /// Appends every entry of `other`; names must not collide.
  void merge(const ParamStore& other);

  friend bool operator==(const ParamStore& a, const ParamStore& b) { return a.entries_ == b.entries_; }

 private:
  std::size_t index_of(std::string_view name) const;
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Parameters placed on a tape, looked up by name.
class BoundParams {
 public:
  BoundParams() = default;
  BoundParams(ad::Tape& tape, const ParamStore& store, bool trainable);

  ad::Var operator[](std::string_view name) const;
  bool contains(std::string_view name) const;
  const std::vector<std::pair<std::string, ad::Var>>& vars() const { return vars_; }

 private:
  std::vector<std::pair<std::string, ad::Var>> vars_;
  std::unordered_map<std::string, std::size_t> index_;
};

using ScalarLoss = std::function<ad::Var(ad::Tape&, const BoundParams&)>;

struct ScalarGrad {
  double value = 0.0;
  ParamStore grads;
};

/// Value and gradient of a scalar loss with respect to every parameter in
/// `params`. Unused parameters get zero gradients. Throws NumericError when
/// the loss or any gradient is non-finite (naming the offending parameter).
ScalarGrad grad_scalar(const ParamStore& params, const ScalarLoss& loss);

/// A critic evaluated on a batch of inputs: returns one score per row (Bx1).
using Critic = std::function<ad::Var(ad::Tape&, ad::Var x)>;

/// d(sum of critic scores)/dx, i.e. the per-row input gradient.
Tensor input_gradient(const Critic& critic, const Tensor& x);

/// Gradient norms below this are treated as degenerate by the penalty.
inline constexpr double kDegenerateNorm = 1e-12;

/// Mean over rows of (||d critic / d x_row|| - 1)^2 as a differentiable node.
/// Rows whose input-gradient norm falls below kDegenerateNorm contribute the
/// constant 1 with no parameter gradient; their count is added to
/// `degenerate_rows`.
ad::Var gradient_penalty(ad::Tape& tape, const Critic& critic, const Tensor& x_tilde,
                         std::size_t& degenerate_rows);

using BoundCritic = std::function<ad::Var(ad::Tape&, const BoundParams&, ad::Var x)>;

struct PenaltyGrad {
  double value = 0.0;
  ParamStore grads;
  std::size_t degenerate_rows = 0;
};

/// Gradient-penalty value and its gradient with respect to the critic's
/// parameters (a derivative taken through the input gradient).
PenaltyGrad grad_penalty_param_grad(const ParamStore& critic_params, const BoundCritic& critic,
                                    const Tensor& x_tilde);

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double eps = 1e-8;
};

struct AdamState {
  ParamStore first_moment;
  ParamStore second_moment;
  std::uint64_t step = 0;

  static AdamState for_params(const ParamStore& params);
};

/// One bias-corrected Adam update applied in place to `params`.
void adam_step(ParamStore& params, const ParamStore& grads, AdamState& state, const AdamConfig& cfg);

}  // namespace cizsl
