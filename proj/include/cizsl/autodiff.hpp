#pragma once

// Tape-based reverse-mode differentiation over dense matrices.
//
// Every backward rule is itself written with tape operations, so a gradient
// computed with create_graph=true is an ordinary node on the tape and can be
// differentiated again. That is how the gradient penalty obtains its
// parameter gradient (derivative of a norm of an input gradient).
//
// Binary elementwise operations broadcast 1x1, 1xC and Rx1 operands.

#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "cizsl/tensor.hpp"

namespace cizsl::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double item() const { return value().item(); }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
 public:
  /// Called with the node itself, the gradient flowing into it and a flag per
  /// input saying whether that input's gradient is wanted. Returns one Var
  /// per input; unwanted entries may be left invalid.
  using Backward =
      std::function<std::vector<Var>(Var self, Var grad_out, const std::vector<bool>& wanted)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);

  const Tensor& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id())].value; }
  bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id())].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradients of the scalar `output` with respect to each of `wrt`.
  /// Inputs that `output` does not depend on get zero tensors. With
  /// create_graph the returned gradients are differentiable nodes.
  std::vector<Var> gradient(Var output, std::span<const Var> wrt, bool create_graph = false);

  /// Adds an op node; used by the operation implementations.
  Var record(Tensor value, std::vector<Var> inputs, Backward backward);

  bool recording() const { return recording_; }

 private:
  friend class NoGradScope;
  struct Node {
    Tensor value;
    bool requires_grad = false;
    std::vector<int> inputs;
    Backward backward;
  };
  std::deque<Node> nodes_;
  bool recording_ = true;
};

/// While alive, new nodes on the tape are recorded as constants.
class NoGradScope {
 public:
  explicit NoGradScope(Tape& tape) : tape_(tape), previous_(tape.recording_) { tape.recording_ = false; }
  ~NoGradScope() { tape_.recording_ = previous_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape& tape_;
  bool previous_;
};

// Shape and reduction ops.
Var transpose(Var a);
Var broadcast_to(Var a, std::size_t rows, std::size_t cols);
/// Sums a broadcast gradient back down to rows x cols (each 1 or matching).
Var sum_to(Var a, std::size_t rows, std::size_t cols);
Var sum(Var a);
Var mean(Var a);
Var sum_rows(Var a);  // R x C -> 1 x C
Var sum_cols(Var a);  // R x C -> R x 1
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var pad_cols(Var a, std::size_t begin, std::size_t total);
Var pick(Var a, std::size_t r, std::size_t c);
Var place(Var s, std::size_t r, std::size_t c, std::size_t rows, std::size_t cols);
/// Smallest / largest entry; ties resolve to the first in row-major order.
Var min_all(Var a);
Var max_all(Var a);

// Arithmetic.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var neg(Var a);
Var scale(Var a, double s);
Var shift(Var a, double s);
Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);

// Elementwise functions.
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);
Var square(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
/// Negative inputs and exact zeros take the `slope` branch.
Var leaky_relu(Var a, double slope);
/// Gradient is passed only where lo <= a <= hi.
Var clamp(Var a, double lo, double hi);
/// Multiplies by a fixed tensor (no gradient to the mask).
Var mul_const(Var a, const Tensor& mask);

// Row-wise normalizations.
Var log_softmax_rows(Var a);
Var softmax_rows(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator-(Var a) { return neg(a); }
inline Var operator+(Var a, double s) { return shift(a, s); }
inline Var operator+(double s, Var a) { return shift(a, s); }
inline Var operator-(Var a, double s) { return shift(a, -s); }
inline Var operator-(double s, Var a) { return shift(neg(a), s); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator*(double s, Var a) { return scale(a, s); }
inline Var operator/(Var a, double s) { return scale(a, 1.0 / s); }

}  // namespace cizsl::ad
