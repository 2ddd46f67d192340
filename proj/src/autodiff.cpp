#include "cizsl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "cizsl/errors.hpp"
#include "cizsl/kernels.hpp"

namespace cizsl::ad {

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::variable(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Tensor value, std::vector<Var> inputs, Backward backward) {
  Node n;
  n.value = std::move(value);
  if (recording_) {
    for (const Var& in : inputs) {
      if (requires_grad(in)) {
        n.requires_grad = true;
        break;
      }
    }
  }
  if (n.requires_grad) {
    n.inputs.reserve(inputs.size());
    for (const Var& in : inputs) n.inputs.push_back(in.id());
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

std::vector<Var> Tape::gradient(Var output, std::span<const Var> wrt, bool create_graph) {
  if (output.rows() != 1 || output.cols() != 1) {
    throw DimensionError("gradient() needs a scalar output, got " + output.value().shape_string());
  }
  std::optional<NoGradScope> no_grad;
  if (!create_graph) no_grad.emplace(*this);

  const auto count = static_cast<std::size_t>(output.id()) + 1;
  // reaches[i]: some node in `wrt` is an ancestor of (or equal to) node i.
  std::vector<char> reaches(count, 0);
  for (const Var& w : wrt) {
    if (static_cast<std::size_t>(w.id()) < count) reaches[static_cast<std::size_t>(w.id())] = 1;
  }
  for (std::size_t i = 0; i < count; ++i) {
    if (reaches[i]) continue;
    for (int in : nodes_[i].inputs) {
      if (reaches[static_cast<std::size_t>(in)]) {
        reaches[i] = 1;
        break;
      }
    }
  }

  std::vector<Var> grads(count);
  grads[count - 1] = constant(Tensor(1, 1, 1.0));
  std::vector<bool> wanted;
  for (std::size_t i = count; i-- > 0;) {
    if (!grads[i].valid() || !reaches[i]) continue;
    const Node& node = nodes_[i];
    if (!node.backward) continue;
    wanted.assign(node.inputs.size(), false);
    bool any = false;
    for (std::size_t j = 0; j < node.inputs.size(); ++j) {
      wanted[j] = reaches[static_cast<std::size_t>(node.inputs[j])] != 0;
      any = any || wanted[j];
    }
    if (!any) continue;
    std::vector<Var> in_grads = node.backward(Var(this, static_cast<int>(i)), grads[i], wanted);
    for (std::size_t j = 0; j < node.inputs.size(); ++j) {
      if (!wanted[j] || !in_grads[j].valid()) continue;
      Var& slot = grads[static_cast<std::size_t>(node.inputs[j])];
      slot = slot.valid() ? add(slot, in_grads[j]) : in_grads[j];
    }
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    const auto id = static_cast<std::size_t>(w.id());
    if (id < count && grads[id].valid()) {
      out.push_back(grads[id]);
    } else {
      out.push_back(constant(Tensor(w.rows(), w.cols(), 0.0)));
    }
  }
  return out;
}

namespace {

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

// Target shape for broadcasting two operands.
std::pair<std::size_t, std::size_t> broadcast_shape(const Tensor& a, const Tensor& b, const char* op) {
  auto dim = [&](std::size_t x, std::size_t y) {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    throw DimensionError(std::string(op) + ": cannot broadcast " + a.shape_string() + " with " +
                         b.shape_string());
  };
  return {dim(a.rows(), b.rows()), dim(a.cols(), b.cols())};
}

std::pair<Var, Var> broadcast_pair(Var a, Var b, const char* op) {
  if (a.value().same_shape(b.value())) return {a, b};
  auto [r, c] = broadcast_shape(a.value(), b.value(), op);
  if (a.rows() != r || a.cols() != c) a = broadcast_to(a, r, c);
  if (b.rows() != r || b.cols() != c) b = broadcast_to(b, r, c);
  return {a, b};
}

template <class F>
Tensor map(const Tensor& a, F f) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <class F>
Tensor zip(const Tensor& a, const Tensor& b, F f) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

}  // namespace

Var transpose(Var a) {
  const Tensor& v = a.value();
  Tensor out(v.cols(), v.rows());
  for (std::size_t i = 0; i < v.rows(); ++i)
    for (std::size_t j = 0; j < v.cols(); ++j) out(j, i) = v(i, j);
  return a.tape().record(std::move(out), {a}, [](Var, Var g, const std::vector<bool>&) {
    return std::vector<Var>{transpose(g)};
  });
}

Var broadcast_to(Var a, std::size_t rows, std::size_t cols) {
  const Tensor& v = a.value();
  const std::size_t ar = v.rows(), ac = v.cols();
  if (ar == rows && ac == cols) return a;
  if ((ar != 1 && ar != rows) || (ac != 1 && ac != cols)) {
    throw DimensionError("broadcast_to: cannot expand " + v.shape_string());
  }
  Tensor out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = v(ar == 1 ? 0 : i, ac == 1 ? 0 : j);
  return a.tape().record(std::move(out), {a}, [ar, ac](Var, Var g, const std::vector<bool>&) {
    return std::vector<Var>{sum_to(g, ar, ac)};
  });
}

Var sum_to(Var a, std::size_t rows, std::size_t cols) {
  const std::size_t ar = a.rows(), ac = a.cols();
  if (ar == rows && ac == cols) return a;
  if (rows == 1 && cols == 1) return sum(a);
  if (rows == 1 && cols == ac) return sum_rows(a);
  if (cols == 1 && rows == ar) return sum_cols(a);
  throw DimensionError("sum_to: cannot reduce " + a.value().shape_string());
}

Var sum(Var a) {
  const Tensor& v = a.value();
  double s = 0.0;
  for (double x : v.data()) s += x;
  const std::size_t r = v.rows(), c = v.cols();
  return a.tape().record(Tensor(1, 1, s), {a}, [r, c](Var, Var g, const std::vector<bool>&) {
    return std::vector<Var>{broadcast_to(g, r, c)};
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var sum_rows(Var a) {
  const Tensor& v = a.value();
  const std::size_t r = v.rows(), c = v.cols();
  Tensor out(1, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(0, j) += v(i, j);
  return a.tape().record(std::move(out), {a}, [r, c](Var, Var g, const std::vector<bool>&) {
    return std::vector<Var>{broadcast_to(g, r, c)};
  });
}

Var sum_cols(Var a) {
  const Tensor& v = a.value();
  const std::size_t r = v.rows(), c = v.cols();
  Tensor out(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += v(i, j);
    out(i, 0) = s;
  }
  return a.tape().record(std::move(out), {a}, [r, c](Var, Var g, const std::vector<bool>&) {
    return std::vector<Var>{broadcast_to(g, r, c)};
  });
}

Var concat_cols(Var a, Var b) {
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  if (va.rows() != vb.rows()) {
    throw DimensionError("concat_cols: row mismatch " + va.shape_string() + " vs " + vb.shape_string());
  }
  const std::size_t r = va.rows(), ca = va.cols(), cb = vb.cols();
  Tensor out(r, ca + cb);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < ca; ++j) out(i, j) = va(i, j);
    for (std::size_t j = 0; j < cb; ++j) out(i, ca + j) = vb(i, j);
  }
  return a.tape().record(std::move(out), {a, b}, [ca, cb](Var, Var g, const std::vector<bool>& w) {
    std::vector<Var> res(2);
    if (w[0]) res[0] = slice_cols(g, 0, ca);
    if (w[1]) res[1] = slice_cols(g, ca, cb);
    return res;
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Tensor& v = a.value();
  if (begin + count > v.cols()) throw DimensionError("slice_cols: out of range");
  const std::size_t r = v.rows(), total = v.cols();
  Tensor out(r, count);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = v(i, begin + j);
  return a.tape().record(std::move(out), {a}, [begin, total](Var, Var g, const std::vector<bool>&) {
    return std::vector<Var>{pad_cols(g, begin, total)};
  });
}

Var pad_cols(Var a, std::size_t begin, std::size_t total) {
  const Tensor& v = a.value();
  const std::size_t r = v.rows(), count = v.cols();
  if (begin + count > total) throw DimensionError("pad_cols: out of range");
  Tensor out(r, total);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, begin + j) = v(i, j);
  return a.tape().record(std::move(out), {a}, [begin, count](Var, Var g, const std::vector<bool>&) {
    return std::vector<Var>{slice_cols(g, begin, count)};
  });
}

Var pick(Var a, std::size_t r, std::size_t c) {
  const Tensor& v = a.value();
  if (r >= v.rows() || c >= v.cols()) throw DimensionError("pick: index out of range");
  const std::size_t rows = v.rows(), cols = v.cols();
  return a.tape().record(Tensor(1, 1, v(r, c)), {a}, [r, c, rows, cols](Var, Var g, const std::vector<bool>&) {
    return std::vector<Var>{place(g, r, c, rows, cols)};
  });
}

Var place(Var s, std::size_t r, std::size_t c, std::size_t rows, std::size_t cols) {
  Tensor out(rows, cols);
  out(r, c) = s.value().item();
  return s.tape().record(std::move(out), {s}, [r, c](Var, Var g, const std::vector<bool>&) {
    return std::vector<Var>{pick(g, r, c)};
  });
}

Var min_all(Var a) {
  const Tensor& v = a.value();
  if (v.empty()) throw DimensionError("min_all on empty tensor");
  const auto it = std::min_element(v.data().begin(), v.data().end());
  const auto idx = static_cast<std::size_t>(it - v.data().begin());
  return pick(a, idx / v.cols(), idx % v.cols());
}

Var max_all(Var a) {
  const Tensor& v = a.value();
  if (v.empty()) throw DimensionError("max_all on empty tensor");
  const auto it = std::max_element(v.data().begin(), v.data().end());
  const auto idx = static_cast<std::size_t>(it - v.data().begin());
  return pick(a, idx / v.cols(), idx % v.cols());
}

Var add(Var a, Var b) {
  auto [x, y] = broadcast_pair(a, b, "add");
  Tensor out = zip(x.value(), y.value(), [](double p, double q) { return p + q; });
  return x.tape().record(std::move(out), {x, y}, [](Var, Var g, const std::vector<bool>&) {
    return std::vector<Var>{g, g};
  });
}

Var sub(Var a, Var b) {
  auto [x, y] = broadcast_pair(a, b, "sub");
  Tensor out = zip(x.value(), y.value(), [](double p, double q) { return p - q; });
  return x.tape().record(std::move(out), {x, y}, [](Var, Var g, const std::vector<bool>& w) {
    std::vector<Var> res(2);
    if (w[0]) res[0] = g;
    if (w[1]) res[1] = neg(g);
    return res;
  });
}

Var mul(Var a, Var b) {
  auto [x, y] = broadcast_pair(a, b, "mul");
  Tensor out = zip(x.value(), y.value(), [](double p, double q) { return p * q; });
  return x.tape().record(std::move(out), {x, y}, [x, y](Var, Var g, const std::vector<bool>& w) {
    std::vector<Var> res(2);
    if (w[0]) res[0] = mul(g, y);
    if (w[1]) res[1] = mul(g, x);
    return res;
  });
}

Var div(Var a, Var b) {
  auto [x, y] = broadcast_pair(a, b, "div");
  Tensor out = zip(x.value(), y.value(), [](double p, double q) { return p / q; });
  return x.tape().record(std::move(out), {x, y}, [x, y](Var self, Var g, const std::vector<bool>& w) {
    std::vector<Var> res(2);
    if (w[0]) res[0] = div(g, y);
    if (w[1]) res[1] = neg(div(mul(g, self), y));
    return res;
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double s) {
  Tensor out = map(a.value(), [s](double p) { return p * s; });
  return a.tape().record(std::move(out), {a}, [s](Var, Var g, const std::vector<bool>&) {
    return std::vector<Var>{scale(g, s)};
  });
}

Var shift(Var a, double s) {
  Tensor out = map(a.value(), [s](double p) { return p + s; });
  return a.tape().record(std::move(out), {a}, [](Var, Var g, const std::vector<bool>&) {
    return std::vector<Var>{g};
  });
}

Var matmul(Var a, Var b, bool transpose_a, bool transpose_b) {
  const Tensor& va = a.value();
  const Tensor& vb = b.value();
  if (transpose_a && transpose_b) throw DimensionError("matmul: double transpose unsupported");
  const std::size_t m = transpose_a ? va.cols() : va.rows();
  const std::size_t k = transpose_a ? va.rows() : va.cols();
  const std::size_t kb = transpose_b ? vb.cols() : vb.rows();
  const std::size_t n = transpose_b ? vb.rows() : vb.cols();
  if (k != kb) {
    throw DimensionError("matmul: inner dimension mismatch " + va.shape_string() + " vs " +
                         vb.shape_string());
  }
  Tensor out(m, n);
  if (transpose_a) {
    kernels::gemm_tn(va.data(), vb.data(), out.data(), m, k, n);
  } else if (transpose_b) {
    kernels::gemm_nt(va.data(), vb.data(), out.data(), m, k, n);
  } else {
    kernels::gemm_nn(va.data(), vb.data(), out.data(), m, k, n);
  }
  return a.tape().record(std::move(out), {a, b},
                         [a, b, transpose_a, transpose_b](Var, Var g, const std::vector<bool>& w) {
                           std::vector<Var> res(2);
                           if (transpose_a) {  // C = A^T B
                             if (w[0]) res[0] = matmul(b, g, false, true);
                             if (w[1]) res[1] = matmul(a, g);
                           } else if (transpose_b) {  // C = A B^T
                             if (w[0]) res[0] = matmul(g, b);
                             if (w[1]) res[1] = matmul(g, a, true, false);
                           } else {  // C = A B
                             if (w[0]) res[0] = matmul(g, b, false, true);
                             if (w[1]) res[1] = matmul(a, g, true, false);
                           }
                           return res;
                         });
}

Var exp(Var a) {
  Tensor out = map(a.value(), [](double p) { return std::exp(p); });
  return a.tape().record(std::move(out), {a}, [](Var self, Var g, const std::vector<bool>&) {
    return std::vector<Var>{mul(g, self)};
  });
}

Var log(Var a) {
  Tensor out = map(a.value(), [](double p) { return std::log(p); });
  return a.tape().record(std::move(out), {a}, [a](Var, Var g, const std::vector<bool>&) {
    return std::vector<Var>{div(g, a)};
  });
}

Var sqrt(Var a) {
  Tensor out = map(a.value(), [](double p) { return std::sqrt(p); });
  return a.tape().record(std::move(out), {a}, [](Var self, Var g, const std::vector<bool>&) {
    return std::vector<Var>{div(scale(g, 0.5), self)};
  });
}

Var square(Var a) {
  Tensor out = map(a.value(), [](double p) { return p * p; });
  return a.tape().record(std::move(out), {a}, [a](Var, Var g, const std::vector<bool>&) {
    return std::vector<Var>{mul(g, scale(a, 2.0))};
  });
}

Var tanh(Var a) {
  Tensor out = map(a.value(), [](double p) { return std::tanh(p); });
  return a.tape().record(std::move(out), {a}, [](Var self, Var g, const std::vector<bool>&) {
    return std::vector<Var>{mul(g, 1.0 - square(self))};
  });
}

Var sigmoid(Var a) {
  Tensor out = map(a.value(), [](double p) {
    if (p >= 0) return 1.0 / (1.0 + std::exp(-p));
    const double e = std::exp(p);
    return e / (1.0 + e);
  });
  return a.tape().record(std::move(out), {a}, [](Var self, Var g, const std::vector<bool>&) {
    return std::vector<Var>{mul(g, mul(self, 1.0 - self))};
  });
}

Var softplus(Var a) {
  Tensor out = map(a.value(), [](double p) {
    return p > 0 ? p + std::log1p(std::exp(-p)) : std::log1p(std::exp(p));
  });
  return a.tape().record(std::move(out), {a}, [a](Var, Var g, const std::vector<bool>&) {
    return std::vector<Var>{mul(g, sigmoid(a))};
  });
}

Var leaky_relu(Var a, double slope) {
  const Tensor& v = a.value();
  Tensor mask = map(v, [slope](double p) { return p > 0 ? 1.0 : slope; });
  Tensor out = zip(v, mask, [](double p, double m) { return p * m; });
  return a.tape().record(std::move(out), {a}, [mask = std::move(mask)](Var, Var g, const std::vector<bool>&) {
    return std::vector<Var>{mul_const(g, mask)};
  });
}

Var clamp(Var a, double lo, double hi) {
  const Tensor& v = a.value();
  Tensor mask = map(v, [lo, hi](double p) { return (p >= lo && p <= hi) ? 1.0 : 0.0; });
  Tensor out = map(v, [lo, hi](double p) { return std::clamp(p, lo, hi); });
  return a.tape().record(std::move(out), {a}, [mask = std::move(mask)](Var, Var g, const std::vector<bool>&) {
    return std::vector<Var>{mul_const(g, mask)};
  });
}

Var mul_const(Var a, const Tensor& mask) {
  require_same(a.value(), mask, "mul_const");
  Tensor out = zip(a.value(), mask, [](double p, double m) { return p * m; });
  return a.tape().record(std::move(out), {a}, [mask](Var, Var g, const std::vector<bool>&) {
    return std::vector<Var>{mul_const(g, mask)};
  });
}

Var log_softmax_rows(Var a) {
  const Tensor& v = a.value();
  const std::size_t r = v.rows(), c = v.cols();
  Tensor out(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double mx = v(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, v(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(v(i, j) - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < c; ++j) out(i, j) = v(i, j) - lse;
  }
  return a.tape().record(std::move(out), {a}, [](Var self, Var g, const std::vector<bool>&) {
    return std::vector<Var>{sub(g, mul(exp(self), sum_cols(g)))};
  });
}

Var softmax_rows(Var a) { return exp(log_softmax_rows(a)); }

}  // namespace cizsl::ad
