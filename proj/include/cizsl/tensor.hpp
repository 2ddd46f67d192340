#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace cizsl {

/// Dense row-major tensor of doubles. Every operation in the library works on
/// rank-2 tensors (a scalar is 1x1, a row vector 1xn); the shape vector is
/// kept general so serialized tensors can carry their own rank.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  /// Row-major literal, e.g. Tensor::from_rows({{1, 2}, {3, 4}}).
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor row(std::span<const double> values);
  static Tensor column(std::span<const double> values);
  static Tensor scalar(double v) { return Tensor(1, 1, v); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  std::span<double> row_span(std::size_t r);
  std::span<const double> row_span(std::size_t r) const;
  Tensor row_copy(std::size_t r) const;

  /// Value of a 1x1 tensor.
  double item() const;

  bool same_shape(const Tensor& other) const { return rows() == other.rows() && cols() == other.cols(); }
  bool all_finite() const;
  std::string shape_string() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  std::vector<std::size_t> shape_{0, 0};
  std::vector<double> data_;
};

/// Rows of `src` selected by `indices`, in order.
Tensor gather_rows(const Tensor& src, std::span<const std::size_t> indices);
/// Stack row blocks vertically; all blocks must share a column count.
Tensor vstack(std::span<const Tensor> blocks);
/// Round every entry to the nearest 32-bit float.
void narrow_to_float(Tensor& t);

}  // namespace cizsl
