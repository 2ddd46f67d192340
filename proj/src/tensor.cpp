#include "cizsl/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "cizsl/errors.hpp"

namespace cizsl {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : shape_{rows, cols}, data_(rows * cols, fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const std::size_t n = std::accumulate(shape_.begin(), shape_.end(), std::size_t{1},
                                        std::multiplies<>());
  if (n != data_.size()) {
    throw DimensionError("tensor shape " + shape_string() + " does not match " +
                         std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  Tensor t(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged tensor literal");
    for (double v : row) t.data_[i++] = v;
  }
  return t;
}

Tensor Tensor::row(std::span<const double> values) {
  return Tensor({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::column(std::span<const double> values) {
  return Tensor({values.size(), 1}, std::vector<double>(values.begin(), values.end()));
}

std::size_t Tensor::rows() const {
  if (shape_.size() == 2) return shape_[0];
  if (shape_.size() == 1) return 1;
  if (shape_.empty()) return 1;
  throw DimensionError("rank-" + std::to_string(shape_.size()) + " tensor used as a matrix");
}

std::size_t Tensor::cols() const {
  if (shape_.size() == 2) return shape_[1];
  if (shape_.size() == 1) return shape_[0];
  if (shape_.empty()) return 1;
  throw DimensionError("rank-" + std::to_string(shape_.size()) + " tensor used as a matrix");
}

std::span<double> Tensor::row_span(std::size_t r) {
  const std::size_t c = cols();
  return std::span<double>(data_).subspan(r * c, c);
}

std::span<const double> Tensor::row_span(std::size_t r) const {
  const std::size_t c = cols();
  return std::span<const double>(data_).subspan(r * c, c);
}

Tensor Tensor::row_copy(std::size_t r) const { return Tensor::row(row_span(r)); }

double Tensor::item() const {
  if (data_.size() != 1) throw DimensionError("item() on tensor of shape " + shape_string());
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) os << 'x';
    os << shape_[i];
  }
  os << ')';
  return os.str();
}

Tensor gather_rows(const Tensor& src, std::span<const std::size_t> indices) {
  const std::size_t c = src.cols();
  Tensor out(indices.size(), c);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= src.rows()) throw DimensionError("row index out of range");
    auto from = src.row_span(indices[i]);
    std::copy(from.begin(), from.end(), out.row_span(i).begin());
  }
  return out;
}

Tensor vstack(std::span<const Tensor> blocks) {
  if (blocks.empty()) return Tensor();
  const std::size_t c = blocks.front().cols();
  std::size_t r = 0;
  for (const auto& b : blocks) {
    if (b.cols() != c) throw DimensionError("vstack column mismatch");
    r += b.rows();
  }
  Tensor out(r, c);
  std::size_t offset = 0;
  for (const auto& b : blocks) {
    std::copy(b.data().begin(), b.data().end(), out.data().begin() + static_cast<long>(offset));
    offset += b.size();
  }
  return out;
}

void narrow_to_float(Tensor& t) {
  for (double& v : t.storage()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace cizsl
