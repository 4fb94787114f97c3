#include "wuneng/tensor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>

#include "wuneng/error.hpp"

namespace wuneng {
namespace {

std::size_t product(const Dims& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         std::multiplies<>());
}

void validate_dims(const Dims& dims) {
  if (dims.empty() || dims.size() > 3) {
    throw ShapeError("tensor rank must be 1..3, got " + shape_string(dims));
  }
  for (auto d : dims) {
    if (d == 0) {
      throw ShapeError("tensor dims must be positive, got " + shape_string(dims));
    }
  }
}

}  // namespace

TensorD::TensorD(Dims dims, double fill) : dims_(std::move(dims)) {
  validate_dims(dims_);
  data_.assign(product(dims_), fill);
}

TensorD::TensorD(Dims dims, std::vector<double> data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  validate_dims(dims_);
  if (product(dims_) != data_.size()) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match dims " + shape_string(dims_));
  }
}

TensorD TensorD::scalar(double v) { return TensorD({1}, std::vector<double>{v}); }

TensorD TensorD::vector(std::initializer_list<double> values) {
  return TensorD({values.size()}, std::vector<double>(values));
}

TensorD TensorD::vector(std::vector<double> values) {
  const auto n = values.size();
  return TensorD({n}, std::move(values));
}

TensorD TensorD::matrix(std::size_t rows, std::size_t cols,
                        std::initializer_list<double> values) {
  return TensorD({rows, cols}, std::vector<double>(values));
}

TensorD TensorD::zeros(std::size_t rows, std::size_t cols) {
  return TensorD({rows, cols}, 0.0);
}

TensorD TensorD::identity(std::size_t n) {
  TensorD out({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

std::size_t TensorD::rows() const noexcept {
  if (dims_.empty()) return 0;
  return dims_.size() == 1 ? 1 : dims_[0];
}

std::size_t TensorD::cols() const noexcept {
  switch (dims_.size()) {
    case 0:
      return 0;
    case 1:
      return dims_[0];
    case 2:
      return dims_[1];
    default:
      return dims_[1] * dims_[2];
  }
}

TensorD TensorD::row_vector(std::size_t r) const {
  auto span = row(r);
  return TensorD({span.size()}, std::vector<double>(span.begin(), span.end()));
}

TensorD TensorD::reshaped(Dims dims) const { return TensorD(std::move(dims), data_); }

bool TensorD::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

void TensorD::fill(double v) noexcept { std::fill(data_.begin(), data_.end(), v); }

std::string shape_string(const Dims& dims) {
  std::string out = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(dims[i]);
  }
  return out + "]";
}

void require_same_shape(const TensorD& a, const TensorD& b, const char* what) {
  if (a.dims() != b.dims()) {
    throw ShapeError(std::string(what) + ": shape mismatch " +
                     shape_string(a.dims()) + " vs " + shape_string(b.dims()));
  }
}

double max_abs_diff(const TensorD& a, const TensorD& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

bool bit_identical(const TensorD& a, const TensorD& b) {
  if (a.dims() != b.dims()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) {
      return false;
    }
  }
  return true;
}

}  // namespace wuneng
