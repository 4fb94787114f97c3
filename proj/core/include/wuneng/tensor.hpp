#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace wuneng {

using Dims = std::vector<std::size_t>;

/// Dense row-major array of doubles, rank 1 to 3.
///
/// Rank-1 tensors behave as a single row for the matrix helpers, so
/// `rows() == 1` and `cols() == size()`. Rank-3 tensors report
/// `rows() == dims[0]` and fold the trailing two dimensions into `cols()`.
class TensorD {
 public:
  TensorD() = default;
  explicit TensorD(Dims dims, double fill = 0.0);
  TensorD(Dims dims, std::vector<double> data);

  static TensorD scalar(double v);
  static TensorD vector(std::initializer_list<double> values);
  static TensorD vector(std::vector<double> values);
  static TensorD matrix(std::size_t rows, std::size_t cols,
                        std::initializer_list<double> values);
  static TensorD zeros(std::size_t rows, std::size_t cols);
  static TensorD identity(std::size_t n);

  const Dims& dims() const noexcept { return dims_; }
  std::size_t rank() const noexcept { return dims_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) noexcept {
    return data_[r * cols() + c];
  }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols() + c];
  }

  std::span<double> row(std::size_t r) noexcept {
    return std::span<double>(data_).subspan(r * cols(), cols());
  }
  std::span<const double> row(std::size_t r) const noexcept {
    return std::span<const double>(data_).subspan(r * cols(), cols());
  }

  /// Copy of row `r` as a rank-1 tensor.
  TensorD row_vector(std::size_t r) const;
  /// Same storage reinterpreted under new dims with equal element count.
  TensorD reshaped(Dims dims) const;

  bool all_finite() const noexcept;
  void fill(double v) noexcept;

  friend bool operator==(const TensorD&, const TensorD&) = default;

 private:
  Dims dims_;
  std::vector<double> data_;
};

std::string shape_string(const Dims& dims);

/// Throws ShapeError naming `what` when the dims differ.
void require_same_shape(const TensorD& a, const TensorD& b, const char* what);

/// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const TensorD& a, const TensorD& b);

/// Bitwise equality of every element, including the sign of zero.
bool bit_identical(const TensorD& a, const TensorD& b);

}  // namespace wuneng
