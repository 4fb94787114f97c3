#pragma once

#include <cstddef>
#include <span>

#include "wuneng/rng.hpp"
#include "wuneng/tensor.hpp"

namespace wuneng {

enum class ActivationKind { kReluSquared, kSigmoid, kIdentity };

/// Dense kernels shared by every module. All functions are pure and use a
/// fixed ascending summation order, so results are bit-reproducible.
namespace numerics {

/// a[m x k] * b[k x n]. Rank-1 operands are treated as a single row.
TensorD matmul(const TensorD& a, const TensorD& b);
/// a^T * b for a[k x m], b[k x n].
TensorD matmul_tn(const TensorD& a, const TensorD& b);
/// a * b^T for a[m x k], b[n x k].
TensorD matmul_nt(const TensorD& a, const TensorD& b);
TensorD transpose(const TensorD& a);

/// Row-wise softmax of a square matrix. With `causal`, entries j > i are
/// excluded and come out as exactly 0.
TensorD softmax_masked_rows(const TensorD& m, bool causal);

/// scale * (x - mean) / sqrt(var + eps) + shift with population variance.
TensorD layer_norm(const TensorD& x, const TensorD& scale, const TensorD& shift,
                   double eps);
/// `layer_norm` applied to each row of a matrix.
TensorD layer_norm_rows(const TensorD& x, const TensorD& scale,
                        const TensorD& shift, double eps);

double activate(ActivationKind kind, double x) noexcept;
TensorD activation(ActivationKind kind, const TensorD& x);

double sigmoid(double x) noexcept;
/// log(1 + e^x) without overflow for large |x|.
double softplus(double x) noexcept;

/// i.i.d. uniform on +-sqrt(6 / (rows + cols)), drawn row-major from `rng`.
TensorD init_glorot(std::size_t rows, std::size_t cols, Rng& rng);

/// Elementwise helpers; shapes must match.
TensorD add(const TensorD& a, const TensorD& b);
TensorD sub(const TensorD& a, const TensorD& b);
TensorD hadamard(const TensorD& a, const TensorD& b);
TensorD scale(const TensorD& a, double s);
/// Outer product u^T r of two vectors: result[i][j] = u[i] * r[j].
TensorD outer(const TensorD& u, const TensorD& r);
double dot(std::span<const double> a, std::span<const double> b) noexcept;
double frobenius_norm(const TensorD& a) noexcept;

/// Columns [start, start + width) of a matrix.
TensorD slice_cols(const TensorD& a, std::size_t start, std::size_t width);
/// Horizontal concatenation; every part must have the same row count.
TensorD concat_cols(std::span<const TensorD> parts);

}  // namespace numerics
}  // namespace wuneng
