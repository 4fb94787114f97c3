#include "wuneng/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "wuneng/error.hpp"

namespace wuneng::numerics {
namespace {

void require_matrix(const TensorD& t, const char* what) {
  if (t.rank() != 1 && t.rank() != 2) {
    throw ShapeError(std::string(what) + ": expected a matrix, got " +
                     shape_string(t.dims()));
  }
}

void shape_fail(const char* what, const TensorD& a, const TensorD& b) {
  throw ShapeError(std::string(what) + ": incompatible shapes " +
                   shape_string(a.dims()) + " and " + shape_string(b.dims()));
}

}  // namespace

namespace {

// Register-tiled product kernel. Every output element is still accumulated
// from 0.0 over p = 0..k-1 in ascending order with separate multiply and add,
// so tiling changes speed only, never the result bits. `a(i, p)` is read
// through strides so one kernel serves both a * b and a^T * b.
typedef double Lane4 __attribute__((vector_size(32)));

inline Lane4 load4(const double* p) {
  Lane4 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store4(double* p, Lane4 v) { std::memcpy(p, &v, sizeof v); }

constexpr std::size_t kTileRows = 4;

template <std::size_t Lanes>
void gemm_tile(const double* a, std::size_t ars, std::size_t acs, const double* b, double* out,
               std::size_t i, std::size_t j, std::size_t k, std::size_t n) {
  Lane4 acc[kTileRows][Lanes];
  for (auto& row : acc)
    for (auto& x : row) x = Lane4{0.0, 0.0, 0.0, 0.0};
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * n + j;
    Lane4 bv[Lanes];
    for (std::size_t c = 0; c < Lanes; ++c) bv[c] = load4(brow + 4 * c);
    for (std::size_t r = 0; r < kTileRows; ++r) {
      const double av = a[(i + r) * ars + p * acs];
      for (std::size_t c = 0; c < Lanes; ++c) acc[r][c] += av * bv[c];
    }
  }
  for (std::size_t r = 0; r < kTileRows; ++r)
    for (std::size_t c = 0; c < Lanes; ++c) store4(out + (i + r) * n + j + 4 * c, acc[r][c]);
}

void gemm_strided(const double* a, std::size_t ars, std::size_t acs, const double* b, double* out,
                  std::size_t m, std::size_t k, std::size_t n) {
  std::size_t i = 0;
  for (; i + kTileRows <= m; i += kTileRows) {
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) gemm_tile<4>(a, ars, acs, b, out, i, j, k, n);
    for (; j + 4 <= n; j += 4) gemm_tile<1>(a, ars, acs, b, out, i, j, k, n);
    for (; j < n; ++j) {
      for (std::size_t r = 0; r < kTileRows; ++r) {
        double acc = 0.0;
        for (std::size_t p = 0; p < k; ++p) acc += a[(i + r) * ars + p * acs] * b[p * n + j];
        out[(i + r) * n + j] = acc;
      }
    }
  }
  for (; i < m; ++i) {
    double* orow = out + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * ars + p * acs];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
}

}  // namespace

TensorD matmul(const TensorD& a, const TensorD& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) shape_fail("matmul", a, b);
  TensorD out({m, n}, 0.0);
  gemm_strided(a.data().data(), k, 1, b.data().data(), out.data().data(), m, k, n);
  return out;
}

TensorD matmul_tn(const TensorD& a, const TensorD& b) {
  require_matrix(a, "matmul_tn");
  require_matrix(b, "matmul_tn");
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  if (b.rows() != k) shape_fail("matmul_tn", a, b);
  TensorD out({m, n}, 0.0);
  gemm_strided(a.data().data(), 1, m, b.data().data(), out.data().data(), m, k, n);
  return out;
}

TensorD matmul_nt(const TensorD& a, const TensorD& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  if (a.cols() != b.cols()) shape_fail("matmul_nt", a, b);
  return matmul(a, transpose(b));
}

TensorD transpose(const TensorD& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  TensorD out({n, m}, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(j, i) = a(i, j);
  return out;
}

TensorD softmax_masked_rows(const TensorD& m, bool causal) {
  if (m.rank() != 2 || m.rows() != m.cols()) {
    throw ShapeError("softmax_masked_rows: expected a square matrix, got " +
                     shape_string(m.dims()));
  }
  const std::size_t n = m.rows();
  TensorD out({n, n}, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t visible = causal ? i + 1 : n;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < visible; ++j) mx = std::max(mx, m(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < visible; ++j) {
      const double e = std::exp(m(i, j) - mx);
      out(i, j) = e;
      total += e;
    }
    for (std::size_t j = 0; j < visible; ++j) out(i, j) /= total;
  }
  return out;
}

TensorD layer_norm(const TensorD& x, const TensorD& scale, const TensorD& shift,
                   double eps) {
  if (x.rank() != 1) {
    throw ShapeError("layer_norm: expected a vector, got " + shape_string(x.dims()));
  }
  return layer_norm_rows(x.reshaped({1, x.size()}), scale, shift, eps)
      .reshaped({x.size()});
}

TensorD layer_norm_rows(const TensorD& x, const TensorD& scale,
                        const TensorD& shift, double eps) {
  require_matrix(x, "layer_norm");
  const std::size_t d = x.cols();
  if (d < 2) throw ShapeError("layer_norm: feature dimension must be >= 2");
  if (scale.size() != d || shift.size() != d) {
    throw ShapeError("layer_norm: scale/shift length must equal " + std::to_string(d));
  }
  if (!(eps > 0.0)) throw ShapeError("layer_norm: eps must be positive");
  TensorD out(x.dims(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto o = out.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      o[j] = scale[j] * ((in[j] - mean) * inv) + shift[j];
    }
  }
  return out;
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) noexcept {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double activate(ActivationKind kind, double x) noexcept {
  switch (kind) {
    case ActivationKind::kReluSquared:
      return x > 0.0 ? x * x : 0.0;
    case ActivationKind::kSigmoid:
      return sigmoid(x);
    case ActivationKind::kIdentity:
      return x;
  }
  return x;
}

TensorD activation(ActivationKind kind, const TensorD& x) {
  TensorD out = x;
  for (auto& v : out.data()) v = activate(kind, v);
  return out;
}

TensorD init_glorot(std::size_t rows, std::size_t cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  TensorD out({rows, cols}, 0.0);
  for (auto& v : out.data()) v = rng.uniform(-bound, bound);
  return out;
}

TensorD add(const TensorD& a, const TensorD& b) {
  require_same_shape(a, b, "add");
  TensorD out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

TensorD sub(const TensorD& a, const TensorD& b) {
  require_same_shape(a, b, "sub");
  TensorD out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

TensorD hadamard(const TensorD& a, const TensorD& b) {
  require_same_shape(a, b, "hadamard");
  TensorD out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

TensorD scale(const TensorD& a, double s) {
  TensorD out = a;
  for (auto& v : out.data()) v *= s;
  return out;
}

TensorD outer(const TensorD& u, const TensorD& r) {
  TensorD out({u.size(), r.size()}, 0.0);
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < r.size(); ++j) out(i, j) = u[i] * r[j];
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double frobenius_norm(const TensorD& a) noexcept {
  return std::sqrt(dot(a.data(), a.data()));
}

TensorD slice_cols(const TensorD& a, std::size_t start, std::size_t width) {
  require_matrix(a, "slice_cols");
  if (start + width > a.cols() || width == 0) {
    throw ShapeError("slice_cols: range [" + std::to_string(start) + ", " +
                     std::to_string(start + width) + ") outside " +
                     shape_string(a.dims()));
  }
  TensorD out({a.rows(), width}, 0.0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto src = a.row(r).subspan(start, width);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

TensorD concat_cols(std::span<const TensorD> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  const std::size_t rows = parts.front().rows();
  std::size_t width = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row count mismatch " + shape_string(p.dims()) +
                       " vs " + std::to_string(rows) + " rows");
    }
    width += p.cols();
  }
  TensorD out({rows, width}, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    auto dst = out.row(r).begin();
    for (const auto& p : parts) {
      auto src = p.row(r);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  return out;
}

}  // namespace wuneng::numerics
