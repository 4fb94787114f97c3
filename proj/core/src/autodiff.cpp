#include "wuneng/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wuneng/error.hpp"
#include "wuneng/numerics.hpp"

namespace wuneng::ad {

const TensorD& Var::value() const { return graph->value(*this); }

Var Graph::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Graph::constant(TensorD value) {
  return push(Node{std::move(value), {}, false, {}});
}

Var Graph::parameter(TensorD value) {
  return push(Node{std::move(value), {}, record_, {}});
}

Var Graph::emit(TensorD value, std::initializer_list<Var> parents, BackwardFn fn) {
  return emit(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
              std::move(fn));
}

Var Graph::emit(TensorD value, std::span<const Var> parents, BackwardFn fn) {
  bool needs = false;
  if (record_) {
    for (const auto& p : parents) needs = needs || nodes_[p.id].needs_grad;
  }
  Node node{std::move(value), {}, needs, {}};
  if (needs) node.backward = std::move(fn);
  return push(std::move(node));
}

TensorD Graph::grad(Var v) const {
  const auto& n = nodes_[v.id];
  if (n.grad.empty()) return TensorD(n.value.dims(), 0.0);
  return n.grad;
}

void Graph::accumulate(Var v, const TensorD& delta) {
  auto& n = nodes_[v.id];
  if (!n.needs_grad) return;
  if (n.grad.empty()) {
    n.grad = delta;
    return;
  }
  auto dst = n.grad.data();
  auto src = delta.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Graph::accumulate(Var v, TensorD&& delta) {
  auto& n = nodes_[v.id];
  if (!n.needs_grad) return;
  if (n.grad.empty()) {
    n.grad = std::move(delta);
    return;
  }
  auto dst = n.grad.data();
  auto src = delta.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

TensorD& Graph::grad_buffer(Var v) {
  auto& n = nodes_[v.id];
  if (n.grad.empty()) n.grad = TensorD(n.value.dims(), 0.0);
  return n.grad;
}

void Graph::backward(Var loss) {
  if (!record_) throw Error("backward on a graph that does not record");
  if (value(loss).size() != 1) {
    throw ShapeError("backward: loss must be a single element, got " +
                     shape_string(value(loss).dims()));
  }
  for (auto& n : nodes_) n.grad = TensorD();
  if (!nodes_[loss.id].needs_grad) return;
  nodes_[loss.id].grad = TensorD(value(loss).dims(), 1.0);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    auto& n = nodes_[id];
    if (n.backward && !n.grad.empty()) n.backward(*this, id);
  }
}

namespace {

template <class Fwd, class Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  TensorD out = a.value();
  for (auto& v : out.data()) v = fwd(v);
  return a.graph->emit(std::move(out), {a}, [a, deriv](Graph& g, std::size_t self) {
    const TensorD& gy = g.grad_ref(self);
    const TensorD& x = g.value(a);
    const TensorD& y = g.value(self);
    TensorD gx(x.dims(), 0.0);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = gy[i] * deriv(x[i], y[i]);
    g.accumulate(a, std::move(gx));
  });
}

void require_single(Var s, const char* what) {
  if (s.value().size() != 1) {
    throw ShapeError(std::string(what) + ": scalar operand has shape " +
                     shape_string(s.value().dims()));
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  TensorD out = numerics::matmul(a.value(), b.value());
  return a.graph->emit(std::move(out), {a, b}, [a, b](Graph& g, std::size_t self) {
    const TensorD& gy = g.grad_ref(self);
    if (g.needs_grad(a)) {
      TensorD ga = numerics::matmul_nt(gy, g.value(b));
      g.accumulate(a, ga.reshaped(g.value(a).dims()));
    }
    if (g.needs_grad(b)) {
      TensorD gb = numerics::matmul_tn(g.value(a), gy);
      g.accumulate(b, gb.reshaped(g.value(b).dims()));
    }
  });
}

Var add(Var a, Var b) {
  TensorD out = numerics::add(a.value(), b.value());
  return a.graph->emit(std::move(out), {a, b}, [a, b](Graph& g, std::size_t self) {
    g.accumulate(a, g.grad_ref(self));
    g.accumulate(b, g.grad_ref(self));
  });
}

Var sub(Var a, Var b) {
  TensorD out = numerics::sub(a.value(), b.value());
  return a.graph->emit(std::move(out), {a, b}, [a, b](Graph& g, std::size_t self) {
    g.accumulate(a, g.grad_ref(self));
    if (g.needs_grad(b)) g.accumulate(b, numerics::scale(g.grad_ref(self), -1.0));
  });
}

Var mul(Var a, Var b) {
  TensorD out = numerics::hadamard(a.value(), b.value());
  return a.graph->emit(std::move(out), {a, b}, [a, b](Graph& g, std::size_t self) {
    const TensorD& gy = g.grad_ref(self);
    if (g.needs_grad(a)) g.accumulate(a, numerics::hadamard(gy, g.value(b)));
    if (g.needs_grad(b)) g.accumulate(b, numerics::hadamard(gy, g.value(a)));
  });
}

Var add_bias(Var a, Var bias) {
  const TensorD& x = a.value();
  const TensorD& bv = bias.value();
  if (bv.size() != x.cols()) {
    throw ShapeError("add_bias: bias " + shape_string(bv.dims()) +
                     " does not match " + shape_string(x.dims()));
  }
  TensorD out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += bv[j];
  }
  return a.graph->emit(std::move(out), {a, bias}, [a, bias](Graph& g, std::size_t self) {
    const TensorD& gy = g.grad_ref(self);
    g.accumulate(a, gy);
    if (g.needs_grad(bias)) {
      TensorD& gb = g.grad_buffer(bias);
      for (std::size_t r = 0; r < gy.rows(); ++r) {
        auto row = gy.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) gb[j] += row[j];
      }
    }
  });
}

Var scale(Var a, Var s) {
  require_single(s, "scale");
  TensorD out = numerics::scale(a.value(), s.value()[0]);
  return a.graph->emit(std::move(out), {a, s}, [a, s](Graph& g, std::size_t self) {
    const TensorD& gy = g.grad_ref(self);
    if (g.needs_grad(a)) g.accumulate(a, numerics::scale(gy, g.value(s)[0]));
    if (g.needs_grad(s)) {
      TensorD& gs = g.grad_buffer(s);
      gs[0] += numerics::dot(gy.data(), g.value(a).data());
    }
  });
}

Var scale(Var a, double c) {
  TensorD out = numerics::scale(a.value(), c);
  return a.graph->emit(std::move(out), {a}, [a, c](Graph& g, std::size_t self) {
    g.accumulate(a, numerics::scale(g.grad_ref(self), c));
  });
}

Var one_minus(Var a) {
  return unary(
      a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Var concat_cols(std::span<const Var> parts) {
  std::vector<TensorD> values;
  values.reserve(parts.size());
  for (const auto& p : parts) values.push_back(p.value());
  TensorD out = numerics::concat_cols(values);
  std::vector<Var> captured(parts.begin(), parts.end());
  return parts.front().graph->emit(
      std::move(out), parts, [captured](Graph& g, std::size_t self) {
        const TensorD& gy = g.grad_ref(self);
        std::size_t offset = 0;
        for (const auto& p : captured) {
          const std::size_t w = g.value(p).cols();
          if (g.needs_grad(p)) {
            g.accumulate(p, numerics::slice_cols(gy, offset, w).reshaped(g.value(p).dims()));
          }
          offset += w;
        }
      });
}

Var slice_cols(Var a, std::size_t start, std::size_t width) {
  TensorD out = numerics::slice_cols(a.value(), start, width);
  return a.graph->emit(std::move(out), {a}, [a, start, width](Graph& g, std::size_t self) {
    const TensorD& gy = g.grad_ref(self);
    TensorD& ga = g.grad_buffer(a);
    for (std::size_t r = 0; r < gy.rows(); ++r) {
      auto src = gy.row(r);
      auto dst = ga.row(r).subspan(start, width);
      for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
    }
  });
}

Var slice_rows(Var a, std::size_t start, std::size_t count) {
  const TensorD& x = a.value();
  if (x.rank() != 2 || count == 0 || start + count > x.rows()) {
    throw ShapeError("slice_rows: range [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") outside " + shape_string(x.dims()));
  }
  const std::size_t c = x.cols();
  auto first = x.data().begin() + static_cast<std::ptrdiff_t>(start * c);
  TensorD out({count, c}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(count * c)));
  return a.graph->emit(std::move(out), {a}, [a, start](Graph& g, std::size_t self) {
    const TensorD& gy = g.grad_ref(self);
    TensorD& ga = g.grad_buffer(a);
    const std::size_t offset = start * gy.cols();
    for (std::size_t i = 0; i < gy.size(); ++i) ga[offset + i] += gy[i];
  });
}

Var sigmoid(Var a) {
  return unary(
      a, [](double x) { return numerics::sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Var relu_squared(Var a) {
  // Subgradient at 0 is 0.
  return unary(
      a, [](double x) { return x > 0.0 ? x * x : 0.0; },
      [](double x, double) { return x > 0.0 ? 2.0 * x : 0.0; });
}

Var softplus(Var a) {
  return unary(
      a, [](double x) { return numerics::softplus(x); },
      [](double x, double) { return numerics::sigmoid(x); });
}

Var exp(Var a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var neg(Var a) {
  return unary(
      a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var l2_normalize_rows(Var a) {
  const TensorD& x = a.value();
  TensorD out(x.dims(), 0.0);
  std::vector<double> norms(x.rows(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double n = std::sqrt(numerics::dot(x.row(r), x.row(r)));
    norms[r] = n;
    if (n == 0.0) continue;
    auto src = x.row(r);
    auto dst = out.row(r);
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j] / n;
  }
  return a.graph->emit(std::move(out), {a}, [a, norms](Graph& g, std::size_t self) {
    const TensorD& gy = g.grad_ref(self);
    const TensorD& y = g.value(self);
    TensorD& ga = g.grad_buffer(a);
    for (std::size_t r = 0; r < gy.rows(); ++r) {
      if (norms[r] == 0.0) continue;
      const double proj = numerics::dot(y.row(r), gy.row(r));
      auto dy = gy.row(r);
      auto yr = y.row(r);
      auto dx = ga.row(r);
      for (std::size_t j = 0; j < dx.size(); ++j) {
        dx[j] += (dy[j] - yr[j] * proj) / norms[r];
      }
    }
  });
}

Var layer_norm_rows(Var x, Var scale, Var shift, double eps) {
  const TensorD& xv = x.value();
  TensorD out = numerics::layer_norm_rows(xv, scale.value(), shift.value(), eps);
  const std::size_t rows = xv.rows(), d = xv.cols();
  // Cache normalized values and inverse std per row for the backward pass.
  TensorD xhat(xv.dims(), 0.0);
  std::vector<double> inv_std(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    auto in = xv.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    auto xh = xhat.row(r);
    for (std::size_t j = 0; j < d; ++j) xh[j] = (in[j] - mean) * inv_std[r];
  }
  return x.graph->emit(
      std::move(out), {x, scale, shift},
      [x, scale, shift, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Graph& g, std::size_t self) {
        const TensorD& gy = g.grad_ref(self);
        const TensorD& sc = g.value(scale);
        const std::size_t d = gy.cols();
        if (g.needs_grad(scale) || g.needs_grad(shift)) {
          TensorD gs(sc.dims(), 0.0), gb(sc.dims(), 0.0);
          for (std::size_t r = 0; r < gy.rows(); ++r) {
            auto dy = gy.row(r);
            auto xh = xhat.row(r);
            for (std::size_t j = 0; j < d; ++j) {
              gs[j] += dy[j] * xh[j];
              gb[j] += dy[j];
            }
          }
          g.accumulate(scale, std::move(gs));
          g.accumulate(shift, std::move(gb));
        }
        if (!g.needs_grad(x)) return;
        TensorD& gx = g.grad_buffer(x);
        std::vector<double> dxh(d);
        for (std::size_t r = 0; r < gy.rows(); ++r) {
          auto dy = gy.row(r);
          auto xh = xhat.row(r);
          double mean_d = 0.0, mean_dx = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            dxh[j] = dy[j] * sc[j];
            mean_d += dxh[j];
            mean_dx += dxh[j] * xh[j];
          }
          mean_d /= static_cast<double>(d);
          mean_dx /= static_cast<double>(d);
          auto out_row = gx.row(r);
          for (std::size_t j = 0; j < d; ++j) {
            out_row[j] += inv_std[r] * (dxh[j] - mean_d - xh[j] * mean_dx);
          }
        }
      });
}

Var embedding(Var table, std::span<const int> ids) {
  const TensorD& t = table.value();
  const std::size_t d = t.cols();
  TensorD out({ids.size(), d}, 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= t.rows()) {
      throw ShapeError("embedding: token id " + std::to_string(ids[i]) +
                       " outside vocabulary of " + std::to_string(t.rows()));
    }
    auto src = t.row(static_cast<std::size_t>(ids[i]));
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  std::vector<int> captured(ids.begin(), ids.end());
  return table.graph->emit(std::move(out), {table}, [table, captured](Graph& g, std::size_t self) {
    const TensorD& gy = g.grad_ref(self);
    TensorD& gt = g.grad_buffer(table);
    for (std::size_t i = 0; i < captured.size(); ++i) {
      auto src = gy.row(i);
      auto dst = gt.row(static_cast<std::size_t>(captured[i]));
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
    }
  });
}

Var masked_cross_entropy(Var logits, std::span<const int> targets,
                         std::span<const double> mask) {
  const TensorD& z = logits.value();
  const std::size_t rows = z.rows(), v = z.cols();
  if (targets.size() != rows || mask.size() != rows) {
    throw ShapeError("masked_cross_entropy: " + std::to_string(rows) +
                     " logit rows vs " + std::to_string(targets.size()) + " targets and " +
                     std::to_string(mask.size()) + " mask entries");
  }
  double count = 0.0;
  for (double m : mask) count += m;
  TensorD probs(z.dims(), 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= v) {
      throw ShapeError("masked_cross_entropy: target id " + std::to_string(targets[r]) +
                       " outside vocabulary of " + std::to_string(v));
    }
    auto zr = z.row(r);
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : zr) mx = std::max(mx, x);
    double s = 0.0;
    auto pr = probs.row(r);
    for (std::size_t j = 0; j < v; ++j) {
      pr[j] = std::exp(zr[j] - mx);
      s += pr[j];
    }
    for (auto& p : pr) p /= s;
    if (mask[r] != 0.0) {
      total += mask[r] * (mx + std::log(s) - zr[static_cast<std::size_t>(targets[r])]);
    }
  }
  const double loss = count > 0.0 ? total / count : 0.0;
  std::vector<int> tgt(targets.begin(), targets.end());
  std::vector<double> msk(mask.begin(), mask.end());
  return logits.graph->emit(
      TensorD::scalar(loss), {logits},
      [logits, probs = std::move(probs), tgt = std::move(tgt), msk = std::move(msk),
       count](Graph& g, std::size_t self) {
        if (count <= 0.0) return;
        const double gl = g.grad_ref(self)[0];
        TensorD& gz = g.grad_buffer(logits);
        for (std::size_t r = 0; r < gz.rows(); ++r) {
          if (msk[r] == 0.0) continue;
          const double w = gl * msk[r] / count;
          auto pr = probs.row(r);
          auto dst = gz.row(r);
          for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += w * pr[j];
          dst[static_cast<std::size_t>(tgt[r])] -= w;
        }
      });
}

Var sum(Var a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  return a.graph->emit(TensorD::scalar(s), {a}, [a](Graph& g, std::size_t self) {
    g.accumulate(a, TensorD(g.value(a).dims(), g.grad_ref(self)[0]));
  });
}

Var sum_squares(Var a) {
  const double s = numerics::dot(a.value().data(), a.value().data());
  return a.graph->emit(TensorD::scalar(s), {a}, [a](Graph& g, std::size_t self) {
    g.accumulate(a, numerics::scale(g.value(a), 2.0 * g.grad_ref(self)[0]));
  });
}

}  // namespace wuneng::ad
