// Copyright 2026 The sdsr authors
//
// Licensed under the Apache License, Version 2.0

#include "sdsr/ops.hpp"

#include <algorithm>
#include <cmath>

namespace sdsr::ops {

namespace {

bool out_requires_grad(const Tape& tape, std::initializer_list<const Tensor*> inputs) {
  if (!tape.enabled()) return false;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
  }
}

}  // namespace

Tensor linear(Tape& tape, const Tensor& x, const Tensor& W, const Tensor& b) {
  if (W.rank() != 2) throw ShapeError("linear: weight must be rank 2, got " + W.shape_str());
  const std::size_t d_out = W.dim(0);
  const std::size_t d_in = W.dim(1);
  if (x.last_dim() != d_in) {
    throw ShapeError("linear: input " + x.shape_str() + " does not match weight " +
                     W.shape_str());
  }
  if (b.defined() && (b.rank() != 1 || b.dim(0) != d_out)) {
    throw ShapeError("linear: bias " + b.shape_str() + " does not match weight " +
                     W.shape_str());
  }
  std::vector<std::size_t> out_shape = x.shape();
  out_shape.back() = d_out;
  Tensor y = Tensor::zeros(out_shape);
  const std::size_t rows = x.rows();
  const double* xv = x.values().data();
  const double* wv = W.values().data();
  double* yv = y.values().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv + r * d_in;
    double* yr = yv + r * d_out;
    if (b.defined()) {
      const double* bv = b.values().data();
      for (std::size_t o = 0; o < d_out; ++o) yr[o] = bv[o];
    }
    for (std::size_t o = 0; o < d_out; ++o) {
      const double* wr = wv + o * d_in;
      double acc = yr[o];
      for (std::size_t i = 0; i < d_in; ++i) acc += wr[i] * xr[i];
      yr[o] = acc;
    }
  }
  const bool rg = out_requires_grad(tape, {&x, &W, &b});
  y.set_requires_grad(rg);
  if (rg) {
    Tensor xc = x, Wc = W, bc = b, yc = y;
    tape.record(
        [xc, Wc, bc, yc, rows, d_in, d_out]() mutable {
          const std::vector<double>& gy = yc.grad();
          const double* wv = Wc.values().data();
          const double* xv = xc.values().data();
          if (xc.requires_grad()) {
            std::vector<double>& gx = xc.grad();
            for (std::size_t r = 0; r < rows; ++r) {
              const double* gyr = gy.data() + r * d_out;
              double* gxr = gx.data() + r * d_in;
              for (std::size_t o = 0; o < d_out; ++o) {
                const double g = gyr[o];
                if (g == 0.0) continue;
                const double* wr = wv + o * d_in;
                for (std::size_t i = 0; i < d_in; ++i) gxr[i] += g * wr[i];
              }
            }
          }
          if (Wc.requires_grad()) {
            std::vector<double>& gw = Wc.grad();
            for (std::size_t r = 0; r < rows; ++r) {
              const double* gyr = gy.data() + r * d_out;
              const double* xr = xv + r * d_in;
              for (std::size_t o = 0; o < d_out; ++o) {
                const double g = gyr[o];
                if (g == 0.0) continue;
                double* gwr = gw.data() + o * d_in;
                for (std::size_t i = 0; i < d_in; ++i) gwr[i] += g * xr[i];
              }
            }
          }
          if (bc.defined() && bc.requires_grad()) {
            std::vector<double>& gb = bc.grad();
            for (std::size_t r = 0; r < rows; ++r) {
              const double* gyr = gy.data() + r * d_out;
              for (std::size_t o = 0; o < d_out; ++o) gb[o] += gyr[o];
            }
          }
        },
        {x, W, b, y});
  }
  return y;
}

Tensor linear(Tape& tape, const Tensor& x, const Tensor& W) {
  return linear(tape, x, W, Tensor());
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + a.shape_str() + " x " + b.shape_str());
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c = Tensor::zeros({m, n});
  const double* av = a.values().data();
  const double* bv = b.values().data();
  double* cv = c.values().data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aval = av[i * k + p];
      if (aval == 0.0) continue;
      const double* br = bv + p * n;
      double* cr = cv + i * n;
      for (std::size_t j = 0; j < n; ++j) cr[j] += aval * br[j];
    }
  }
  const bool rg = out_requires_grad(tape, {&a, &b});
  c.set_requires_grad(rg);
  if (rg) {
    Tensor ac = a, bc = b, cc = c;
    tape.record(
        [ac, bc, cc, m, k, n]() mutable {
          const std::vector<double>& gc = cc.grad();
          if (ac.requires_grad()) {
            std::vector<double>& ga = ac.grad();
            const double* bv = bc.values().data();
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t j = 0; j < n; ++j) {
                const double g = gc[i * n + j];
                if (g == 0.0) continue;
                for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += g * bv[p * n + j];
              }
            }
          }
          if (bc.requires_grad()) {
            std::vector<double>& gb = bc.grad();
            const double* av = ac.values().data();
            for (std::size_t i = 0; i < m; ++i) {
              for (std::size_t p = 0; p < k; ++p) {
                const double aval = av[i * k + p];
                if (aval == 0.0) continue;
                for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aval * gc[i * n + j];
              }
            }
          }
        },
        {a, b, c});
  }
  return c;
}

Tensor transpose2(Tape& tape, const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("transpose2: need rank 2, got " + x.shape_str());
  const std::size_t m = x.dim(0), n = x.dim(1);
  Tensor y = Tensor::zeros({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) y.value(j * m + i) = x.value(i * n + j);
  const bool rg = out_requires_grad(tape, {&x});
  y.set_requires_grad(rg);
  if (rg) {
    Tensor xc = x, yc = y;
    tape.record(
        [xc, yc, m, n]() mutable {
          if (!xc.requires_grad()) return;
          const std::vector<double>& gy = yc.grad();
          std::vector<double>& gx = xc.grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) gx[i * n + j] += gy[j * m + i];
        },
        {x, y});
  }
  return y;
}

namespace {

template <typename Fwd, typename Bwd>
Tensor elementwise_binary(Tape& tape, const Tensor& a, const Tensor& b, const char* op, Fwd fwd,
                          Bwd bwd) {
  check_same_shape(a, b, op);
  Tensor y = Tensor::zeros(a.shape());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) y.value(i) = fwd(a.value(i), b.value(i));
  const bool rg = out_requires_grad(tape, {&a, &b});
  y.set_requires_grad(rg);
  if (rg) {
    Tensor ac = a, bc = b, yc = y;
    tape.record(
        [ac, bc, yc, n, bwd]() mutable {
          const std::vector<double>& gy = yc.grad();
          std::vector<double>* ga = ac.requires_grad() ? &ac.grad() : nullptr;
          std::vector<double>* gb = bc.requires_grad() ? &bc.grad() : nullptr;
          for (std::size_t i = 0; i < n; ++i) {
            auto [da, db] = bwd(ac.value(i), bc.value(i));
            if (ga) (*ga)[i] += gy[i] * da;
            if (gb) (*gb)[i] += gy[i] * db;
          }
        },
        {a, b, y});
  }
  return y;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      tape, a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return std::pair<double, double>{1.0, 1.0}; });
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      tape, a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return std::pair<double, double>{1.0, -1.0}; });
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      tape, a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y) { return std::pair<double, double>{y, x}; });
}

Tensor scale(Tape& tape, const Tensor& x, double c) {
  Tensor y = Tensor::zeros(x.shape());
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) y.value(i) = c * x.value(i);
  const bool rg = out_requires_grad(tape, {&x});
  y.set_requires_grad(rg);
  if (rg) {
    Tensor xc = x, yc = y;
    tape.record(
        [xc, yc, n, c]() mutable {
          if (!xc.requires_grad()) return;
          const std::vector<double>& gy = yc.grad();
          std::vector<double>& gx = xc.grad();
          for (std::size_t i = 0; i < n; ++i) gx[i] += c * gy[i];
        },
        {x, y});
  }
  return y;
}

Tensor scale_by(Tape& tape, const Tensor& x, const Tensor& s) {
  if (s.size() != 1) throw ShapeError("scale_by: scale must be scalar, got " + s.shape_str());
  Tensor y = Tensor::zeros(x.shape());
  const double sv = s.value(0);
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) y.value(i) = sv * x.value(i);
  const bool rg = out_requires_grad(tape, {&x, &s});
  y.set_requires_grad(rg);
  if (rg) {
    Tensor xc = x, sc = s, yc = y;
    tape.record(
        [xc, sc, yc, n, sv]() mutable {
          const std::vector<double>& gy = yc.grad();
          if (xc.requires_grad()) {
            std::vector<double>& gx = xc.grad();
            for (std::size_t i = 0; i < n; ++i) gx[i] += sv * gy[i];
          }
          if (sc.requires_grad()) {
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) acc += gy[i] * xc.value(i);
            sc.grad()[0] += acc;
          }
        },
        {x, s, y});
  }
  return y;
}

namespace {

template <typename Fwd, typename Bwd>
Tensor elementwise_unary(Tape& tape, const Tensor& x, Fwd fwd, Bwd bwd) {
  Tensor y = Tensor::zeros(x.shape());
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) y.value(i) = fwd(x.value(i));
  const bool rg = out_requires_grad(tape, {&x});
  y.set_requires_grad(rg);
  if (rg) {
    Tensor xc = x, yc = y;
    tape.record(
        [xc, yc, n, bwd]() mutable {
          if (!xc.requires_grad()) return;
          const std::vector<double>& gy = yc.grad();
          std::vector<double>& gx = xc.grad();
          for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i] * bwd(xc.value(i), yc.value(i));
        },
        {x, y});
  }
  return y;
}

}  // namespace

Tensor tanh_op(Tape& tape, const Tensor& x) {
  return elementwise_unary(
      tape, x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid_op(Tape& tape, const Tensor& x) {
  auto sig = [](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  };
  return elementwise_unary(tape, x, sig, [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(Tape& tape, const Tensor& x) {
  return elementwise_unary(
      tape, x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

std::pair<Tensor, Tensor> softmax_logsoftmax(Tape& tape, const Tensor& z) {
  const std::size_t v = z.last_dim();
  const std::size_t rows = z.rows();
  if (v < 1) throw ShapeError("softmax: empty trailing dimension");
  for (double val : z.values()) {
    if (!std::isfinite(val)) throw NumericError("softmax: non-finite input");
  }
  Tensor p = Tensor::zeros(z.shape());
  Tensor lp = Tensor::zeros(z.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* zr = z.values().data() + r * v;
    double m = zr[0];
    for (std::size_t i = 1; i < v; ++i) m = std::max(m, zr[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < v; ++i) s += std::exp(zr[i] - m);
    const double log_s = std::log(s);
    double* pr = p.values().data() + r * v;
    double* lr = lp.values().data() + r * v;
    for (std::size_t i = 0; i < v; ++i) {
      const double e = std::exp(zr[i] - m);
      pr[i] = e / s;
      lr[i] = zr[i] - m - log_s;
    }
  }
  const bool rg = out_requires_grad(tape, {&z});
  p.set_requires_grad(rg);
  lp.set_requires_grad(rg);
  if (rg) {
    Tensor zc = z, pc = p, lc = lp;
    tape.record(
        [zc, pc, lc, rows, v]() mutable {
          if (!zc.requires_grad()) return;
          std::vector<double>& gz = zc.grad();
          const std::vector<double>& gp = pc.grad();
          const std::vector<double>& gl = lc.grad();
          for (std::size_t r = 0; r < rows; ++r) {
            const double* pr = pc.values().data() + r * v;
            const double* gpr = gp.data() + r * v;
            const double* glr = gl.data() + r * v;
            double dot_p = 0.0, sum_l = 0.0;
            for (std::size_t i = 0; i < v; ++i) {
              dot_p += gpr[i] * pr[i];
              sum_l += glr[i];
            }
            double* gzr = gz.data() + r * v;
            for (std::size_t i = 0; i < v; ++i) {
              gzr[i] += pr[i] * (gpr[i] - dot_p) + glr[i] - pr[i] * sum_l;
            }
          }
        },
        {z, p, lp});
  }
  return {p, lp};
}

Tensor softmax(Tape& tape, const Tensor& z) { return softmax_logsoftmax(tape, z).first; }

Tensor log_softmax(Tape& tape, const Tensor& z) { return softmax_logsoftmax(tape, z).second; }

Tensor kl_divergence(Tape& tape, const Tensor& p_log, const Tensor& q_log, bool detach_q) {
  if (p_log.last_dim() != q_log.last_dim() || p_log.shape() != q_log.shape()) {
    throw ShapeError("kl_divergence: shape mismatch " + p_log.shape_str() + " vs " +
                     q_log.shape_str());
  }
  double acc = 0.0;
  const std::size_t n = p_log.size();
  for (std::size_t i = 0; i < n; ++i) {
    acc += std::exp(p_log.value(i)) * (p_log.value(i) - q_log.value(i));
  }
  Tensor y = Tensor::scalar(acc);
  const bool q_grad = !detach_q && q_log.requires_grad();
  const bool rg = tape.enabled() && (p_log.requires_grad() || q_grad);
  y.set_requires_grad(rg);
  if (rg) {
    Tensor pc = p_log, qc = q_log, yc = y;
    tape.record(
        [pc, qc, yc, n, q_grad]() mutable {
          const double g = yc.grad()[0];
          if (g == 0.0) return;
          if (pc.requires_grad()) {
            std::vector<double>& gp = pc.grad();
            for (std::size_t i = 0; i < n; ++i) {
              gp[i] += g * std::exp(pc.value(i)) * (1.0 + pc.value(i) - qc.value(i));
            }
          }
          if (q_grad) {
            std::vector<double>& gq = qc.grad();
            for (std::size_t i = 0; i < n; ++i) gq[i] -= g * std::exp(pc.value(i));
          }
        },
        {p_log, q_log, y});
  }
  return y;
}

Tensor cross_entropy(Tape& tape, const Tensor& logits, const std::vector<int>& targets) {
  const std::size_t v = logits.last_dim();
  const std::size_t rows = logits.rows();
  if (targets.size() != rows) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(rows) + " rows");
  }
  for (int t : targets) {
    if (t < 0 || static_cast<std::size_t>(t) >= v) {
      throw IndexError("cross_entropy: target " + std::to_string(t) + " out of range [0, " +
                       std::to_string(v) + ")");
    }
  }
  std::vector<double> probs(logits.size());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* zr = logits.values().data() + r * v;
    double m = zr[0];
    for (std::size_t i = 1; i < v; ++i) m = std::max(m, zr[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < v; ++i) s += std::exp(zr[i] - m);
    const double lse = m + std::log(s);
    for (std::size_t i = 0; i < v; ++i) probs[r * v + i] = std::exp(zr[i] - m) / s;
    loss += lse - zr[targets[r]];
  }
  loss /= static_cast<double>(rows);
  Tensor y = Tensor::scalar(loss);
  const bool rg = out_requires_grad(tape, {&logits});
  y.set_requires_grad(rg);
  if (rg) {
    Tensor zc = logits, yc = y;
    std::vector<int> tg = targets;
    tape.record(
        [zc, yc, probs = std::move(probs), tg = std::move(tg), rows, v]() mutable {
          if (!zc.requires_grad()) return;
          const double g = yc.grad()[0] / static_cast<double>(rows);
          std::vector<double>& gz = zc.grad();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t i = 0; i < v; ++i) gz[r * v + i] += g * probs[r * v + i];
            gz[r * v + tg[r]] -= g;
          }
        },
        {logits, y});
  }
  return y;
}

Tensor logaddexp(Tape& tape, const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      tape, a, b, "logaddexp",
      [](double x, double y) {
        const double m = std::max(x, y);
        return m + std::log1p(std::exp(-std::abs(x - y)));
      },
      [](double x, double y) {
        const double da = 1.0 / (1.0 + std::exp(y - x));
        return std::pair<double, double>{da, 1.0 - da};
      });
}

Tensor sum(Tape& tape, const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  Tensor y = Tensor::scalar(acc);
  const bool rg = out_requires_grad(tape, {&x});
  y.set_requires_grad(rg);
  if (rg) {
    Tensor xc = x, yc = y;
    tape.record(
        [xc, yc]() mutable {
          if (!xc.requires_grad()) return;
          const double g = yc.grad()[0];
          std::vector<double>& gx = xc.grad();
          for (double& v : gx) v += g;
        },
        {x, y});
  }
  return y;
}

Tensor mean(Tape& tape, const Tensor& x) {
  return scale(tape, sum(tape, x), 1.0 / static_cast<double>(x.size()));
}

Tensor element(Tape& tape, const Tensor& x, std::size_t flat_index) {
  if (flat_index >= x.size()) {
    throw IndexError("element: index " + std::to_string(flat_index) + " out of range for " +
                     x.shape_str());
  }
  Tensor y = Tensor::scalar(x.value(flat_index));
  const bool rg = out_requires_grad(tape, {&x});
  y.set_requires_grad(rg);
  if (rg) {
    Tensor xc = x, yc = y;
    tape.record(
        [xc, yc, flat_index]() mutable {
          if (xc.requires_grad()) xc.grad()[flat_index] += yc.grad()[0];
        },
        {x, y});
  }
  return y;
}

Tensor take_row(Tape& tape, const Tensor& x, std::size_t row) {
  const std::size_t d = x.last_dim();
  if (row >= x.rows()) {
    throw IndexError("take_row: row " + std::to_string(row) + " out of range for " +
                     x.shape_str());
  }
  Tensor y = Tensor::zeros({d});
  for (std::size_t i = 0; i < d; ++i) y.value(i) = x.value(row * d + i);
  const bool rg = out_requires_grad(tape, {&x});
  y.set_requires_grad(rg);
  if (rg) {
    Tensor xc = x, yc = y;
    tape.record(
        [xc, yc, row, d]() mutable {
          if (!xc.requires_grad()) return;
          const std::vector<double>& gy = yc.grad();
          std::vector<double>& gx = xc.grad();
          for (std::size_t i = 0; i < d; ++i) gx[row * d + i] += gy[i];
        },
        {x, y});
  }
  return y;
}

Tensor slice_cols(Tape& tape, const Tensor& x, std::size_t start, std::size_t len) {
  const std::size_t d = x.last_dim();
  if (start + len > d) {
    throw IndexError("slice_cols: [" + std::to_string(start) + ", " +
                     std::to_string(start + len) + ") out of range for " + x.shape_str());
  }
  std::vector<std::size_t> out_shape = x.shape();
  out_shape.back() = len;
  Tensor y = Tensor::zeros(out_shape);
  const std::size_t rows = x.rows();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 0; i < len; ++i) y.value(r * len + i) = x.value(r * d + start + i);
  const bool rg = out_requires_grad(tape, {&x});
  y.set_requires_grad(rg);
  if (rg) {
    Tensor xc = x, yc = y;
    tape.record(
        [xc, yc, rows, d, start, len]() mutable {
          if (!xc.requires_grad()) return;
          const std::vector<double>& gy = yc.grad();
          std::vector<double>& gx = xc.grad();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t i = 0; i < len; ++i) gx[r * d + start + i] += gy[r * len + i];
        },
        {x, y});
  }
  return y;
}

Tensor concat_cols(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank()) {
    throw ShapeError("concat_cols: rank mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
  for (std::size_t i = 0; i + 1 < a.rank(); ++i) {
    if (a.dim(i) != b.dim(i)) {
      throw ShapeError("concat_cols: leading dims differ " + a.shape_str() + " vs " +
                       b.shape_str());
    }
  }
  const std::size_t da = a.last_dim(), db = b.last_dim();
  std::vector<std::size_t> out_shape = a.shape();
  out_shape.back() = da + db;
  Tensor y = Tensor::zeros(out_shape);
  const std::size_t rows = a.rows();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < da; ++i) y.value(r * (da + db) + i) = a.value(r * da + i);
    for (std::size_t i = 0; i < db; ++i) y.value(r * (da + db) + da + i) = b.value(r * db + i);
  }
  const bool rg = out_requires_grad(tape, {&a, &b});
  y.set_requires_grad(rg);
  if (rg) {
    Tensor ac = a, bc = b, yc = y;
    tape.record(
        [ac, bc, yc, rows, da, db]() mutable {
          const std::vector<double>& gy = yc.grad();
          if (ac.requires_grad()) {
            std::vector<double>& ga = ac.grad();
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t i = 0; i < da; ++i) ga[r * da + i] += gy[r * (da + db) + i];
          }
          if (bc.requires_grad()) {
            std::vector<double>& gb = bc.grad();
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t i = 0; i < db; ++i) gb[r * db + i] += gy[r * (da + db) + da + i];
          }
        },
        {a, b, y});
  }
  return y;
}

Tensor stack_rows(Tape& tape, const std::vector<Tensor>& rows_in) {
  if (rows_in.empty()) throw ShapeError("stack_rows: empty input");
  const std::size_t d = rows_in[0].size();
  for (const Tensor& r : rows_in) {
    if (r.rank() != 1 || r.size() != d) {
      throw ShapeError("stack_rows: row shape " + r.shape_str() + " does not match [" +
                       std::to_string(d) + "]");
    }
  }
  const std::size_t n = rows_in.size();
  Tensor y = Tensor::zeros({n, d});
  bool any_rg = false;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < d; ++i) y.value(r * d + i) = rows_in[r].value(i);
    any_rg = any_rg || rows_in[r].requires_grad();
  }
  const bool rg = tape.enabled() && any_rg;
  y.set_requires_grad(rg);
  if (rg) {
    std::vector<Tensor> rc = rows_in;
    Tensor yc = y;
    std::vector<Tensor> touched = rows_in;
    touched.push_back(y);
    tape.record(
        [rc, yc, n, d]() mutable {
          const std::vector<double>& gy = yc.grad();
          for (std::size_t r = 0; r < n; ++r) {
            if (!rc[r].requires_grad()) continue;
            std::vector<double>& gr = rc[r].grad();
            for (std::size_t i = 0; i < d; ++i) gr[i] += gy[r * d + i];
          }
        },
        touched);
  }
  return y;
}

Tensor embedding(Tape& tape, const Tensor& table, const std::vector<int>& ids) {
  if (table.rank() != 2) throw ShapeError("embedding: table must be rank 2");
  const std::size_t v = table.dim(0), d = table.dim(1);
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= v) {
      throw IndexError("embedding: id " + std::to_string(id) + " out of range [0, " +
                       std::to_string(v) + ")");
    }
  }
  const std::size_t n = ids.size();
  Tensor y = Tensor::zeros({n, d});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t i = 0; i < d; ++i)
      y.value(r * d + i) = table.value(static_cast<std::size_t>(ids[r]) * d + i);
  const bool rg = out_requires_grad(tape, {&table});
  y.set_requires_grad(rg);
  if (rg) {
    Tensor tc = table, yc = y;
    std::vector<int> idc = ids;
    tape.record(
        [tc, yc, idc = std::move(idc), n, d]() mutable {
          if (!tc.requires_grad()) return;
          const std::vector<double>& gy = yc.grad();
          std::vector<double>& gt = tc.grad();
          for (std::size_t r = 0; r < n; ++r) {
            double* row = gt.data() + static_cast<std::size_t>(idc[r]) * d;
            for (std::size_t i = 0; i < d; ++i) row[i] += gy[r * d + i];
          }
        },
        {table, y});
  }
  return y;
}

Tensor pairwise_add(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw ShapeError("pairwise_add: incompatible shapes " + a.shape_str() + " and " +
                     b.shape_str());
  }
  const std::size_t t = a.dim(0), u = b.dim(0), d = a.dim(1);
  Tensor y = Tensor::zeros({t, u, d});
  for (std::size_t i = 0; i < t; ++i) {
    const double* ar = a.values().data() + i * d;
    for (std::size_t j = 0; j < u; ++j) {
      const double* br = b.values().data() + j * d;
      double* yr = y.values().data() + (i * u + j) * d;
      for (std::size_t p = 0; p < d; ++p) yr[p] = ar[p] + br[p];
    }
  }
  const bool rg = out_requires_grad(tape, {&a, &b});
  y.set_requires_grad(rg);
  if (rg) {
    Tensor ac = a, bc = b, yc = y;
    tape.record(
        [ac, bc, yc, t, u, d]() mutable {
          const std::vector<double>& gy = yc.grad();
          if (ac.requires_grad()) {
            std::vector<double>& ga = ac.grad();
            for (std::size_t i = 0; i < t; ++i)
              for (std::size_t j = 0; j < u; ++j)
                for (std::size_t p = 0; p < d; ++p) ga[i * d + p] += gy[(i * u + j) * d + p];
          }
          if (bc.requires_grad()) {
            std::vector<double>& gb = bc.grad();
            for (std::size_t i = 0; i < t; ++i)
              for (std::size_t j = 0; j < u; ++j)
                for (std::size_t p = 0; p < d; ++p) gb[j * d + p] += gy[(i * u + j) * d + p];
          }
        },
        {a, b, y});
  }
  return y;
}

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps) {
  const std::size_t d = x.last_dim();
  if (gain.size() != d || bias.size() != d) {
    throw ShapeError("layer_norm: gain " + gain.shape_str() + " / bias " + bias.shape_str() +
                     " do not match input " + x.shape_str());
  }
  const std::size_t rows = x.rows();
  Tensor y = Tensor::zeros(x.shape());
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.values().data() + r * d;
    double mu = 0.0;
    for (std::size_t i = 0; i < d; ++i) mu += xr[i];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (xr[i] - mu) * (xr[i] - mu);
    var /= static_cast<double>(d);
    const double w = 1.0 / std::sqrt(var + eps);
    inv_std[r] = w;
    double* yr = y.values().data() + r * d;
    for (std::size_t i = 0; i < d; ++i) {
      xhat[r * d + i] = (xr[i] - mu) * w;
      yr[i] = gain.value(i) * xhat[r * d + i] + bias.value(i);
    }
  }
  const bool rg = out_requires_grad(tape, {&x, &gain, &bias});
  y.set_requires_grad(rg);
  if (rg) {
    Tensor xc = x, gc = gain, bc = bias, yc = y;
    tape.record(
        [xc, gc, bc, yc, xhat = std::move(xhat), inv_std = std::move(inv_std), rows,
         d]() mutable {
          const std::vector<double>& gy = yc.grad();
          for (std::size_t r = 0; r < rows; ++r) {
            const double* gyr = gy.data() + r * d;
            const double* xh = xhat.data() + r * d;
            if (gc.requires_grad() || bc.requires_grad()) {
              for (std::size_t i = 0; i < d; ++i) {
                if (gc.requires_grad()) gc.grad()[i] += gyr[i] * xh[i];
                if (bc.requires_grad()) bc.grad()[i] += gyr[i];
              }
            }
            if (xc.requires_grad()) {
              double sum_g = 0.0, sum_gx = 0.0;
              for (std::size_t i = 0; i < d; ++i) {
                const double gh = gyr[i] * gc.value(i);
                sum_g += gh;
                sum_gx += gh * xh[i];
              }
              const double inv_d = 1.0 / static_cast<double>(d);
              std::vector<double>& gx = xc.grad();
              for (std::size_t i = 0; i < d; ++i) {
                const double gh = gyr[i] * gc.value(i);
                gx[r * d + i] += inv_std[r] * (gh - inv_d * sum_g - xh[i] * inv_d * sum_gx);
              }
            }
          }
        },
        {x, gain, bias, y});
  }
  return y;
}

Tensor sinusoidal_encoding(std::size_t positions, std::size_t dim) {
  Tensor pe = Tensor::zeros({positions, dim});
  for (std::size_t t = 0; t < positions; ++t) {
    for (std::size_t i = 0; i < dim; i += 2) {
      const double angle =
          static_cast<double>(t) /
          std::pow(10000.0, static_cast<double>(i) / static_cast<double>(dim));
      pe.value(t * dim + i) = std::sin(angle);
      if (i + 1 < dim) pe.value(t * dim + i + 1) = std::cos(angle);
    }
  }
  return pe;
}

std::size_t argmax_row(const Tensor& x, std::size_t row) {
  const std::size_t d = x.last_dim();
  const double* r = x.values().data() + row * d;
  std::size_t best = 0;
  for (std::size_t i = 1; i < d; ++i) {
    if (r[i] > r[best]) best = i;
  }
  return best;
}

}  // namespace sdsr::ops
