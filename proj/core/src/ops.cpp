// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#include "eraloc/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "eraloc/errors.hpp"

namespace eraloc::ad {

namespace {

Tape& tape_of(Var a) {
  if (!a.valid()) throw StateError("operation on an unbound Var");
  return *a.tape;
}

void require_same_shape(Var a, Var b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

// C[r x c] += A[r x k] * B[k x c]
void gemm_nn(const double* a, const double* b, double* c, std::size_t r, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < r; ++i) {
    double* ci = c + i * n;
    const double* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

// C[r x k] += A[r x n] * B[k x n]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t r, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < r; ++i) {
    const double* ai = a + i * n;
    double* ci = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b + p * n;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += ai[j] * bp[j];
      ci[p] += s;
    }
  }
}

// C[k x n] += A[r x k]^T * B[r x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t r, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < r; ++i) {
    const double* ai = a + i * k;
    const double* bi = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ai[p];
      if (av == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
    }
  }
}

template <typename F>
Var unary(Var x, const char* name, F&& f_and_df) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  Tensor deriv(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) f_and_df(xv[i], out[i], deriv[i]);
  const std::size_t xi = x.id;
  return t.push(std::move(out), {x},
                [xi, deriv = std::move(deriv)](Tape& tp, std::size_t self) {
                  if (!tp.needs_grad(xi)) return;
                  const Tensor& g = tp.grad(self);
                  Tensor& gx = tp.grad(xi);
                  for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv[i];
                },
                name);
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t r = av.rows(), k = av.cols();
  if (bv.rank() != 2 || bv.shape()[0] != k) {
    throw ShapeError("matmul: " + shape_string(av.shape()) + " x " + shape_string(bv.shape()));
  }
  const std::size_t n = bv.cols();
  Shape shape = av.shape();
  shape.back() = n;
  Tensor out(shape);
  gemm_nn(av.data(), bv.data(), out.data(), r, k, n);
  const std::size_t ai = a.id, bi = b.id;
  return t.push(std::move(out), {a, b},
                [ai, bi, r, k, n](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  if (tp.needs_grad(ai)) gemm_nt(g.data(), tp.value(bi).data(), tp.grad(ai).data(), r, n, k);
                  if (tp.needs_grad(bi)) gemm_tn(tp.value(ai).data(), g.data(), tp.grad(bi).data(), r, k, n);
                },
                "matmul");
}

Var linear(Var x, Var weight, Var bias) {
  const Tensor& bv = bias.value();
  if (bv.size() != weight.value().cols()) throw ShapeError("linear: bias length differs from output width");
  return add_row_broadcast(matmul(x, weight), bias);
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tape& t = tape_of(a);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  const std::size_t ai = a.id, bi = b.id;
  return t.push(std::move(out), {a, b},
                [ai, bi](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  for (std::size_t id : {ai, bi}) {
                    if (!tp.needs_grad(id)) continue;
                    Tensor& gi = tp.grad(id);
                    for (std::size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
                  }
                },
                "add");
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tape& t = tape_of(a);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const std::size_t ai = a.id, bi = b.id;
  return t.push(std::move(out), {a, b},
                [ai, bi](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  if (tp.needs_grad(ai)) {
                    Tensor& ga = tp.grad(ai);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                  }
                  if (tp.needs_grad(bi)) {
                    Tensor& gb = tp.grad(bi);
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                  }
                },
                "sub");
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tape& t = tape_of(a);
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const std::size_t ai = a.id, bi = b.id;
  return t.push(std::move(out), {a, b},
                [ai, bi](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  if (tp.needs_grad(ai)) {
                    const Tensor& bv = tp.value(bi);
                    Tensor& ga = tp.grad(ai);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                  }
                  if (tp.needs_grad(bi)) {
                    const Tensor& av = tp.value(ai);
                    Tensor& gb = tp.grad(bi);
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                  }
                },
                "mul");
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  const std::size_t ai = a.id;
  return t.push(std::move(out), {a},
                [ai, s](Tape& tp, std::size_t self) {
                  if (!tp.needs_grad(ai)) return;
                  const Tensor& g = tp.grad(self);
                  Tensor& ga = tp.grad(ai);
                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
                },
                "scale");
}

Var add_row_broadcast(Var x, Var v) {
  Tape& t = tape_of(x);
  const Tensor& vv = v.value();
  Tensor out = x.value();
  const std::size_t r = out.rows(), c = out.cols();
  if (vv.size() != c) throw ShapeError("add_row_broadcast: vector length differs from column count");
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += vv[j];
  const std::size_t xi = x.id, vi = v.id;
  return t.push(std::move(out), {x, v},
                [xi, vi, r, c](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  if (tp.needs_grad(xi)) {
                    Tensor& gx = tp.grad(xi);
                    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                  }
                  if (tp.needs_grad(vi)) {
                    Tensor& gv = tp.grad(vi);
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < c; ++j) gv[j] += g[i * c + j];
                  }
                },
                "add_row_broadcast");
}

Var add_periodic_rows(Var x, Var table) {
  Tape& t = tape_of(x);
  const Tensor& tv = table.value();
  Tensor out = x.value();
  const std::size_t r = out.rows(), c = out.cols();
  const std::size_t period = tv.rows();
  if (tv.cols() != c || period == 0 || r % period != 0) {
    throw ShapeError("add_periodic_rows: table " + shape_string(tv.shape()) + " incompatible with " +
                     shape_string(out.shape()));
  }
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += tv[(i % period) * c + j];
  const std::size_t xi = x.id, ti = table.id;
  return t.push(std::move(out), {x, table},
                [xi, ti, r, c, period](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  if (tp.needs_grad(xi)) {
                    Tensor& gx = tp.grad(xi);
                    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                  }
                  if (tp.needs_grad(ti)) {
                    Tensor& gt = tp.grad(ti);
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < c; ++j) gt[(i % period) * c + j] += g[i * c + j];
                  }
                },
                "add_periodic_rows");
}

Var broadcast_rows(Var v, std::size_t rows) {
  Tape& t = tape_of(v);
  const Tensor& vv = v.value();
  const std::size_t c = vv.size();
  Tensor out({rows, c});
  for (std::size_t i = 0; i < rows; ++i) std::copy(vv.data(), vv.data() + c, out.data() + i * c);
  const std::size_t vi = v.id;
  return t.push(std::move(out), {v},
                [vi, rows, c](Tape& tp, std::size_t self) {
                  if (!tp.needs_grad(vi)) return;
                  const Tensor& g = tp.grad(self);
                  Tensor& gv = tp.grad(vi);
                  for (std::size_t i = 0; i < rows; ++i)
                    for (std::size_t j = 0; j < c; ++j) gv[j] += g[i * c + j];
                },
                "broadcast_rows");
}

Var tanh(Var x) {
  return unary(x, "tanh", [](double v, double& y, double& d) {
    y = std::tanh(v);
    d = 1.0 - y * y;
  });
}

Var sigmoid(Var x) {
  return unary(x, "sigmoid", [](double v, double& y, double& d) {
    y = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    d = y * (1.0 - y);
  });
}

Var gelu(Var x) {
  return unary(x, "gelu", [](double v, double& y, double& d) {
    constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double c = 0.044715;
    const double inner = k * (v + c * v * v * v);
    const double th = std::tanh(inner);
    y = 0.5 * v * (1.0 + th);
    d = 0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * k * (1.0 + 3.0 * c * v * v);
  });
}

Var softmax(Var x) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < r; ++i) {
    const double* xi = xv.data() + i * c;
    double* yi = out.data() + i * c;
    const double mx = *std::max_element(xi, xi + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += (yi[j] = std::exp(xi[j] - mx));
    for (std::size_t j = 0; j < c; ++j) yi[j] /= s;
  }
  const std::size_t xid = x.id;
  return t.push(std::move(out), {x},
                [xid, r, c](Tape& tp, std::size_t self) {
                  if (!tp.needs_grad(xid)) return;
                  const Tensor& g = tp.grad(self);
                  const Tensor& y = tp.value(self);
                  Tensor& gx = tp.grad(xid);
                  for (std::size_t i = 0; i < r; ++i) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < c; ++j) dot += g[i * c + j] * y[i * c + j];
                    for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += y[i * c + j] * (g[i * c + j] - dot);
                  }
                },
                "softmax");
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  if (gain.value().size() != c || bias.value().size() != c) throw ShapeError("layer_norm: parameter width mismatch");
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  Tensor out(xv.shape());
  Tensor xhat(xv.shape());
  std::vector<double> inv_std(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double* xi = xv.data() + i * c;
    double mean = 0.0;
    for (std::size_t j = 0; j < c; ++j) mean += xi[j];
    mean /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= static_cast<double>(c);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      const double h = (xi[j] - mean) * inv_std[i];
      xhat[i * c + j] = h;
      out[i * c + j] = h * gv[j] + bv[j];
    }
  }
  const std::size_t xid = x.id, gid = gain.id, bid = bias.id;
  return t.push(std::move(out), {x, gain, bias},
                [xid, gid, bid, r, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& tp,
                                                                                            std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  if (tp.needs_grad(gid) || tp.needs_grad(bid)) {
                    Tensor* gg = tp.needs_grad(gid) ? &tp.grad(gid) : nullptr;
                    Tensor* gb = tp.needs_grad(bid) ? &tp.grad(bid) : nullptr;
                    for (std::size_t i = 0; i < r; ++i)
                      for (std::size_t j = 0; j < c; ++j) {
                        if (gg) (*gg)[j] += g[i * c + j] * xhat[i * c + j];
                        if (gb) (*gb)[j] += g[i * c + j];
                      }
                  }
                  if (tp.needs_grad(xid)) {
                    const Tensor& gv = tp.value(gid);
                    Tensor& gx = tp.grad(xid);
                    const double inv_c = 1.0 / static_cast<double>(c);
                    for (std::size_t i = 0; i < r; ++i) {
                      double s1 = 0.0, s2 = 0.0;
                      for (std::size_t j = 0; j < c; ++j) {
                        const double dh = g[i * c + j] * gv[j];
                        s1 += dh;
                        s2 += dh * xhat[i * c + j];
                      }
                      for (std::size_t j = 0; j < c; ++j) {
                        const double dh = g[i * c + j] * gv[j];
                        gx[i * c + j] += inv_std[i] * (dh - inv_c * s1 - xhat[i * c + j] * inv_c * s2);
                      }
                    }
                  }
                },
                "layer_norm");
}

Var slice_cols(Var x, std::size_t start, std::size_t count) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  if (start + count > c) throw ShapeError("slice_cols: range exceeds column count");
  Shape shape = xv.shape();
  shape.back() = count;
  Tensor out(shape);
  for (std::size_t i = 0; i < r; ++i) std::copy_n(xv.data() + i * c + start, count, out.data() + i * count);
  const std::size_t xid = x.id;
  return t.push(std::move(out), {x},
                [xid, r, c, start, count](Tape& tp, std::size_t self) {
                  if (!tp.needs_grad(xid)) return;
                  const Tensor& g = tp.grad(self);
                  Tensor& gx = tp.grad(xid);
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < count; ++j) gx[i * c + start + j] += g[i * count + j];
                },
                "slice_cols");
}

Var reshape(Var x, Shape shape) {
  Tape& t = tape_of(x);
  Tensor out = x.value().reshaped(std::move(shape));
  const std::size_t xid = x.id;
  return t.push(std::move(out), {x},
                [xid](Tape& tp, std::size_t self) {
                  if (!tp.needs_grad(xid)) return;
                  const Tensor& g = tp.grad(self);
                  Tensor& gx = tp.grad(xid);
                  for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                },
                "reshape");
}

Var attention(Var q, Var k, Var v, std::size_t seq_len, std::size_t heads) {
  require_same_shape(q, k, "attention");
  require_same_shape(q, v, "attention");
  Tape& t = tape_of(q);
  const Tensor& qv = q.value();
  const std::size_t rows = qv.rows(), dm = qv.cols();
  if (heads == 0 || dm % heads != 0) {
    throw ConfigError("attention: model width " + std::to_string(dm) + " not divisible by " + std::to_string(heads) +
                      " heads");
  }
  if (seq_len == 0 || rows % seq_len != 0) throw ShapeError("attention: rows not a multiple of sequence length");
  const std::size_t batch = rows / seq_len, dh = dm / heads, L = seq_len;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();

  // probs[b][h][i][j]
  std::vector<double> probs(batch * heads * L * L);
  Tensor out(qv.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      double* p = probs.data() + ((b * heads + h) * L) * L;
      for (std::size_t i = 0; i < L; ++i) {
        const double* qi = qv.data() + (b * L + i) * dm + h * dh;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < L; ++j) {
          const double* kj = kv.data() + (b * L + j) * dm + h * dh;
          double s = 0.0;
          for (std::size_t e = 0; e < dh; ++e) s += qi[e] * kj[e];
          p[i * L + j] = s * inv_sqrt;
          mx = std::max(mx, p[i * L + j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < L; ++j) z += (p[i * L + j] = std::exp(p[i * L + j] - mx));
        for (std::size_t j = 0; j < L; ++j) p[i * L + j] /= z;
        double* oi = out.data() + (b * L + i) * dm + h * dh;
        for (std::size_t j = 0; j < L; ++j) {
          const double* vj = vv.data() + (b * L + j) * dm + h * dh;
          const double a = p[i * L + j];
          for (std::size_t e = 0; e < dh; ++e) oi[e] += a * vj[e];
        }
      }
    }
  }
  const std::size_t qi = q.id, ki = k.id, vi = v.id;
  return t.push(
      std::move(out), {q, k, v},
      [qi, ki, vi, batch, heads, L, dh, dm, inv_sqrt, probs = std::move(probs)](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        const Tensor& qv = tp.value(qi);
        const Tensor& kv = tp.value(ki);
        const Tensor& vv = tp.value(vi);
        const bool need_q = tp.needs_grad(qi), need_k = tp.needs_grad(ki), need_v = tp.needs_grad(vi);
        Tensor* gq = need_q ? &tp.grad(qi) : nullptr;
        Tensor* gk = need_k ? &tp.grad(ki) : nullptr;
        Tensor* gv = need_v ? &tp.grad(vi) : nullptr;
        std::vector<double> dp(L * L);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t h = 0; h < heads; ++h) {
            const double* p = probs.data() + ((b * heads + h) * L) * L;
            // dP = dO V^T ; dV = P^T dO
            for (std::size_t i = 0; i < L; ++i) {
              const double* gi = g.data() + (b * L + i) * dm + h * dh;
              for (std::size_t j = 0; j < L; ++j) {
                const double* vj = vv.data() + (b * L + j) * dm + h * dh;
                double s = 0.0;
                for (std::size_t e = 0; e < dh; ++e) s += gi[e] * vj[e];
                dp[i * L + j] = s;
                if (gv) {
                  double* gvj = gv->data() + (b * L + j) * dm + h * dh;
                  const double a = p[i * L + j];
                  for (std::size_t e = 0; e < dh; ++e) gvj[e] += a * gi[e];
                }
              }
            }
            if (!gq && !gk) continue;
            // dS = P o (dP - rowsum(dP o P)), scaled
            for (std::size_t i = 0; i < L; ++i) {
              double dot = 0.0;
              for (std::size_t j = 0; j < L; ++j) dot += dp[i * L + j] * p[i * L + j];
              for (std::size_t j = 0; j < L; ++j) dp[i * L + j] = p[i * L + j] * (dp[i * L + j] - dot) * inv_sqrt;
            }
            for (std::size_t i = 0; i < L; ++i) {
              const double* qi_row = qv.data() + (b * L + i) * dm + h * dh;
              for (std::size_t j = 0; j < L; ++j) {
                const double ds = dp[i * L + j];
                if (ds == 0.0) continue;
                const double* kj = kv.data() + (b * L + j) * dm + h * dh;
                if (gq) {
                  double* gqi = gq->data() + (b * L + i) * dm + h * dh;
                  for (std::size_t e = 0; e < dh; ++e) gqi[e] += ds * kj[e];
                }
                if (gk) {
                  double* gkj = gk->data() + (b * L + j) * dm + h * dh;
                  for (std::size_t e = 0; e < dh; ++e) gkj[e] += ds * qi_row[e];
                }
              }
            }
          }
        }
      },
      "attention");
}

Var attention_pool(Var x, Var query, std::size_t seq_len) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  const Tensor& qv = query.value();
  const std::size_t rows = xv.rows(), d = xv.cols(), L = seq_len;
  if (qv.size() != d) throw ShapeError("attention_pool: query width differs from model width");
  if (L == 0 || rows % L != 0) throw ShapeError("attention_pool: rows not a multiple of sequence length");
  const std::size_t batch = rows / L;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> probs(batch * L);
  Tensor out({batch, d});
  for (std::size_t b = 0; b < batch; ++b) {
    double* p = probs.data() + b * L;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < L; ++l) {
      const double* xl = xv.data() + (b * L + l) * d;
      double s = 0.0;
      for (std::size_t e = 0; e < d; ++e) s += xl[e] * qv[e];
      p[l] = s * inv_sqrt;
      mx = std::max(mx, p[l]);
    }
    double z = 0.0;
    for (std::size_t l = 0; l < L; ++l) z += (p[l] = std::exp(p[l] - mx));
    for (std::size_t l = 0; l < L; ++l) {
      p[l] /= z;
      const double* xl = xv.data() + (b * L + l) * d;
      for (std::size_t e = 0; e < d; ++e) out[b * d + e] += p[l] * xl[e];
    }
  }
  const std::size_t xi = x.id, qi = query.id;
  return t.push(std::move(out), {x, query},
                [xi, qi, batch, L, d, inv_sqrt, probs = std::move(probs)](Tape& tp, std::size_t self) {
                  const Tensor& g = tp.grad(self);
                  const Tensor& xv = tp.value(xi);
                  const Tensor& qv = tp.value(qi);
                  Tensor* gx = tp.needs_grad(xi) ? &tp.grad(xi) : nullptr;
                  Tensor* gq = tp.needs_grad(qi) ? &tp.grad(qi) : nullptr;
                  std::vector<double> da(L);
                  for (std::size_t b = 0; b < batch; ++b) {
                    const double* p = probs.data() + b * L;
                    const double* gb = g.data() + b * d;
                    double dot = 0.0;
                    for (std::size_t l = 0; l < L; ++l) {
                      const double* xl = xv.data() + (b * L + l) * d;
                      double s = 0.0;
                      for (std::size_t e = 0; e < d; ++e) s += xl[e] * gb[e];
                      da[l] = s;
                      dot += s * p[l];
                    }
                    for (std::size_t l = 0; l < L; ++l) {
                      const double ds = p[l] * (da[l] - dot) * inv_sqrt;
                      const double* xl = xv.data() + (b * L + l) * d;
                      if (gx) {
                        double* gxl = gx->data() + (b * L + l) * d;
                        for (std::size_t e = 0; e < d; ++e) gxl[e] += p[l] * gb[e] + ds * qv[e];
                      }
                      if (gq) {
                        for (std::size_t e = 0; e < d; ++e) (*gq)[e] += ds * xl[e];
                      }
                    }
                  }
                },
                "attention_pool");
}

Var normalize_groups(Var x, std::size_t group, double target, double eps) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  if (group == 0 || xv.size() % group != 0) throw ShapeError("normalize_groups: size not a multiple of group");
  const std::size_t groups = xv.size() / group;
  std::vector<double> inv_norm(groups);
  Tensor out(xv.shape());
  for (std::size_t gidx = 0; gidx < groups; ++gidx) {
    const double* xg = xv.data() + gidx * group;
    double sq = 0.0;
    for (std::size_t e = 0; e < group; ++e) sq += xg[e] * xg[e];
    const double norm = std::sqrt(sq);
    if (!(norm > eps)) {
      throw DegenerateInputError("normalize_groups: group " + std::to_string(gidx) + " has norm " +
                                 std::to_string(norm));
    }
    inv_norm[gidx] = 1.0 / norm;
    for (std::size_t e = 0; e < group; ++e) out[gidx * group + e] = target * xg[e] * inv_norm[gidx];
  }
  const std::size_t xid = x.id;
  return t.push(std::move(out), {x},
                [xid, group, groups, target, inv_norm = std::move(inv_norm)](Tape& tp, std::size_t self) {
                  if (!tp.needs_grad(xid)) return;
                  const Tensor& g = tp.grad(self);
                  const Tensor& y = tp.value(self);
                  Tensor& gx = tp.grad(xid);
                  // y = target * x / |x| ; dx = (target / |x|) (g - u (u . g)), u = y / target
                  for (std::size_t gidx = 0; gidx < groups; ++gidx) {
                    const double* yg = y.data() + gidx * group;
                    const double* gg = g.data() + gidx * group;
                    double dot = 0.0;
                    for (std::size_t e = 0; e < group; ++e) dot += yg[e] * gg[e];
                    dot /= target * target;
                    const double s = target * inv_norm[gidx];
                    for (std::size_t e = 0; e < group; ++e) gx[gidx * group + e] += s * (gg[e] - yg[e] * dot);
                  }
                },
                "normalize_groups");
}

Var sum(Var x) {
  Tape& t = tape_of(x);
  double s = 0.0;
  for (double v : x.value().values()) s += v;
  const std::size_t xid = x.id;
  return t.push(Tensor::scalar(s), {x},
                [xid](Tape& tp, std::size_t self) {
                  if (!tp.needs_grad(xid)) return;
                  const double g = tp.grad(self)[0];
                  Tensor& gx = tp.grad(xid);
                  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
                },
                "sum");
}

Var sum_squares(Var x) {
  Tape& t = tape_of(x);
  const std::size_t xid = x.id;
  return t.push(Tensor::scalar(x.value().squared_norm()), {x},
                [xid](Tape& tp, std::size_t self) {
                  if (!tp.needs_grad(xid)) return;
                  const double g = tp.grad(self)[0];
                  const Tensor& xv = tp.value(xid);
                  Tensor& gx = tp.grad(xid);
                  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += 2.0 * g * xv[i];
                },
                "sum_squares");
}

Var row_sum_squares(Var x) {
  Tape& t = tape_of(x);
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor out({r, 1});
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += xv[i * c + j] * xv[i * c + j];
    out[i] = s;
  }
  const std::size_t xid = x.id;
  return t.push(std::move(out), {x},
                [xid, r, c](Tape& tp, std::size_t self) {
                  if (!tp.needs_grad(xid)) return;
                  const Tensor& g = tp.grad(self);
                  const Tensor& xv = tp.value(xid);
                  Tensor& gx = tp.grad(xid);
                  for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += 2.0 * g[i] * xv[i * c + j];
                },
                "row_sum_squares");
}

}  // namespace eraloc::ad
