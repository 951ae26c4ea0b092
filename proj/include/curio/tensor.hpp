#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "curio/rng.hpp"

// Dense double tensors plus a tape for reverse-mode differentiation.
// Shapes in this codebase are tiny (32-d features, 10x10 images), so all
// kernels are straightforward loops; determinism matters more than speed.

namespace curio {

struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)) {
    v.assign(static_cast<size_t>(count(shape)), 0.0);
  }
  Tensor(std::vector<int> s, std::vector<double> data)
      : shape(std::move(s)), v(std::move(data)) {
    if (static_cast<long long>(v.size()) != count(shape))
      throw std::invalid_argument("tensor data does not match shape");
  }

  static long long count(const std::vector<int>& s) {
    long long n = 1;
    for (int d : s) n *= d;
    return n;
  }

  static Tensor scalar(double x) { return Tensor({1}, {x}); }

  int size() const { return static_cast<int>(v.size()); }
  double& operator[](int i) { return v[static_cast<size_t>(i)]; }
  double operator[](int i) const { return v[static_cast<size_t>(i)]; }

  bool finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

inline bool same_shape(const Tensor& a, const Tensor& b) {
  return a.shape == b.shape;
}

// Reverse-mode tape. Values are referenced by index; backward() runs the
// recorded closures in reverse order.
class Tape {
 public:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    std::function<void(Tape&)> backward;
  };

  int size() const { return static_cast<int>(nodes_.size()); }
  void clear() { nodes_.clear(); }

  const Tensor& value(int i) const { return nodes_[static_cast<size_t>(i)].value; }
  Tensor& grad(int i) { return nodes_[static_cast<size_t>(i)].grad; }
  bool needs_grad(int i) const { return nodes_[static_cast<size_t>(i)].needs_grad; }

  int leaf(Tensor t, bool needs_grad_flag) {
    Node n;
    n.value = std::move(t);
    n.needs_grad = needs_grad_flag;
    return push(std::move(n));
  }

  int constant(double x) { return leaf(Tensor::scalar(x), false); }

  // ---- elementwise ----

  int add(int a, int b) {
    check_same(a, b, "add");
    Tensor out = value(a);
    const Tensor& vb = value(b);
    for (int i = 0; i < out.size(); ++i) out[i] += vb[i];
    return unary_or_binary(std::move(out), a, b, [](Tape& t, int a_, int b_, int o) {
      accumulate(t, a_, t.grad(o));
      accumulate(t, b_, t.grad(o));
    });
  }

  int sub(int a, int b) {
    check_same(a, b, "sub");
    Tensor out = value(a);
    const Tensor& vb = value(b);
    for (int i = 0; i < out.size(); ++i) out[i] -= vb[i];
    return unary_or_binary(std::move(out), a, b, [](Tape& t, int a_, int b_, int o) {
      accumulate(t, a_, t.grad(o));
      Tensor g = t.grad(o);
      for (auto& x : g.v) x = -x;
      accumulate(t, b_, g);
    });
  }

  int mul(int a, int b) {
    check_same(a, b, "mul");
    Tensor out = value(a);
    const Tensor& vb = value(b);
    for (int i = 0; i < out.size(); ++i) out[i] *= vb[i];
    return unary_or_binary(std::move(out), a, b, [](Tape& t, int a_, int b_, int o) {
      Tensor ga = t.grad(o);
      for (int i = 0; i < ga.size(); ++i) ga[i] *= t.value(b_)[i];
      accumulate(t, a_, ga);
      Tensor gb = t.grad(o);
      for (int i = 0; i < gb.size(); ++i) gb[i] *= t.value(a_)[i];
      accumulate(t, b_, gb);
    });
  }

  int div(int a, int b) {
    check_same(a, b, "div");
    Tensor out = value(a);
    const Tensor& vb = value(b);
    for (int i = 0; i < out.size(); ++i) out[i] /= vb[i];
    return unary_or_binary(std::move(out), a, b, [](Tape& t, int a_, int b_, int o) {
      Tensor ga = t.grad(o);
      for (int i = 0; i < ga.size(); ++i) ga[i] /= t.value(b_)[i];
      accumulate(t, a_, ga);
      Tensor gb = t.grad(o);
      for (int i = 0; i < gb.size(); ++i) {
        const double bv = t.value(b_)[i];
        gb[i] *= -t.value(a_)[i] / (bv * bv);
      }
      accumulate(t, b_, gb);
    });
  }

  int scale(int a, double c) {
    Tensor out = value(a);
    for (auto& x : out.v) x *= c;
    return unary(std::move(out), a, [c](Tape& t, int a_, int o) {
      Tensor g = t.grad(o);
      for (auto& x : g.v) x *= c;
      accumulate(t, a_, g);
    });
  }

  int add_scalar(int a, double c) {
    Tensor out = value(a);
    for (auto& x : out.v) x += c;
    return unary(std::move(out), a, [](Tape& t, int a_, int o) {
      accumulate(t, a_, t.grad(o));
    });
  }

  int relu(int a) {
    Tensor out = value(a);
    for (auto& x : out.v) x = x > 0.0 ? x : 0.0;
    return unary(std::move(out), a, [](Tape& t, int a_, int o) {
      Tensor g = t.grad(o);
      for (int i = 0; i < g.size(); ++i)
        if (t.value(a_)[i] <= 0.0) g[i] = 0.0;
      accumulate(t, a_, g);
    });
  }

  int abs_op(int a) {
    Tensor out = value(a);
    for (auto& x : out.v) x = std::fabs(x);
    return unary(std::move(out), a, [](Tape& t, int a_, int o) {
      Tensor g = t.grad(o);
      for (int i = 0; i < g.size(); ++i)
        g[i] *= t.value(a_)[i] < 0.0 ? -1.0 : 1.0;
      accumulate(t, a_, g);
    });
  }

  // sqrt(|x|), subgradient guarded near zero
  int sqrt_abs(int a) {
    Tensor out = value(a);
    for (auto& x : out.v) x = std::sqrt(std::fabs(x));
    return unary(std::move(out), a, [](Tape& t, int a_, int o) {
      Tensor g = t.grad(o);
      for (int i = 0; i < g.size(); ++i) {
        const double x = t.value(a_)[i];
        const double denom = 2.0 * std::max(std::sqrt(std::fabs(x)), 1e-12);
        g[i] *= (x < 0.0 ? -1.0 : 1.0) / denom;
      }
      accumulate(t, a_, g);
    });
  }

  int maximum(int a, int b) {
    check_same(a, b, "max");
    Tensor out = value(a);
    const Tensor& vb = value(b);
    for (int i = 0; i < out.size(); ++i) out[i] = std::max(out[i], vb[i]);
    return unary_or_binary(std::move(out), a, b, [](Tape& t, int a_, int b_, int o) {
      Tensor ga = t.grad(o), gb = t.grad(o);
      for (int i = 0; i < ga.size(); ++i) {
        if (t.value(a_)[i] >= t.value(b_)[i]) gb[i] = 0.0;
        else ga[i] = 0.0;
      }
      accumulate(t, a_, ga);
      accumulate(t, b_, gb);
    });
  }

  int minimum(int a, int b) {
    check_same(a, b, "min");
    Tensor out = value(a);
    const Tensor& vb = value(b);
    for (int i = 0; i < out.size(); ++i) out[i] = std::min(out[i], vb[i]);
    return unary_or_binary(std::move(out), a, b, [](Tape& t, int a_, int b_, int o) {
      Tensor ga = t.grad(o), gb = t.grad(o);
      for (int i = 0; i < ga.size(); ++i) {
        if (t.value(a_)[i] <= t.value(b_)[i]) gb[i] = 0.0;
        else ga[i] = 0.0;
      }
      accumulate(t, a_, ga);
      accumulate(t, b_, gb);
    });
  }

  // value passes through, gradient does not
  int detach(int a) {
    Node n;
    n.value = value(a);
    return push(std::move(n));
  }

  // ---- reductions ----

  int sum(int a) {
    double s = 0.0;
    for (double x : value(a).v) s += x;
    return unary(Tensor::scalar(s), a, [](Tape& t, int a_, int o) {
      Tensor g(t.value(a_).shape);
      for (auto& x : g.v) x = t.grad(o)[0];
      accumulate(t, a_, g);
    });
  }

  int mean(int a) {
    const int n = value(a).size();
    double s = 0.0;
    for (double x : value(a).v) s += x;
    return unary(Tensor::scalar(s / n), a, [n](Tape& t, int a_, int o) {
      Tensor g(t.value(a_).shape);
      for (auto& x : g.v) x = t.grad(o)[0] / n;
      accumulate(t, a_, g);
    });
  }

  int dot(int a, int b) {
    check_same(a, b, "dot");
    double s = 0.0;
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    for (int i = 0; i < va.size(); ++i) s += va[i] * vb[i];
    return unary_or_binary(Tensor::scalar(s), a, b, [](Tape& t, int a_, int b_, int o) {
      const double go = t.grad(o)[0];
      Tensor ga = t.value(b_), gb = t.value(a_);
      for (auto& x : ga.v) x *= go;
      for (auto& x : gb.v) x *= go;
      accumulate(t, a_, ga);
      accumulate(t, b_, gb);
    });
  }

  // ||x||_2, gradient x / max(||x||, eps)
  int l2_norm(int a) {
    double s = 0.0;
    for (double x : value(a).v) s += x * x;
    const double norm = std::sqrt(s);
    return unary(Tensor::scalar(norm), a, [norm](Tape& t, int a_, int o) {
      const double go = t.grad(o)[0];
      const double denom = std::max(norm, 1e-12);
      Tensor g = t.value(a_);
      for (auto& x : g.v) x = go * x / denom;
      accumulate(t, a_, g);
    });
  }

  // ||x - y||_2
  int l2_distance(int a, int b) {
    check_same(a, b, "l2_distance");
    double s = 0.0;
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    for (int i = 0; i < va.size(); ++i) {
      const double d = va[i] - vb[i];
      s += d * d;
    }
    const double dist = std::sqrt(s);
    return unary_or_binary(Tensor::scalar(dist), a, b,
                           [dist](Tape& t, int a_, int b_, int o) {
      const double go = t.grad(o)[0];
      const double denom = std::max(dist, 1e-12);
      Tensor ga = t.value(a_);
      for (int i = 0; i < ga.size(); ++i)
        ga[i] = go * (t.value(a_)[i] - t.value(b_)[i]) / denom;
      Tensor gb = ga;
      for (auto& x : gb.v) x = -x;
      accumulate(t, a_, ga);
      accumulate(t, b_, gb);
    });
  }

  // mean squared error between equal-length vectors
  int mse(int a, int b) {
    check_same(a, b, "mse");
    const int n = value(a).size();
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = value(a)[i] - value(b)[i];
      s += d * d;
    }
    return unary_or_binary(Tensor::scalar(s / n), a, b,
                           [n](Tape& t, int a_, int b_, int o) {
      const double go = t.grad(o)[0];
      Tensor ga = t.value(a_);
      for (int i = 0; i < n; ++i)
        ga[i] = go * 2.0 * (t.value(a_)[i] - t.value(b_)[i]) / n;
      Tensor gb = ga;
      for (auto& x : gb.v) x = -x;
      accumulate(t, a_, ga);
      accumulate(t, b_, gb);
    });
  }

  // -sum_c target_c * log softmax(logits)_c  (targets may be soft)
  int softmax_nll(int logits, int target) {
    check_same(logits, target, "softmax_nll");
    const Tensor& l = value(logits);
    const int n = l.size();
    double mx = l[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, l[i]);
    double z = 0.0;
    for (int i = 0; i < n; ++i) z += std::exp(l[i] - mx);
    const double logz = std::log(z) + mx;
    double loss = 0.0;
    double tsum = 0.0;
    for (int i = 0; i < n; ++i) {
      loss -= value(target)[i] * (l[i] - logz);
      tsum += value(target)[i];
    }
    return unary_or_binary(Tensor::scalar(loss), logits, target,
                           [logz, tsum, n](Tape& t, int l_, int tg_, int o) {
      const double go = t.grad(o)[0];
      Tensor gl = t.value(l_);
      for (int i = 0; i < n; ++i) {
        const double p = std::exp(t.value(l_)[i] - logz);
        gl[i] = go * (tsum * p - t.value(tg_)[i]);
      }
      accumulate(t, l_, gl);
      Tensor gt = t.value(tg_);
      for (int i = 0; i < n; ++i) gt[i] = go * (logz - t.value(l_)[i]);
      accumulate(t, tg_, gt);
    });
  }

  // ---- linear / conv ----

  // y = W x + b;  W: (out, in), x: (in), b: (out)
  int affine(int w, int b, int x) {
    const Tensor& W = value(w);
    const Tensor& X = value(x);
    const Tensor& B = value(b);
    if (W.shape.size() != 2 || W.shape[1] != X.size() || B.size() != W.shape[0])
      throw std::invalid_argument("affine shape mismatch");
    const int out_dim = W.shape[0];
    const int in_dim = W.shape[1];
    Tensor y({out_dim});
    for (int o = 0; o < out_dim; ++o) {
      double s = B[o];
      const double* row = &W.v[static_cast<size_t>(o) * in_dim];
      for (int i = 0; i < in_dim; ++i) s += row[i] * X[i];
      y[o] = s;
    }
    Node n;
    n.value = std::move(y);
    n.needs_grad = needs_grad(w) || needs_grad(b) || needs_grad(x);
    n.backward = [w, b, x, out_dim, in_dim](Tape& t) {
      const int o = t.pending_;
      const Tensor& go = t.grad(o);
      if (t.needs_grad(w)) {
        Tensor gw(t.value(w).shape);
        for (int r = 0; r < out_dim; ++r)
          for (int i = 0; i < in_dim; ++i)
            gw.v[static_cast<size_t>(r) * in_dim + i] = go[r] * t.value(x)[i];
        accumulate(t, w, gw);
      }
      if (t.needs_grad(b)) accumulate(t, b, go);
      if (t.needs_grad(x)) {
        Tensor gx(t.value(x).shape);
        for (int i = 0; i < in_dim; ++i) {
          double s = 0.0;
          for (int r = 0; r < out_dim; ++r)
            s += t.value(w).v[static_cast<size_t>(r) * in_dim + i] * go[r];
          gx[i] = s;
        }
        accumulate(t, x, gx);
      }
    };
    return push(std::move(n));
  }

  // x: (C,H,W), k: (OC,C,KH,KW), b: (OC); valid padding
  int conv2d(int k, int b, int x, int stride) {
    const Tensor& K = value(k);
    const Tensor& X = value(x);
    if (K.shape.size() != 4 || X.shape.size() != 3 || K.shape[1] != X.shape[0])
      throw std::invalid_argument("conv2d shape mismatch");
    const int oc = K.shape[0], c = K.shape[1], kh = K.shape[2], kw = K.shape[3];
    const int h = X.shape[1], w = X.shape[2];
    const int oh = (h - kh) / stride + 1;
    const int ow = (w - kw) / stride + 1;
    if (oh < 1 || ow < 1) throw std::invalid_argument("conv2d output too small");
    Tensor y({oc, oh, ow});
    auto xat = [&](int ci, int yi, int xi) {
      return X.v[(static_cast<size_t>(ci) * h + yi) * w + xi];
    };
    auto kat = [&](int oi, int ci, int yi, int xi) {
      return K.v[((static_cast<size_t>(oi) * c + ci) * kh + yi) * kw + xi];
    };
    for (int o = 0; o < oc; ++o)
      for (int yo = 0; yo < oh; ++yo)
        for (int xo = 0; xo < ow; ++xo) {
          double s = value(b)[o];
          for (int ci = 0; ci < c; ++ci)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx)
                s += kat(o, ci, ky, kx) * xat(ci, yo * stride + ky, xo * stride + kx);
          y.v[(static_cast<size_t>(o) * oh + yo) * ow + xo] = s;
        }
    Node n;
    n.value = std::move(y);
    n.needs_grad = needs_grad(k) || needs_grad(b) || needs_grad(x);
    n.backward = [k, b, x, stride, oc, c, kh, kw, h, w, oh, ow](Tape& t) {
      const int o = t.pending_;
      const Tensor& go = t.grad(o);
      Tensor gk(t.value(k).shape);
      Tensor gb(t.value(b).shape);
      Tensor gx(t.value(x).shape);
      const Tensor& K = t.value(k);
      const Tensor& X = t.value(x);
      for (int oi = 0; oi < oc; ++oi)
        for (int yo = 0; yo < oh; ++yo)
          for (int xo = 0; xo < ow; ++xo) {
            const double g = go.v[(static_cast<size_t>(oi) * oh + yo) * ow + xo];
            gb[oi] += g;
            for (int ci = 0; ci < c; ++ci)
              for (int ky = 0; ky < kh; ++ky)
                for (int kx = 0; kx < kw; ++kx) {
                  const int yi = yo * stride + ky;
                  const int xi = xo * stride + kx;
                  gk.v[((static_cast<size_t>(oi) * c + ci) * kh + ky) * kw + kx] +=
                      g * X.v[(static_cast<size_t>(ci) * h + yi) * w + xi];
                  gx.v[(static_cast<size_t>(ci) * h + yi) * w + xi] +=
                      g * K.v[((static_cast<size_t>(oi) * c + ci) * kh + ky) * kw + kx];
                }
          }
      if (t.needs_grad(k)) accumulate(t, k, gk);
      if (t.needs_grad(b)) accumulate(t, b, gb);
      if (t.needs_grad(x)) accumulate(t, x, gx);
    };
    return push(std::move(n));
  }

  int reshape(int a, std::vector<int> shape) {
    if (Tensor::count(shape) != value(a).size())
      throw std::invalid_argument("reshape size mismatch");
    Tensor out(std::move(shape), value(a).v);
    return unary(std::move(out), a, [](Tape& t, int a_, int o) {
      Tensor g(t.value(a_).shape, t.grad(o).v);
      accumulate(t, a_, g);
    });
  }

  int concat(int a, int b) {
    std::vector<double> data = value(a).v;
    data.insert(data.end(), value(b).v.begin(), value(b).v.end());
    const int na = value(a).size();
    Tensor out({static_cast<int>(data.size())}, std::move(data));
    return unary_or_binary(std::move(out), a, b, [na](Tape& t, int a_, int b_, int o) {
      Tensor ga(t.value(a_).shape);
      Tensor gb(t.value(b_).shape);
      for (int i = 0; i < ga.size(); ++i) ga[i] = t.grad(o)[i];
      for (int i = 0; i < gb.size(); ++i) gb[i] = t.grad(o)[na + i];
      accumulate(t, a_, ga);
      accumulate(t, b_, gb);
    });
  }

  // ---- backward ----

  void backward(int loss) {
    if (value(loss).size() != 1)
      throw std::invalid_argument("backward expects a scalar");
    for (auto& n : nodes_) n.grad = Tensor();
    nodes_[static_cast<size_t>(loss)].grad = Tensor::scalar(1.0);
    for (int i = loss; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (!n.backward || n.grad.v.empty()) continue;
      pending_ = i;
      n.backward(*this);
    }
  }

 private:
  friend void accumulate(Tape& t, int idx, const Tensor& g);

  int push(Node n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size() - 1);
  }

  void check_same(int a, int b, const char* op) const {
    if (!same_shape(value(a), value(b)))
      throw std::invalid_argument(std::string(op) + ": shape mismatch");
  }

  template <class F>
  int unary(Tensor out, int a, F f) {
    Node n;
    n.value = std::move(out);
    n.needs_grad = needs_grad(a);
    if (n.needs_grad)
      n.backward = [a, f](Tape& t) { f(t, a, t.pending_); };
    return push(std::move(n));
  }

  template <class F>
  int unary_or_binary(Tensor out, int a, int b, F f) {
    Node n;
    n.value = std::move(out);
    n.needs_grad = needs_grad(a) || needs_grad(b);
    if (n.needs_grad)
      n.backward = [a, b, f](Tape& t) { f(t, a, b, t.pending_); };
    return push(std::move(n));
  }

  std::vector<Node> nodes_;
  int pending_ = -1;
};

inline void accumulate(Tape& t, int idx, const Tensor& g) {
  Tensor& dst = t.nodes_[static_cast<size_t>(idx)].grad;
  if (dst.v.empty()) {
    dst = g;
    return;
  }
  for (int i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

// Compares the reverse-mode gradient of a scalar function against central
// finite differences. `build` must reconstruct the function on a fresh tape
// from the given leaves each call. Returns the max relative error.
inline double gradient_check(
    const std::function<int(Tape&, const std::vector<int>&)>& build,
    const std::vector<Tensor>& point, double fd_step = 1e-5) {
  Tape tape;
  std::vector<int> leaves;
  leaves.reserve(point.size());
  for (const auto& t : point) leaves.push_back(tape.leaf(t, true));
  const int loss = build(tape, leaves);
  tape.backward(loss);

  auto eval = [&](const std::vector<Tensor>& p) {
    Tape t2;
    std::vector<int> l2;
    for (const auto& t : p) l2.push_back(t2.leaf(t, false));
    return t2.value(build(t2, l2))[0];
  };

  double max_rel = 0.0;
  std::vector<Tensor> probe = point;
  for (size_t pi = 0; pi < point.size(); ++pi) {
    const Tensor& g = tape.grad(leaves[pi]);
    for (int i = 0; i < point[pi].size(); ++i) {
      const double orig = probe[pi][i];
      probe[pi][i] = orig + fd_step;
      const double hi = eval(probe);
      probe[pi][i] = orig - fd_step;
      const double lo = eval(probe);
      probe[pi][i] = orig;
      const double numeric = (hi - lo) / (2.0 * fd_step);
      const double analytic = g.v.empty() ? 0.0 : g[i];
      const double rel = std::fabs(analytic - numeric) /
                         std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace curio
