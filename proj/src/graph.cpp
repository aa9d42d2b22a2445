// Copyright 2026 The wavft Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "wavft/graph.hpp"

#include <cmath>
#include <memory>

namespace wavft {

template <typename T>
bool Graph<T>::any_requires_grad(const std::vector<Ref>& parents) const {
  for (Ref p : parents)
    if (nodes_[static_cast<size_t>(p)].requires_grad) return true;
  return false;
}

template <typename T>
typename Graph<T>::Ref Graph<T>::leaf(Tensor<T> value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.grad = Tensor<T>(n.value.shape);
  nodes_.push_back(std::move(n));
  return static_cast<Ref>(nodes_.size() - 1);
}

template <typename T>
typename Graph<T>::Ref Graph<T>::make_node(Tensor<T> value, std::vector<Ref> parents,
                                           BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  n.parents = std::move(parents);
  n.requires_grad = any_requires_grad(n.parents);
  if (n.requires_grad) {
    n.grad = Tensor<T>(n.value.shape);
    n.backward = std::move(backward);
  }
  nodes_.push_back(std::move(n));
  return static_cast<Ref>(nodes_.size() - 1);
}

template <typename T>
void Graph<T>::backward(Ref loss) {
  Node& ln = nodes_[static_cast<size_t>(loss)];
  WAVFT_CHECK(ln.value.numel() == 1, ShapeError, "backward: loss must be scalar");
  if (!ln.requires_grad) return;
  ln.grad.fill(T(1));
  for (Ref r = loss; r >= 0; --r) {
    Node& n = nodes_[static_cast<size_t>(r)];
    if (n.requires_grad && n.backward) n.backward(*this, r);
  }
}

// ---- elementwise ----------------------------------------------------------

template <typename T>
typename Graph<T>::Ref Graph<T>::add(Ref a, Ref b) {
  const Tensor<T>& va = value(a);
  const Tensor<T>& vb = value(b);
  WAVFT_CHECK(va.same_shape(vb), ShapeError, "add: shape mismatch");
  Tensor<T> out(va.shape);
  for (int64_t i = 0; i < out.numel(); ++i) out(i) = va(i) + vb(i);
  return make_node(std::move(out), {a, b}, [a, b](Graph& g, Ref self) {
    const Tensor<T>& go = g.grad(self);
    for (Ref p : {a, b}) {
      if (!g.requires_grad(p)) continue;
      Tensor<T>& gp = g.grad(p);
      for (int64_t i = 0; i < go.numel(); ++i) gp(i) += go(i);
    }
  });
}

template <typename T>
typename Graph<T>::Ref Graph<T>::scale(Ref a, T c) {
  const Tensor<T>& va = value(a);
  Tensor<T> out(va.shape);
  for (int64_t i = 0; i < out.numel(); ++i) out(i) = va(i) * c;
  return make_node(std::move(out), {a}, [a, c](Graph& g, Ref self) {
    const Tensor<T>& go = g.grad(self);
    Tensor<T>& ga = g.grad(a);
    for (int64_t i = 0; i < go.numel(); ++i) ga(i) += go(i) * c;
  });
}

template <typename T>
typename Graph<T>::Ref Graph<T>::axpby(T ca, Ref a, T cb, Ref b) {
  WAVFT_CHECK(value(a).numel() == 1 && value(b).numel() == 1, ShapeError,
              "axpby: scalar operands expected");
  Tensor<T> out({1});
  out(0) = ca * value(a)(0) + cb * value(b)(0);
  return make_node(std::move(out), {a, b}, [ca, a, cb, b](Graph& g, Ref self) {
    T go = g.grad(self)(0);
    if (g.requires_grad(a)) g.grad(a)(0) += ca * go;
    if (g.requires_grad(b)) g.grad(b)(0) += cb * go;
  });
}

template <typename T>
typename Graph<T>::Ref Graph<T>::gelu(Ref x) {
  const Tensor<T>& vx = value(x);
  Tensor<T> out(vx.shape);
  const double inv_sqrt2 = 0.7071067811865475244;
  for (int64_t i = 0; i < out.numel(); ++i) {
    double v = static_cast<double>(vx(i));
    out(i) = static_cast<T>(v * 0.5 * (1.0 + std::erf(v * inv_sqrt2)));
  }
  return make_node(std::move(out), {x}, [x](Graph& g, Ref self) {
    const Tensor<T>& vx = g.value(x);
    const Tensor<T>& go = g.grad(self);
    Tensor<T>& gx = g.grad(x);
    const double inv_sqrt2 = 0.7071067811865475244;
    const double inv_sqrt2pi = 0.3989422804014326779;
    for (int64_t i = 0; i < go.numel(); ++i) {
      double v = static_cast<double>(vx(i));
      double cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
      double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
      gx(i) += go(i) * static_cast<T>(cdf + v * pdf);
    }
  });
}

// ---- linear ----------------------------------------------------------------

template <typename T>
typename Graph<T>::Ref Graph<T>::linear(Ref x, Ref w, Ref b) {
  const Tensor<T>& vx = value(x);
  const Tensor<T>& vw = value(w);
  const Tensor<T>& vb = value(b);
  WAVFT_CHECK(vw.rank() == 2, ShapeError, "linear: weight must be rank 2");
  const int64_t K = vw.dim(0), N = vw.dim(1);
  WAVFT_CHECK(vx.rank() >= 1 && vx.shape.back() == K, ShapeError,
              "linear: input last dim ", vx.shape.back(), " != ", K);
  WAVFT_CHECK(vb.numel() == N, ShapeError, "linear: bias size mismatch");
  const int64_t R = vx.numel() / K;

  std::vector<int64_t> out_shape = vx.shape;
  out_shape.back() = N;
  Tensor<T> out(out_shape);
  for (int64_t r = 0; r < R; ++r) {
    T* orow = &out.data[static_cast<size_t>(r * N)];
    for (int64_t n = 0; n < N; ++n) orow[n] = vb(n);
    const T* xrow = &vx.data[static_cast<size_t>(r * K)];
    for (int64_t k = 0; k < K; ++k) {
      const T xv = xrow[k];
      const T* wrow = &vw.data[static_cast<size_t>(k * N)];
      for (int64_t n = 0; n < N; ++n) orow[n] += xv * wrow[n];
    }
  }
  return make_node(std::move(out), {x, w, b}, [x, w, b, R, K, N](Graph& g, Ref self) {
    const Tensor<T>& go = g.grad(self);
    const Tensor<T>& vx = g.value(x);
    const Tensor<T>& vw = g.value(w);
    if (g.requires_grad(x)) {
      Tensor<T>& gx = g.grad(x);
      for (int64_t r = 0; r < R; ++r) {
        const T* gorow = &go.data[static_cast<size_t>(r * N)];
        T* gxrow = &gx.data[static_cast<size_t>(r * K)];
        for (int64_t k = 0; k < K; ++k) {
          const T* wrow = &vw.data[static_cast<size_t>(k * N)];
          T acc = T(0);
          for (int64_t n = 0; n < N; ++n) acc += gorow[n] * wrow[n];
          gxrow[k] += acc;
        }
      }
    }
    if (g.requires_grad(w)) {
      Tensor<T>& gw = g.grad(w);
      for (int64_t r = 0; r < R; ++r) {
        const T* gorow = &go.data[static_cast<size_t>(r * N)];
        const T* xrow = &vx.data[static_cast<size_t>(r * K)];
        for (int64_t k = 0; k < K; ++k) {
          const T xv = xrow[k];
          T* gwrow = &gw.data[static_cast<size_t>(k * N)];
          for (int64_t n = 0; n < N; ++n) gwrow[n] += xv * gorow[n];
        }
      }
    }
    if (g.requires_grad(b)) {
      Tensor<T>& gb = g.grad(b);
      for (int64_t r = 0; r < R; ++r) {
        const T* gorow = &go.data[static_cast<size_t>(r * N)];
        for (int64_t n = 0; n < N; ++n) gb(n) += gorow[n];
      }
    }
  });
}

// ---- layer norm -------------------------------------------------------------

template <typename T>
typename Graph<T>::Ref Graph<T>::layer_norm(Ref x, Ref gamma, Ref beta, T eps) {
  const Tensor<T>& vx = value(x);
  const int64_t D = vx.shape.back();
  const int64_t R = vx.numel() / D;
  WAVFT_CHECK(value(gamma).numel() == D && value(beta).numel() == D, ShapeError,
              "layer_norm: scale/bias size mismatch");

  Tensor<T> out(vx.shape);
  auto rstd = std::make_shared<std::vector<T>>(static_cast<size_t>(R));
  auto xhat = std::make_shared<Tensor<T>>(vx.shape);
  const Tensor<T>& vg = value(gamma);
  const Tensor<T>& vbt = value(beta);
  for (int64_t r = 0; r < R; ++r) {
    const T* xrow = &vx.data[static_cast<size_t>(r * D)];
    T mean = T(0);
    for (int64_t d = 0; d < D; ++d) mean += xrow[d];
    mean /= static_cast<T>(D);
    T var = T(0);
    for (int64_t d = 0; d < D; ++d) {
      T c = xrow[d] - mean;
      var += c * c;
    }
    var /= static_cast<T>(D);
    T rs = T(1) / std::sqrt(var + eps);
    (*rstd)[static_cast<size_t>(r)] = rs;
    T* hrow = &xhat->data[static_cast<size_t>(r * D)];
    T* orow = &out.data[static_cast<size_t>(r * D)];
    for (int64_t d = 0; d < D; ++d) {
      hrow[d] = (xrow[d] - mean) * rs;
      orow[d] = vg(d) * hrow[d] + vbt(d);
    }
  }
  return make_node(std::move(out), {x, gamma, beta},
                   [x, gamma, beta, R, D, rstd, xhat](Graph& g, Ref self) {
                     const Tensor<T>& go = g.grad(self);
                     const Tensor<T>& vg = g.value(gamma);
                     for (int64_t r = 0; r < R; ++r) {
                       const T* gorow = &go.data[static_cast<size_t>(r * D)];
                       const T* hrow = &xhat->data[static_cast<size_t>(r * D)];
                       if (g.requires_grad(gamma)) {
                         Tensor<T>& gg = g.grad(gamma);
                         for (int64_t d = 0; d < D; ++d) gg(d) += gorow[d] * hrow[d];
                       }
                       if (g.requires_grad(beta)) {
                         Tensor<T>& gb = g.grad(beta);
                         for (int64_t d = 0; d < D; ++d) gb(d) += gorow[d];
                       }
                       if (g.requires_grad(x)) {
                         Tensor<T>& gx = g.grad(x);
                         T* gxrow = &gx.data[static_cast<size_t>(r * D)];
                         T m1 = T(0), m2 = T(0);
                         for (int64_t d = 0; d < D; ++d) {
                           T dh = gorow[d] * vg(d);
                           m1 += dh;
                           m2 += dh * hrow[d];
                         }
                         m1 /= static_cast<T>(D);
                         m2 /= static_cast<T>(D);
                         const T rs = (*rstd)[static_cast<size_t>(r)];
                         for (int64_t d = 0; d < D; ++d) {
                           T dh = gorow[d] * vg(d);
                           gxrow[d] += rs * (dh - m1 - hrow[d] * m2);
                         }
                       }
                     }
                   });
}

// ---- convolutions -----------------------------------------------------------

template <typename T>
typename Graph<T>::Ref Graph<T>::conv1d(Ref x, Ref w, Ref b, int stride) {
  const Tensor<T>& vx = value(x);
  const Tensor<T>& vw = value(w);
  WAVFT_CHECK(vx.rank() == 3 && vw.rank() == 3, ShapeError, "conv1d: rank mismatch");
  const int64_t B = vx.dim(0), Tin = vx.dim(1), Cin = vx.dim(2);
  const int64_t K = vw.dim(0), Cout = vw.dim(2);
  WAVFT_CHECK(vw.dim(1) == Cin, ShapeError, "conv1d: channel mismatch");
  WAVFT_CHECK(Tin >= K, ShapeError, "conv1d: input too short: ", Tin, " < kernel ", K);
  const int64_t Tout = (Tin - K) / stride + 1;

  Tensor<T> out({B, Tout, Cout});
  const Tensor<T>& vb = value(b);
  for (int64_t bi = 0; bi < B; ++bi) {
    for (int64_t t = 0; t < Tout; ++t) {
      T* orow = &out.data[static_cast<size_t>((bi * Tout + t) * Cout)];
      for (int64_t o = 0; o < Cout; ++o) orow[o] = vb(o);
      for (int64_t kk = 0; kk < K; ++kk) {
        const T* xrow = &vx.data[static_cast<size_t>((bi * Tin + t * stride + kk) * Cin)];
        for (int64_t i = 0; i < Cin; ++i) {
          const T xv = xrow[i];
          const T* wrow = &vw.data[static_cast<size_t>((kk * Cin + i) * Cout)];
          for (int64_t o = 0; o < Cout; ++o) orow[o] += xv * wrow[o];
        }
      }
    }
  }
  return make_node(std::move(out), {x, w, b},
                   [x, w, b, B, Tin, Cin, K, Cout, Tout, stride](Graph& g, Ref self) {
                     const Tensor<T>& go = g.grad(self);
                     const Tensor<T>& vx = g.value(x);
                     const Tensor<T>& vw = g.value(w);
                     const bool need_x = g.requires_grad(x);
                     const bool need_w = g.requires_grad(w);
                     const bool need_b = g.requires_grad(b);
                     for (int64_t bi = 0; bi < B; ++bi) {
                       for (int64_t t = 0; t < Tout; ++t) {
                         const T* gorow = &go.data[static_cast<size_t>((bi * Tout + t) * Cout)];
                         if (need_b) {
                           Tensor<T>& gb = g.grad(b);
                           for (int64_t o = 0; o < Cout; ++o) gb(o) += gorow[o];
                         }
                         for (int64_t kk = 0; kk < K; ++kk) {
                           const int64_t ti = t * stride + kk;
                           const T* xrow = &vx.data[static_cast<size_t>((bi * Tin + ti) * Cin)];
                           for (int64_t i = 0; i < Cin; ++i) {
                             const size_t woff = static_cast<size_t>((kk * Cin + i) * Cout);
                             if (need_w) {
                               T* gwrow = &g.grad(w).data[woff];
                               const T xv = xrow[i];
                               for (int64_t o = 0; o < Cout; ++o) gwrow[o] += xv * gorow[o];
                             }
                             if (need_x) {
                               const T* wrow = &vw.data[woff];
                               T acc = T(0);
                               for (int64_t o = 0; o < Cout; ++o) acc += gorow[o] * wrow[o];
                               g.grad(x).data[static_cast<size_t>((bi * Tin + ti) * Cin + i)] += acc;
                             }
                           }
                         }
                       }
                     }
                   });
}

template <typename T>
typename Graph<T>::Ref Graph<T>::depthwise_conv1d(Ref x, Ref w, Ref b) {
  const Tensor<T>& vx = value(x);
  const Tensor<T>& vw = value(w);
  WAVFT_CHECK(vx.rank() == 3 && vw.rank() == 2, ShapeError, "depthwise_conv1d: rank mismatch");
  const int64_t B = vx.dim(0), Tt = vx.dim(1), D = vx.dim(2);
  const int64_t K = vw.dim(0);
  WAVFT_CHECK(vw.dim(1) == D, ShapeError, "depthwise_conv1d: channel mismatch");
  WAVFT_CHECK(K % 2 == 1, ShapeError, "depthwise_conv1d: kernel must be odd");
  const int64_t H = K / 2;

  Tensor<T> out(vx.shape);
  const Tensor<T>& vb = value(b);
  for (int64_t bi = 0; bi < B; ++bi) {
    for (int64_t t = 0; t < Tt; ++t) {
      T* orow = &out.data[static_cast<size_t>((bi * Tt + t) * D)];
      for (int64_t d = 0; d < D; ++d) orow[d] = vb(d);
      for (int64_t kk = 0; kk < K; ++kk) {
        const int64_t ti = t + kk - H;
        if (ti < 0 || ti >= Tt) continue;
        const T* xrow = &vx.data[static_cast<size_t>((bi * Tt + ti) * D)];
        const T* wrow = &vw.data[static_cast<size_t>(kk * D)];
        for (int64_t d = 0; d < D; ++d) orow[d] += xrow[d] * wrow[d];
      }
    }
  }
  return make_node(std::move(out), {x, w, b}, [x, w, b, B, Tt, D, K, H](Graph& g, Ref self) {
    const Tensor<T>& go = g.grad(self);
    const Tensor<T>& vx = g.value(x);
    const Tensor<T>& vw = g.value(w);
    for (int64_t bi = 0; bi < B; ++bi) {
      for (int64_t t = 0; t < Tt; ++t) {
        const T* gorow = &go.data[static_cast<size_t>((bi * Tt + t) * D)];
        if (g.requires_grad(b)) {
          Tensor<T>& gb = g.grad(b);
          for (int64_t d = 0; d < D; ++d) gb(d) += gorow[d];
        }
        for (int64_t kk = 0; kk < K; ++kk) {
          const int64_t ti = t + kk - H;
          if (ti < 0 || ti >= Tt) continue;
          const T* xrow = &vx.data[static_cast<size_t>((bi * Tt + ti) * D)];
          const T* wrow = &vw.data[static_cast<size_t>(kk * D)];
          if (g.requires_grad(w)) {
            T* gwrow = &g.grad(w).data[static_cast<size_t>(kk * D)];
            for (int64_t d = 0; d < D; ++d) gwrow[d] += xrow[d] * gorow[d];
          }
          if (g.requires_grad(x)) {
            T* gxrow = &g.grad(x).data[static_cast<size_t>((bi * Tt + ti) * D)];
            for (int64_t d = 0; d < D; ++d) gxrow[d] += wrow[d] * gorow[d];
          }
        }
      }
    }
  });
}

// ---- masking / padding ------------------------------------------------------

template <typename T>
typename Graph<T>::Ref Graph<T>::mask_fill_rows(Ref x, const Tensor<uint8_t>& plan, Ref m) {
  const Tensor<T>& vx = value(x);
  WAVFT_CHECK(vx.rank() == 3, ShapeError, "mask_fill_rows: rank-3 input expected");
  const int64_t B = vx.dim(0), Tt = vx.dim(1), F = vx.dim(2);
  WAVFT_CHECK(plan.rank() == 2 && plan.dim(0) == B && plan.dim(1) == Tt, ShapeError,
              "mask_fill_rows: plan shape mismatch");
  WAVFT_CHECK(value(m).numel() == F, ShapeError, "mask_fill_rows: mask vector size mismatch");

  Tensor<T> out = vx;
  const Tensor<T>& vm = value(m);
  auto plan_copy = std::make_shared<Tensor<uint8_t>>(plan);
  for (int64_t bi = 0; bi < B; ++bi)
    for (int64_t t = 0; t < Tt; ++t)
      if (plan(bi, t)) {
        T* orow = &out.data[static_cast<size_t>((bi * Tt + t) * F)];
        for (int64_t f = 0; f < F; ++f) orow[f] = vm(f);
      }
  return make_node(std::move(out), {x, m}, [x, m, B, Tt, F, plan_copy](Graph& g, Ref self) {
    const Tensor<T>& go = g.grad(self);
    for (int64_t bi = 0; bi < B; ++bi) {
      for (int64_t t = 0; t < Tt; ++t) {
        const T* gorow = &go.data[static_cast<size_t>((bi * Tt + t) * F)];
        if ((*plan_copy)(bi, t)) {
          if (!g.requires_grad(m)) continue;
          Tensor<T>& gm = g.grad(m);
          for (int64_t f = 0; f < F; ++f) gm(f) += gorow[f];
        } else {
          if (!g.requires_grad(x)) continue;
          T* gxrow = &g.grad(x).data[static_cast<size_t>((bi * Tt + t) * F)];
          for (int64_t f = 0; f < F; ++f) gxrow[f] += gorow[f];
        }
      }
    }
  });
}

template <typename T>
typename Graph<T>::Ref Graph<T>::zero_pad_rows(Ref x, const std::vector<int>& valid_len) {
  const Tensor<T>& vx = value(x);
  WAVFT_CHECK(vx.rank() == 3, ShapeError, "zero_pad_rows: rank-3 input expected");
  const int64_t B = vx.dim(0), Tt = vx.dim(1), F = vx.dim(2);
  WAVFT_CHECK(static_cast<int64_t>(valid_len.size()) == B, ShapeError,
              "zero_pad_rows: valid_len size mismatch");

  Tensor<T> out = vx;
  for (int64_t bi = 0; bi < B; ++bi)
    for (int64_t t = valid_len[static_cast<size_t>(bi)]; t < Tt; ++t) {
      T* orow = &out.data[static_cast<size_t>((bi * Tt + t) * F)];
      for (int64_t f = 0; f < F; ++f) orow[f] = T(0);
    }
  auto lens = std::make_shared<std::vector<int>>(valid_len);
  return make_node(std::move(out), {x}, [x, B, Tt, F, lens](Graph& g, Ref self) {
    const Tensor<T>& go = g.grad(self);
    Tensor<T>& gx = g.grad(x);
    for (int64_t bi = 0; bi < B; ++bi) {
      const int64_t L = (*lens)[static_cast<size_t>(bi)];
      for (int64_t t = 0; t < L; ++t) {
        const size_t off = static_cast<size_t>((bi * Tt + t) * F);
        for (int64_t f = 0; f < F; ++f) gx.data[off + static_cast<size_t>(f)] +=
            go.data[off + static_cast<size_t>(f)];
      }
    }
  });
}

template <typename T>
typename Graph<T>::Ref Graph<T>::time_select(Ref x, int stride, int offset, int64_t out_len,
                                             const std::vector<int>& out_valid) {
  const Tensor<T>& vx = value(x);
  WAVFT_CHECK(vx.rank() == 3, ShapeError, "time_select: rank-3 input expected");
  const int64_t B = vx.dim(0), Tin = vx.dim(1), F = vx.dim(2);

  Tensor<T> out({B, out_len, F});
  for (int64_t bi = 0; bi < B; ++bi) {
    const int64_t L = out_valid[static_cast<size_t>(bi)];
    for (int64_t t = 0; t < L; ++t) {
      const int64_t src = static_cast<int64_t>(stride) * t + offset;
      WAVFT_CHECK(src < Tin, ShapeError, "time_select: source index out of range");
      const T* xrow = &vx.data[static_cast<size_t>((bi * Tin + src) * F)];
      T* orow = &out.data[static_cast<size_t>((bi * out_len + t) * F)];
      for (int64_t f = 0; f < F; ++f) orow[f] = xrow[f];
    }
  }
  auto lens = std::make_shared<std::vector<int>>(out_valid);
  return make_node(std::move(out), {x},
                   [x, stride, offset, out_len, B, Tin, F, lens](Graph& g, Ref self) {
                     const Tensor<T>& go = g.grad(self);
                     Tensor<T>& gx = g.grad(x);
                     for (int64_t bi = 0; bi < B; ++bi) {
                       const int64_t L = (*lens)[static_cast<size_t>(bi)];
                       for (int64_t t = 0; t < L; ++t) {
                         const int64_t src = static_cast<int64_t>(stride) * t + offset;
                         const T* gorow = &go.data[static_cast<size_t>((bi * out_len + t) * F)];
                         T* gxrow = &gx.data[static_cast<size_t>((bi * Tin + src) * F)];
                         for (int64_t f = 0; f < F; ++f) gxrow[f] += gorow[f];
                       }
                     }
                   });
}

// ---- attention ---------------------------------------------------------------

template <typename T>
typename Graph<T>::Ref Graph<T>::attention_core(Ref q, Ref k, Ref v, Ref relbias, int num_heads,
                                                int max_rel_dist,
                                                const std::vector<int>& valid_len,
                                                Tensor<T>* attn_probs_out) {
  const Tensor<T>& vq = value(q);
  const Tensor<T>& vk = value(k);
  const Tensor<T>& vv = value(v);
  const Tensor<T>& vr = value(relbias);
  WAVFT_CHECK(vq.rank() == 3 && vq.same_shape(vk) && vq.same_shape(vv), ShapeError,
              "attention_core: q/k/v shape mismatch");
  const int64_t B = vq.dim(0), Tt = vq.dim(1), D = vq.dim(2);
  const int64_t H = num_heads;
  WAVFT_CHECK(D % H == 0, ShapeError, "attention_core: model dim not divisible by heads");
  const int64_t dh = D / H;
  WAVFT_CHECK(vr.rank() == 2 && vr.dim(0) == H && vr.dim(1) == 2 * max_rel_dist + 1, ShapeError,
              "attention_core: relbias table shape mismatch");
  const T att_scale = T(1) / static_cast<T>(std::sqrt(static_cast<double>(dh)));

  // Attention weights are cached for the backward pass; zero at padding.
  auto probs = std::make_shared<Tensor<T>>(std::vector<int64_t>{B, H, Tt, Tt});
  Tensor<T> out({B, Tt, D});
  std::vector<T> logits(static_cast<size_t>(Tt));
  for (int64_t bi = 0; bi < B; ++bi) {
    const int64_t L = valid_len[static_cast<size_t>(bi)];
    for (int64_t h = 0; h < H; ++h) {
      const int64_t hoff = h * dh;
      for (int64_t t = 0; t < L; ++t) {
        const T* qrow = &vq.data[static_cast<size_t>((bi * Tt + t) * D + hoff)];
        T mx = T(0);
        for (int64_t s = 0; s < L; ++s) {
          const T* krow = &vk.data[static_cast<size_t>((bi * Tt + s) * D + hoff)];
          T dot = T(0);
          for (int64_t e = 0; e < dh; ++e) dot += qrow[e] * krow[e];
          T lg = dot * att_scale + vr(h, rel_offset_index(t, s, max_rel_dist));
          logits[static_cast<size_t>(s)] = lg;
          if (s == 0 || lg > mx) mx = lg;
        }
        T denom = T(0);
        for (int64_t s = 0; s < L; ++s) {
          T e = std::exp(logits[static_cast<size_t>(s)] - mx);
          logits[static_cast<size_t>(s)] = e;
          denom += e;
        }
        T* prow = &probs->data[static_cast<size_t>(((bi * H + h) * Tt + t) * Tt)];
        for (int64_t s = 0; s < L; ++s) prow[s] = logits[static_cast<size_t>(s)] / denom;
        T* orow = &out.data[static_cast<size_t>((bi * Tt + t) * D + hoff)];
        for (int64_t s = 0; s < L; ++s) {
          const T p = prow[s];
          const T* vrow = &vv.data[static_cast<size_t>((bi * Tt + s) * D + hoff)];
          for (int64_t e = 0; e < dh; ++e) orow[e] += p * vrow[e];
        }
      }
    }
  }
  if (attn_probs_out) *attn_probs_out = *probs;

  auto lens = std::make_shared<std::vector<int>>(valid_len);
  return make_node(
      std::move(out), {q, k, v, relbias},
      [q, k, v, relbias, B, Tt, D, H, dh, max_rel_dist, att_scale, probs, lens](Graph& g,
                                                                                Ref self) {
        const Tensor<T>& go = g.grad(self);
        const Tensor<T>& vq = g.value(q);
        const Tensor<T>& vk = g.value(k);
        const Tensor<T>& vv = g.value(v);
        // Scratch grads so the hot loop needs no per-parent branches; only
        // the parents that track gradients receive the result.
        Tensor<T> gq(vq.shape), gk(vk.shape), gv(vv.shape);
        const bool need_r = g.requires_grad(relbias);
        std::vector<T> dw(static_cast<size_t>(Tt));
        for (int64_t bi = 0; bi < B; ++bi) {
          const int64_t L = (*lens)[static_cast<size_t>(bi)];
          for (int64_t h = 0; h < H; ++h) {
            const int64_t hoff = h * dh;
            for (int64_t t = 0; t < L; ++t) {
              const T* gorow = &go.data[static_cast<size_t>((bi * Tt + t) * D + hoff)];
              const T* prow = &probs->data[static_cast<size_t>(((bi * H + h) * Tt + t) * Tt)];
              T sumw = T(0);
              for (int64_t s = 0; s < L; ++s) {
                const T* vrow = &vv.data[static_cast<size_t>((bi * Tt + s) * D + hoff)];
                T acc = T(0);
                for (int64_t e = 0; e < dh; ++e) acc += gorow[e] * vrow[e];
                dw[static_cast<size_t>(s)] = acc;
                sumw += prow[s] * acc;
              }
              const T* qrow = &vq.data[static_cast<size_t>((bi * Tt + t) * D + hoff)];
              T* gqrow = &gq.data[static_cast<size_t>((bi * Tt + t) * D + hoff)];
              for (int64_t s = 0; s < L; ++s) {
                const T p = prow[s];
                const T de = p * (dw[static_cast<size_t>(s)] - sumw);
                if (need_r) g.grad(relbias)(h, rel_offset_index(t, s, max_rel_dist)) += de;
                const T* krow = &vk.data[static_cast<size_t>((bi * Tt + s) * D + hoff)];
                T* gkrow = &gk.data[static_cast<size_t>((bi * Tt + s) * D + hoff)];
                T* gvrow = &gv.data[static_cast<size_t>((bi * Tt + s) * D + hoff)];
                const T dea = de * att_scale;
                for (int64_t e = 0; e < dh; ++e) {
                  gqrow[e] += dea * krow[e];
                  gkrow[e] += dea * qrow[e];
                  gvrow[e] += p * gorow[e];
                }
              }
            }
          }
        }
        const std::pair<Ref, const Tensor<T>*> accs[] = {{q, &gq}, {k, &gk}, {v, &gv}};
        for (const auto& [ref, acc] : accs) {
          if (!g.requires_grad(ref)) continue;
          Tensor<T>& dst = g.grad(ref);
          for (int64_t i = 0; i < acc->numel(); ++i) dst(i) += (*acc)(i);
        }
      });
}

template <typename T>
typename Graph<T>::Ref Graph<T>::dropout(Ref x, double rate, RngStream* rng) {
  if (rate <= 0.0) return x;
  WAVFT_CHECK(rate < 1.0, ConfigError, "dropout: rate must be < 1");
  WAVFT_CHECK(rng != nullptr, ConfigError, "dropout: rng stream required");
  const Tensor<T>& vx = value(x);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  auto kept = std::make_shared<std::vector<uint8_t>>(static_cast<size_t>(vx.numel()));
  Tensor<T> out(vx.shape);
  for (int64_t i = 0; i < vx.numel(); ++i) {
    bool keep = rng->uniform() >= rate;
    (*kept)[static_cast<size_t>(i)] = keep ? 1 : 0;
    out(i) = keep ? vx(i) * keep_scale : T(0);
  }
  return make_node(std::move(out), {x}, [x, kept, keep_scale](Graph& g, Ref self) {
    const Tensor<T>& go = g.grad(self);
    Tensor<T>& gx = g.grad(x);
    for (int64_t i = 0; i < go.numel(); ++i)
      if ((*kept)[static_cast<size_t>(i)]) gx(i) += go(i) * keep_scale;
  });
}

template class Graph<float>;
template class Graph<double>;

}  // namespace wavft
