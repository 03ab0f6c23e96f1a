#pragma once

#ifndef EIGEN_DONT_PARALLELIZE
#define EIGEN_DONT_PARALLELIZE  // batch-level threads own the parallelism
#endif

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cassert>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace deltamap::ad {

// Dense 4D tensor, NCHW row-major. Vectors are carried as (N,1,1,1) or
// (1,C,1,1); scalars as (1,1,1,1).
template <class S>
struct Tensor {
  std::array<int, 4> sh{0, 0, 0, 0};
  std::vector<S> v;

  Tensor() = default;
  Tensor(int n, int c, int h, int w, S fill = S(0))
      : sh{n, c, h, w}, v(static_cast<size_t>(n) * c * h * w, fill) {
    if (n <= 0 || c <= 0 || h <= 0 || w <= 0) throw std::invalid_argument("Tensor: non-positive shape");
  }

  static Tensor zeros_like(const Tensor& o) { return Tensor(o.sh[0], o.sh[1], o.sh[2], o.sh[3]); }
  static Tensor scalar(S x) {
    Tensor t(1, 1, 1, 1);
    t.v[0] = x;
    return t;
  }

  int n() const { return sh[0]; }
  int c() const { return sh[1]; }
  int h() const { return sh[2]; }
  int w() const { return sh[3]; }
  size_t size() const { return v.size(); }
  S* data() { return v.data(); }
  const S* data() const { return v.data(); }

  S& at(int n_, int c_, int h_, int w_) { return v[offset(n_, c_, h_, w_)]; }
  S at(int n_, int c_, int h_, int w_) const { return v[offset(n_, c_, h_, w_)]; }
  size_t offset(int n_, int c_, int h_, int w_) const {
    return ((static_cast<size_t>(n_) * sh[1] + c_) * sh[2] + h_) * sh[3] + w_;
  }

  bool same_shape(const Tensor& o) const { return sh == o.sh; }

  template <class T>
  Tensor<T> cast() const {
    Tensor<T> out(sh[0], sh[1], sh[2], sh[3]);
    for (size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<T>(v[i]);
    return out;
  }
};

// Geometry of a cross-correlation y[n,o,p] = sum_{c,k} W[o,c,k] x[n,c,s*p+k-pad].
// The same geometry describes all three members of the conv family
// (forward, input-gradient, weight-gradient), which keeps their mutual
// derivatives closed under the family.
struct ConvGeom {
  int cin = 0, cout = 0;
  int kh = 0, kw = 0;
  int sh = 1, sw = 1;
  int ph = 0, pw = 0;
  int hin = 0, win = 0;
  int hout = 0, wout = 0;
};

inline ConvGeom make_conv_geom(int cin, int cout, int hin, int win, int k, int stride, int pad) {
  ConvGeom g;
  g.cin = cin;
  g.cout = cout;
  g.kh = g.kw = k;
  g.sh = g.sw = stride;
  g.ph = g.pw = pad;
  g.hin = hin;
  g.win = win;
  if ((hin + 2 * pad - k) % stride != 0 || (win + 2 * pad - k) % stride != 0)
    throw std::invalid_argument("conv geometry: input size not compatible with kernel/stride/pad");
  g.hout = (hin + 2 * pad - k) / stride + 1;
  g.wout = (win + 2 * pad - k) / stride + 1;
  if (g.hout <= 0 || g.wout <= 0) throw std::invalid_argument("conv geometry: empty output");
  return g;
}

// geometry for a transposed convolution layer mapping hin->hin*stride
// (expressed as the input-gradient of a conv whose input is the layer output)
inline ConvGeom make_upconv_geom(int cin_layer, int cout_layer, int hin, int win, int k, int stride, int pad) {
  // conv side: input = layer output, output = layer input
  return make_conv_geom(cout_layer, cin_layer, hin * stride, win * stride, k, stride, pad);
}

namespace detail {

template <class Fn>
void parallel_batch(int n, Fn&& fn) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int i = 0; i < n; ++i) fn(i);
}

inline int im2col_chunk_cols(int ckk, int op) {
  int chunk = std::max(64, static_cast<int>(524288 / std::max(ckk, 1)));
  return std::min(chunk, op);
}

// columns for output positions [p0, p0+len) of sample x_n
template <class S>
void im2col_chunk(const S* xn, const ConvGeom& g, int p0, int len, S* cols) {
  const int ckk = g.cin * g.kh * g.kw;
  for (int c = 0; c < g.cin; ++c) {
    const S* xc = xn + static_cast<size_t>(c) * g.hin * g.win;
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx) {
        const int row = (c * g.kh + ky) * g.kw + kx;
        S* dst = cols + static_cast<size_t>(row) * len;
        for (int j = 0; j < len; ++j) {
          const int p = p0 + j;
          const int oy = p / g.wout, ox = p % g.wout;
          const int iy = oy * g.sh + ky - g.ph;
          const int ix = ox * g.sw + kx - g.pw;
          dst[j] = (iy >= 0 && iy < g.hin && ix >= 0 && ix < g.win) ? xc[static_cast<size_t>(iy) * g.win + ix]
                                                                    : S(0);
        }
      }
    }
  }
  (void)ckk;
}

template <class S>
void col2im_add_chunk(const S* cols, const ConvGeom& g, int p0, int len, S* xn) {
  for (int c = 0; c < g.cin; ++c) {
    S* xc = xn + static_cast<size_t>(c) * g.hin * g.win;
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx) {
        const int row = (c * g.kh + ky) * g.kw + kx;
        const S* src = cols + static_cast<size_t>(row) * len;
        for (int j = 0; j < len; ++j) {
          const int p = p0 + j;
          const int oy = p / g.wout, ox = p % g.wout;
          const int iy = oy * g.sh + ky - g.ph;
          const int ix = ox * g.sw + kx - g.pw;
          if (iy >= 0 && iy < g.hin && ix >= 0 && ix < g.win) xc[static_cast<size_t>(iy) * g.win + ix] += src[j];
        }
      }
    }
  }
}

template <class S>
using RowMajorMap = Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class S>
using ConstRowMajorMap = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace detail

// y[n,o,p] = sum_{c,kh,kw} W[o,c,kh,kw] * x[n,c,sh*oy+kh-ph, sw*ox+kw-pw]
template <class S>
Tensor<S> conv_fwd_kernel(const Tensor<S>& x, const Tensor<S>& w, const ConvGeom& g) {
  assert(x.c() == g.cin && x.h() == g.hin && x.w() == g.win);
  assert(w.n() == g.cout && w.c() == g.cin && w.h() == g.kh && w.w() == g.kw);
  const int ckk = g.cin * g.kh * g.kw;
  const int op = g.hout * g.wout;
  Tensor<S> y(x.n(), g.cout, g.hout, g.wout);
  const int chunk = detail::im2col_chunk_cols(ckk, op);

  detail::parallel_batch(x.n(), [&](int n) {
    std::vector<S> cols(static_cast<size_t>(ckk) * chunk);
    const S* xn = x.data() + static_cast<size_t>(n) * g.cin * g.hin * g.win;
    S* yn = y.data() + static_cast<size_t>(n) * g.cout * op;
    detail::ConstRowMajorMap<S> wm(w.data(), g.cout, ckk);
    for (int p0 = 0; p0 < op; p0 += chunk) {
      const int len = std::min(chunk, op - p0);
      detail::im2col_chunk(xn, g, p0, len, cols.data());
      detail::ConstRowMajorMap<S> cm(cols.data(), ckk, len);
      Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>, 0,
                 Eigen::OuterStride<>>
          ym(yn + p0, g.cout, len, Eigen::OuterStride<>(op));
      ym.noalias() = wm * cm;
    }
  });
  return y;
}

// gx[n,c,q] = sum_{o,k: s*p+k-pad=q} gy[n,o,p] * W[o,c,k]
template <class S>
Tensor<S> conv_bwd_input_kernel(const Tensor<S>& gy, const Tensor<S>& w, const ConvGeom& g) {
  assert(gy.c() == g.cout && gy.h() == g.hout && gy.w() == g.wout);
  const int ckk = g.cin * g.kh * g.kw;
  const int op = g.hout * g.wout;
  Tensor<S> gx(gy.n(), g.cin, g.hin, g.win);
  const int chunk = detail::im2col_chunk_cols(ckk, op);

  detail::parallel_batch(gy.n(), [&](int n) {
    std::vector<S> cols(static_cast<size_t>(ckk) * chunk);
    const S* gn = gy.data() + static_cast<size_t>(n) * g.cout * op;
    S* xn = gx.data() + static_cast<size_t>(n) * g.cin * g.hin * g.win;
    detail::ConstRowMajorMap<S> wm(w.data(), g.cout, ckk);
    for (int p0 = 0; p0 < op; p0 += chunk) {
      const int len = std::min(chunk, op - p0);
      Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>, 0,
                 Eigen::OuterStride<>>
          gm(gn + p0, g.cout, len, Eigen::OuterStride<>(op));
      detail::RowMajorMap<S> cm(cols.data(), ckk, len);
      cm.noalias() = wm.transpose() * gm;
      detail::col2im_add_chunk(cols.data(), g, p0, len, xn);
    }
  });
  return gx;
}

// gW[o,c,k] = sum_{n,p} gy[n,o,p] * x[n,c,s*p+k-pad]
template <class S>
Tensor<S> conv_bwd_weight_kernel(const Tensor<S>& x, const Tensor<S>& gy, const ConvGeom& g) {
  assert(x.c() == g.cin && x.h() == g.hin && x.w() == g.win);
  assert(gy.c() == g.cout && gy.h() == g.hout && gy.w() == g.wout);
  const int ckk = g.cin * g.kh * g.kw;
  const int op = g.hout * g.wout;
  const int nb = x.n();
  const int chunk = detail::im2col_chunk_cols(ckk, op);

  std::vector<Tensor<S>> partial(nb);
  detail::parallel_batch(nb, [&](int n) {
    Tensor<S> acc(g.cout, g.cin, g.kh, g.kw);
    std::vector<S> cols(static_cast<size_t>(ckk) * chunk);
    const S* xn = x.data() + static_cast<size_t>(n) * g.cin * g.hin * g.win;
    const S* gn = gy.data() + static_cast<size_t>(n) * g.cout * op;
    detail::RowMajorMap<S> am(acc.data(), g.cout, ckk);
    for (int p0 = 0; p0 < op; p0 += chunk) {
      const int len = std::min(chunk, op - p0);
      detail::im2col_chunk(xn, g, p0, len, cols.data());
      detail::ConstRowMajorMap<S> cm(cols.data(), ckk, len);
      Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>, 0,
                 Eigen::OuterStride<>>
          gm(gn + p0, g.cout, len, Eigen::OuterStride<>(op));
      am.noalias() += gm * cm.transpose();
    }
    partial[n] = std::move(acc);
  });

  Tensor<S> gw(g.cout, g.cin, g.kh, g.kw);
  for (int n = 0; n < nb; ++n)  // fixed order for reproducibility
    for (size_t i = 0; i < gw.size(); ++i) gw.v[i] += partial[n].v[i];
  return gw;
}

}  // namespace deltamap::ad
