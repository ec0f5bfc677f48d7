#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "core/errors.hpp"
#include "core/tensor.hpp"

namespace pipofan::nn {

template <class T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapM = Eigen::Map<MatRM<T>>;
template <class T>
using CMapM = Eigen::Map<const MatRM<T>>;

// ---------------------------------------------------------------------------
// Shape-preserving convolution, stride 1, pad = (k-1)/2. Odd k only.
// Lowered to GEMM: col is (C*k*k, H*W), weight is (Cout, C*k*k).
// ---------------------------------------------------------------------------

template <class T>
void im2col(const T* x, int64_t C, int64_t H, int64_t W, int k, T* col) {
  int pad = (k - 1) / 2;
  for (int64_t c = 0; c < C; ++c) {
    const T* xc = x + c * H * W;
    for (int kr = 0; kr < k; ++kr) {
      for (int kc = 0; kc < k; ++kc) {
        T* row = col + ((c * k + kr) * k + kc) * H * W;
        int64_t lo = std::max<int64_t>(0, pad - kc);
        int64_t hi = std::min<int64_t>(W, W + pad - kc);
        for (int64_t oy = 0; oy < H; ++oy) {
          int64_t iy = oy + kr - pad;
          T* dst = row + oy * W;
          if (iy < 0 || iy >= H) {
            std::fill(dst, dst + W, T(0));
            continue;
          }
          const T* src = xc + iy * W + (lo + kc - pad);
          if (lo > 0) std::fill(dst, dst + lo, T(0));
          std::copy(src, src + (hi - lo), dst + lo);
          if (hi < W) std::fill(dst + hi, dst + W, T(0));
        }
      }
    }
  }
}

template <class T>
void col2im_add(const T* col, int64_t C, int64_t H, int64_t W, int k, T* x) {
  int pad = (k - 1) / 2;
  for (int64_t c = 0; c < C; ++c) {
    T* xc = x + c * H * W;
    for (int kr = 0; kr < k; ++kr) {
      for (int kc = 0; kc < k; ++kc) {
        const T* row = col + ((c * k + kr) * k + kc) * H * W;
        int64_t lo = std::max<int64_t>(0, pad - kc);
        int64_t hi = std::min<int64_t>(W, W + pad - kc);
        for (int64_t oy = 0; oy < H; ++oy) {
          int64_t iy = oy + kr - pad;
          if (iy < 0 || iy >= H) continue;
          const T* src = row + oy * W;
          T* dst = xc + iy * W + (lo + kc - pad);
          for (int64_t i = 0; i < hi - lo; ++i) dst[i] += src[lo + i];
        }
      }
    }
  }
}

// y (N,Cout,H,W) = conv(x (N,Cin,H,W), w (Cout,Cin,k,k)) + b. col is scratch
// resized here; pass the same buffer across calls to reuse its capacity.
template <class T>
void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>* b,
                    Tensor<T>& y, std::vector<T>& col) {
  int64_t N = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
  int64_t Cout = w.size(0);
  int k = static_cast<int>(w.size(2));
  y.resize({N, Cout, H, W});
  int64_t hw = H * W, ckk = C * k * k;
  CMapM<T> wm(w.data(), Cout, ckk);
  if (k == 1) {
    for (int64_t n = 0; n < N; ++n) {
      CMapM<T> xm(x.data() + n * C * hw, C, hw);
      MapM<T> ym(y.data() + n * Cout * hw, Cout, hw);
      ym.noalias() = wm * xm;
    }
  } else {
    col.resize(static_cast<size_t>(ckk * hw));
    for (int64_t n = 0; n < N; ++n) {
      im2col(x.data() + n * C * hw, C, H, W, k, col.data());
      CMapM<T> cm(col.data(), ckk, hw);
      MapM<T> ym(y.data() + n * Cout * hw, Cout, hw);
      ym.noalias() = wm * cm;
    }
  }
  if (b) {
    for (int64_t n = 0; n < N; ++n)
      for (int64_t c = 0; c < Cout; ++c) {
        T* yp = y.data() + (n * Cout + c) * hw;
        T bv = (*b)[c];
        for (int64_t i = 0; i < hw; ++i) yp[i] += bv;
      }
  }
}

// Accumulates into dw/db/dx. Any of them may be null.
template <class T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& dy,
                     Tensor<T>* dx, Tensor<T>* dw, Tensor<T>* db, std::vector<T>& col) {
  int64_t N = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
  int64_t Cout = w.size(0);
  int k = static_cast<int>(w.size(2));
  int64_t hw = H * W, ckk = C * k * k;
  CMapM<T> wm(w.data(), Cout, ckk);
  if (k != 1) col.resize(static_cast<size_t>(ckk * hw));
  std::vector<T> dcol;
  if (dx && k != 1) dcol.resize(static_cast<size_t>(ckk * hw));
  for (int64_t n = 0; n < N; ++n) {
    CMapM<T> dym(dy.data() + n * Cout * hw, Cout, hw);
    if (dw) {
      MapM<T> dwm(dw->data(), Cout, ckk);
      if (k == 1) {
        CMapM<T> xm(x.data() + n * C * hw, C, hw);
        dwm.noalias() += dym * xm.transpose();
      } else {
        im2col(x.data() + n * C * hw, C, H, W, k, col.data());
        CMapM<T> cm(col.data(), ckk, hw);
        dwm.noalias() += dym * cm.transpose();
      }
    }
    if (dx) {
      if (k == 1) {
        MapM<T> dxm(dx->data() + n * C * hw, C, hw);
        dxm.noalias() += wm.transpose() * dym;
      } else {
        MapM<T> dcm(dcol.data(), ckk, hw);
        dcm.noalias() = wm.transpose() * dym;
        col2im_add(dcol.data(), C, H, W, k, dx->data() + n * C * hw);
      }
    }
  }
  if (db) {
    for (int64_t n = 0; n < N; ++n)
      for (int64_t c = 0; c < Cout; ++c) {
        const T* dyp = dy.data() + (n * Cout + c) * hw;
        T s = 0;
        for (int64_t i = 0; i < hw; ++i) s += dyp[i];
        (*db)[c] += s;
      }
  }
}

// ---------------------------------------------------------------------------
// Batch normalization over (N,H,W) per channel. Biased variance both for the
// normalization and for the running estimate it feeds, so train and eval see
// the same statistic. eps 1e-5, momentum 0.1.
// ---------------------------------------------------------------------------

struct BnDefaults {
  static constexpr double eps = 1e-5;
  static constexpr double momentum = 0.1;
};

// Caches mean/invstd per channel for the backward pass.
template <class T>
void batchnorm_forward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                       Tensor<T>& run_mean, Tensor<T>& run_var, Tensor<T>& y, bool training,
                       std::vector<T>& mean_cache, std::vector<T>& invstd_cache) {
  int64_t N = x.size(0), C = x.size(1), hw = x.size(2) * x.size(3);
  y.resize(x.shape());
  mean_cache.assign(static_cast<size_t>(C), T(0));
  invstd_cache.assign(static_cast<size_t>(C), T(0));
  int64_t cnt = N * hw;
  for (int64_t c = 0; c < C; ++c) {
    T mean, invstd;
    if (training) {
      double s = 0, s2 = 0;
      for (int64_t n = 0; n < N; ++n) {
        const T* xp = x.data() + (n * C + c) * hw;
        for (int64_t i = 0; i < hw; ++i) {
          s += xp[i];
          s2 += static_cast<double>(xp[i]) * xp[i];
        }
      }
      double m = s / cnt;
      double var = std::max(0.0, s2 / cnt - m * m);
      run_mean[c] = static_cast<T>((1.0 - BnDefaults::momentum) * run_mean[c] + BnDefaults::momentum * m);
      run_var[c] = static_cast<T>((1.0 - BnDefaults::momentum) * run_var[c] + BnDefaults::momentum * var);
      mean = static_cast<T>(m);
      invstd = static_cast<T>(1.0 / std::sqrt(var + BnDefaults::eps));
    } else {
      mean = run_mean[c];
      invstd = static_cast<T>(1.0 / std::sqrt(static_cast<double>(run_var[c]) + BnDefaults::eps));
    }
    mean_cache[static_cast<size_t>(c)] = mean;
    invstd_cache[static_cast<size_t>(c)] = invstd;
    T g = gamma[c], bt = beta[c];
    for (int64_t n = 0; n < N; ++n) {
      const T* xp = x.data() + (n * C + c) * hw;
      T* yp = y.data() + (n * C + c) * hw;
      for (int64_t i = 0; i < hw; ++i) yp[i] = (xp[i] - mean) * invstd * g + bt;
    }
  }
}

template <class T>
void batchnorm_backward(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& dy,
                        const std::vector<T>& mean_cache, const std::vector<T>& invstd_cache,
                        bool training, Tensor<T>* dx, Tensor<T>* dgamma, Tensor<T>* dbeta) {
  int64_t N = x.size(0), C = x.size(1), hw = x.size(2) * x.size(3);
  int64_t cnt = N * hw;
  for (int64_t c = 0; c < C; ++c) {
    T mean = mean_cache[static_cast<size_t>(c)], invstd = invstd_cache[static_cast<size_t>(c)];
    double sum_dy = 0, sum_dy_xhat = 0;
    for (int64_t n = 0; n < N; ++n) {
      const T* xp = x.data() + (n * C + c) * hw;
      const T* dyp = dy.data() + (n * C + c) * hw;
      for (int64_t i = 0; i < hw; ++i) {
        sum_dy += dyp[i];
        sum_dy_xhat += static_cast<double>(dyp[i]) * ((xp[i] - mean) * invstd);
      }
    }
    if (dgamma) (*dgamma)[c] += static_cast<T>(sum_dy_xhat);
    if (dbeta) (*dbeta)[c] += static_cast<T>(sum_dy);
    if (!dx) continue;
    T g = gamma[c];
    if (training) {
      T a = static_cast<T>(sum_dy / cnt), b = static_cast<T>(sum_dy_xhat / cnt);
      for (int64_t n = 0; n < N; ++n) {
        const T* xp = x.data() + (n * C + c) * hw;
        const T* dyp = dy.data() + (n * C + c) * hw;
        T* dxp = dx->data() + (n * C + c) * hw;
        for (int64_t i = 0; i < hw; ++i) {
          T xhat = (xp[i] - mean) * invstd;
          dxp[i] += g * invstd * (dyp[i] - a - xhat * b);
        }
      }
    } else {
      for (int64_t n = 0; n < N; ++n) {
        const T* dyp = dy.data() + (n * C + c) * hw;
        T* dxp = dx->data() + (n * C + c) * hw;
        for (int64_t i = 0; i < hw; ++i) dxp[i] += g * invstd * dyp[i];
      }
    }
  }
}

// ---------------------------------------------------------------------------

template <class T>
void relu_forward(const Tensor<T>& x, Tensor<T>& y) {
  y.resize(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <class T>
void relu_backward(const Tensor<T>& y, const Tensor<T>& dy, Tensor<T>& dx) {
  for (int64_t i = 0; i < y.numel(); ++i)
    if (y[i] > T(0)) dx[i] += dy[i];
}

// 2x2 average pooling, stride 2. Extents must be even; callers guarantee this
// via the pyramid divisibility checks.
template <class T>
void avgpool2_forward(const Tensor<T>& x, Tensor<T>& y) {
  int64_t N = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
  if (H % 2 || W % 2)
    throw InvalidArgumentError("avgpool2: odd extent " + shape_string(x.shape()));
  y.resize({N, C, H / 2, W / 2});
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const T* xp = x.data() + nc * H * W;
    T* yp = y.data() + nc * (H / 2) * (W / 2);
    for (int64_t oy = 0; oy < H / 2; ++oy)
      for (int64_t ox = 0; ox < W / 2; ++ox) {
        const T* p = xp + 2 * oy * W + 2 * ox;
        yp[oy * (W / 2) + ox] = static_cast<T>(0.25) * (p[0] + p[1] + p[W] + p[W + 1]);
      }
  }
}

template <class T>
void avgpool2_backward(const Tensor<T>& dy, Tensor<T>& dx) {
  int64_t N = dx.size(0), C = dx.size(1), H = dx.size(2), W = dx.size(3);
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const T* dyp = dy.data() + nc * (H / 2) * (W / 2);
    T* dxp = dx.data() + nc * H * W;
    for (int64_t oy = 0; oy < H / 2; ++oy)
      for (int64_t ox = 0; ox < W / 2; ++ox) {
        T g = static_cast<T>(0.25) * dyp[oy * (W / 2) + ox];
        T* p = dxp + 2 * oy * W + 2 * ox;
        p[0] += g;
        p[1] += g;
        p[W] += g;
        p[W + 1] += g;
      }
  }
}

// ---------------------------------------------------------------------------
// Bilinear resize with half-pixel centers and clamped edges; the weights
// depend only on the two extents, so both passes rebuild the same axis plan.
// ---------------------------------------------------------------------------

template <class T>
struct AxisPlan {
  std::vector<int64_t> i0, i1;
  std::vector<T> w0, w1;
};

template <class T>
AxisPlan<T> make_axis_plan(int64_t in, int64_t out) {
  AxisPlan<T> p;
  p.i0.resize(static_cast<size_t>(out));
  p.i1.resize(static_cast<size_t>(out));
  p.w0.resize(static_cast<size_t>(out));
  p.w1.resize(static_cast<size_t>(out));
  double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int64_t o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    src = std::min(std::max(src, 0.0), static_cast<double>(in - 1));
    int64_t i0 = static_cast<int64_t>(std::floor(src));
    i0 = std::min(i0, in - 1);
    int64_t i1 = std::min(i0 + 1, in - 1);
    double w1 = src - static_cast<double>(i0);
    p.i0[static_cast<size_t>(o)] = i0;
    p.i1[static_cast<size_t>(o)] = i1;
    p.w0[static_cast<size_t>(o)] = static_cast<T>(1.0 - w1);
    p.w1[static_cast<size_t>(o)] = static_cast<T>(w1);
  }
  return p;
}

template <class T>
void bilinear_resize_forward(const Tensor<T>& x, int64_t out_h, int64_t out_w, Tensor<T>& y) {
  int64_t N = x.size(0), C = x.size(1), H = x.size(2), W = x.size(3);
  y.resize({N, C, out_h, out_w});
  if (H == out_h && W == out_w) {
    std::copy(x.data(), x.data() + x.numel(), y.data());
    return;
  }
  auto py = make_axis_plan<T>(H, out_h);
  auto px = make_axis_plan<T>(W, out_w);
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const T* xp = x.data() + nc * H * W;
    T* yp = y.data() + nc * out_h * out_w;
    for (int64_t oy = 0; oy < out_h; ++oy) {
      const T* r0 = xp + py.i0[static_cast<size_t>(oy)] * W;
      const T* r1 = xp + py.i1[static_cast<size_t>(oy)] * W;
      T wy0 = py.w0[static_cast<size_t>(oy)], wy1 = py.w1[static_cast<size_t>(oy)];
      for (int64_t ox = 0; ox < out_w; ++ox) {
        int64_t x0 = px.i0[static_cast<size_t>(ox)], x1 = px.i1[static_cast<size_t>(ox)];
        T wx0 = px.w0[static_cast<size_t>(ox)], wx1 = px.w1[static_cast<size_t>(ox)];
        yp[oy * out_w + ox] =
            wy0 * (wx0 * r0[x0] + wx1 * r0[x1]) + wy1 * (wx0 * r1[x0] + wx1 * r1[x1]);
      }
    }
  }
}

template <class T>
void bilinear_resize_backward(const Tensor<T>& dy, Tensor<T>& dx) {
  int64_t N = dx.size(0), C = dx.size(1), H = dx.size(2), W = dx.size(3);
  int64_t out_h = dy.size(2), out_w = dy.size(3);
  if (H == out_h && W == out_w) {
    for (int64_t i = 0; i < dx.numel(); ++i) dx[i] += dy[i];
    return;
  }
  auto py = make_axis_plan<T>(H, out_h);
  auto px = make_axis_plan<T>(W, out_w);
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const T* dyp = dy.data() + nc * out_h * out_w;
    T* dxp = dx.data() + nc * H * W;
    for (int64_t oy = 0; oy < out_h; ++oy) {
      int64_t y0 = py.i0[static_cast<size_t>(oy)], y1 = py.i1[static_cast<size_t>(oy)];
      T wy0 = py.w0[static_cast<size_t>(oy)], wy1 = py.w1[static_cast<size_t>(oy)];
      for (int64_t ox = 0; ox < out_w; ++ox) {
        int64_t x0 = px.i0[static_cast<size_t>(ox)], x1 = px.i1[static_cast<size_t>(ox)];
        T wx0 = px.w0[static_cast<size_t>(ox)], wx1 = px.w1[static_cast<size_t>(ox)];
        T g = dyp[oy * out_w + ox];
        dxp[y0 * W + x0] += wy0 * wx0 * g;
        dxp[y0 * W + x1] += wy0 * wx1 * g;
        dxp[y1 * W + x0] += wy1 * wx0 * g;
        dxp[y1 * W + x1] += wy1 * wx1 * g;
      }
    }
  }
}

// ---------------------------------------------------------------------------

template <class T>
void add_forward(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& y) {
  if (!a.same_shape(b))
    throw InvalidArgumentError("add: shape mismatch " + shape_string(a.shape()) + " vs " +
                               shape_string(b.shape()));
  y.resize(a.shape());
  for (int64_t i = 0; i < a.numel(); ++i) y[i] = a[i] + b[i];
}

template <class T>
void concat_channels_forward(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& y) {
  int64_t N = a.size(0), Ca = a.size(1), Cb = b.size(1), H = a.size(2), W = a.size(3);
  if (b.size(0) != N || b.size(2) != H || b.size(3) != W)
    throw InvalidArgumentError("concat: spatial mismatch " + shape_string(a.shape()) + " vs " +
                               shape_string(b.shape()));
  y.resize({N, Ca + Cb, H, W});
  int64_t hw = H * W;
  for (int64_t n = 0; n < N; ++n) {
    std::copy(a.data() + n * Ca * hw, a.data() + (n + 1) * Ca * hw,
              y.data() + n * (Ca + Cb) * hw);
    std::copy(b.data() + n * Cb * hw, b.data() + (n + 1) * Cb * hw,
              y.data() + n * (Ca + Cb) * hw + Ca * hw);
  }
}

template <class T>
void concat_channels_backward(const Tensor<T>& dy, Tensor<T>& da, Tensor<T>& db) {
  int64_t N = da.size(0), Ca = da.size(1), Cb = db.size(1);
  int64_t hw = da.size(2) * da.size(3);
  for (int64_t n = 0; n < N; ++n) {
    const T* src = dy.data() + n * (Ca + Cb) * hw;
    T* pa = da.data() + n * Ca * hw;
    T* pb = db.data() + n * Cb * hw;
    for (int64_t i = 0; i < Ca * hw; ++i) pa[i] += src[i];
    for (int64_t i = 0; i < Cb * hw; ++i) pb[i] += src[Ca * hw + i];
  }
}

// Per-map global average and max over (H,W). argmax records the first maximum
// in scan order so the subgradient choice is deterministic.
template <class T>
void global_avg_pool(const Tensor<T>& x, Tensor<T>& y) {
  int64_t N = x.size(0), C = x.size(1), hw = x.size(2) * x.size(3);
  y.resize({N, C});
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const T* xp = x.data() + nc * hw;
    double s = 0;
    for (int64_t i = 0; i < hw; ++i) s += xp[i];
    y[nc] = static_cast<T>(s / static_cast<double>(hw));
  }
}

template <class T>
void global_max_pool(const Tensor<T>& x, Tensor<T>& y, std::vector<int64_t>& argmax) {
  int64_t N = x.size(0), C = x.size(1), hw = x.size(2) * x.size(3);
  y.resize({N, C});
  argmax.assign(static_cast<size_t>(N * C), 0);
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const T* xp = x.data() + nc * hw;
    T best = xp[0];
    int64_t bi = 0;
    for (int64_t i = 1; i < hw; ++i)
      if (xp[i] > best) {
        best = xp[i];
        bi = i;
      }
    y[nc] = best;
    argmax[static_cast<size_t>(nc)] = bi;
  }
}

// Channel softmax for (N,C,H,W) score maps, stabilized by max subtraction.
template <class T>
void softmax_channels(const Tensor<T>& z, Tensor<T>& p) {
  int64_t N = z.size(0), C = z.size(1), hw = z.size(2) * z.size(3);
  p.resize(z.shape());
  for (int64_t n = 0; n < N; ++n) {
    const T* zp = z.data() + n * C * hw;
    T* pp = p.data() + n * C * hw;
    for (int64_t i = 0; i < hw; ++i) {
      T m = zp[i];
      for (int64_t c = 1; c < C; ++c) m = std::max(m, zp[c * hw + i]);
      double sum = 0;
      for (int64_t c = 0; c < C; ++c) {
        double e = std::exp(static_cast<double>(zp[c * hw + i] - m));
        pp[c * hw + i] = static_cast<T>(e);
        sum += e;
      }
      T inv = static_cast<T>(1.0 / sum);
      for (int64_t c = 0; c < C; ++c) pp[c * hw + i] *= inv;
    }
  }
}

}  // namespace pipofan::nn
