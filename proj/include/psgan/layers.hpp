#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "psgan/rng.hpp"
#include "psgan/tensor.hpp"

namespace psgan {

// Feature maps are (N, C, H, W) row-major. All strided layers use stride 2;
// padding is (kernel-1)/2 so sizes halve/double exactly (transposed layers
// add output-padding 1).

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline int64_t floordiv(int64_t a, int64_t b) {
  int64_t q = a / b, r = a % b;
  return (r != 0 && ((r < 0) != (b < 0))) ? q - 1 : q;
}

inline int64_t floormod(int64_t a, int64_t b) {
  int64_t m = a % b;
  return m < 0 ? m + b : m;
}

// Dot product with an accumulation order that depends only on n — never on
// pointer alignment — so ranged rendering is bitwise reproducible.
template <typename T>
T fixed_dot(const T* a, const T* b, int n) {
  constexpr int kLanes = 16;
  T lanes[kLanes] = {};
  int i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (int j = 0; j < kLanes; ++j) lanes[j] += a[i + j] * b[i + j];
  for (int half = kLanes / 2; half > 0; half /= 2)
    for (int j = 0; j < half; ++j) lanes[j] += lanes[j + half];
  T s = lanes[0];
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

// ---------------------------------------------------------------------------
// Strided convolution (discriminator side).
// ---------------------------------------------------------------------------
template <typename T>
struct Conv2d {
  int c_in = 0, c_out = 0, kernel = 5, stride = 2, pad = 2;
  Tensor<T> weight;  // (c_out, c_in, k, k)
  Tensor<T> bias;    // (c_out)
  Tensor<T> gweight, gbias;
  Tensor<T> cached_input;

  Conv2d() = default;
  Conv2d(int ci, int co, int k)
      : c_in(ci), c_out(co), kernel(k), pad((k - 1) / 2),
        weight({co, ci, k, k}), bias({co}),
        gweight({co, ci, k, k}), gbias({co}) {}

  int64_t out_size(int64_t in) const { return (in + 2 * pad - kernel) / stride + 1; }

  void init(Rng& rng) {
    for (int64_t i = 0; i < weight.numel(); ++i)
      weight[i] = static_cast<T>(rng.normal(0, 0.02));
    bias.zero();
  }

  void zero_grad() {
    gweight.zero();
    gbias.zero();
  }

  // col[(ci*k+ky)*k+kx, oy*W'+ox] = x(ci, oy*s+ky-p, ox*s+kx-p), zero outside.
  void im2col(const T* x, int64_t h, int64_t w, Tensor<T>& col) const {
    const int64_t ho = out_size(h), wo = out_size(w);
    T* dst = col.data();
    for (int ci = 0; ci < c_in; ++ci) {
      const T* plane = x + static_cast<int64_t>(ci) * h * w;
      for (int ky = 0; ky < kernel; ++ky) {
        for (int kx = 0; kx < kernel; ++kx) {
          for (int64_t oy = 0; oy < ho; ++oy) {
            const int64_t iy = oy * stride + ky - pad;
            for (int64_t ox = 0; ox < wo; ++ox) {
              const int64_t ix = ox * stride + kx - pad;
              *dst++ = (iy >= 0 && iy < h && ix >= 0 && ix < w) ? plane[iy * w + ix] : T(0);
            }
          }
        }
      }
    }
  }

  void col2im_add(const Tensor<T>& col, int64_t h, int64_t w, T* x) const {
    const int64_t ho = out_size(h), wo = out_size(w);
    const T* src = col.data();
    for (int ci = 0; ci < c_in; ++ci) {
      T* plane = x + static_cast<int64_t>(ci) * h * w;
      for (int ky = 0; ky < kernel; ++ky) {
        for (int kx = 0; kx < kernel; ++kx) {
          for (int64_t oy = 0; oy < ho; ++oy) {
            const int64_t iy = oy * stride + ky - pad;
            for (int64_t ox = 0; ox < wo; ++ox) {
              const int64_t ix = ox * stride + kx - pad;
              if (iy >= 0 && iy < h && ix >= 0 && ix < w) plane[iy * w + ix] += *src;
              ++src;
            }
          }
        }
      }
    }
  }

  Tensor<T> forward(const Tensor<T>& x, bool keep_for_backward = true) {
    const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (x.dim(1) != c_in) throw std::invalid_argument("Conv2d: channel mismatch");
    const int64_t ho = out_size(h), wo = out_size(w);
    Tensor<T> y({n, c_out, ho, wo});
    Tensor<T> col({static_cast<int64_t>(c_in) * kernel * kernel, ho * wo});
    ConstMatMap<T> wm(weight.data(), c_out, static_cast<int64_t>(c_in) * kernel * kernel);
    for (int64_t s = 0; s < n; ++s) {
      im2col(x.data() + s * c_in * h * w, h, w, col);
      ConstMatMap<T> cm(col.data(), col.dim(0), col.dim(1));
      MatMap<T> ym(y.data() + s * c_out * ho * wo, c_out, ho * wo);
      ym.noalias() = wm * cm;
      for (int co = 0; co < c_out; ++co) ym.row(co).array() += bias[co];
    }
    if (keep_for_backward) cached_input = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const Tensor<T>& x = cached_input;
    const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int64_t ho = out_size(h), wo = out_size(w);
    Tensor<T> dx(x.shape());
    Tensor<T> col({static_cast<int64_t>(c_in) * kernel * kernel, ho * wo});
    Tensor<T> dcol(col.shape());
    ConstMatMap<T> wm(weight.data(), c_out, col.dim(0));
    MatMap<T> gwm(gweight.data(), c_out, col.dim(0));
    for (int64_t s = 0; s < n; ++s) {
      ConstMatMap<T> dym(dy.data() + s * c_out * ho * wo, c_out, ho * wo);
      im2col(x.data() + s * c_in * h * w, h, w, col);
      ConstMatMap<T> cm(col.data(), col.dim(0), col.dim(1));
      gwm.noalias() += dym * cm.transpose();
      for (int co = 0; co < c_out; ++co) gbias[co] += dym.row(co).sum();
      MatMap<T> dcm(dcol.data(), dcol.dim(0), dcol.dim(1));
      dcm.noalias() = wm.transpose() * dym;
      col2im_add(dcol, h, w, dx.data() + s * c_in * h * w);
    }
    return dx;
  }
};

// ---------------------------------------------------------------------------
// Transposed convolution, stride 2, output-padding 1 (generator side).
// Output spatial size is exactly 2x the input.
// ---------------------------------------------------------------------------
template <typename T>
struct ConvTranspose2d {
  int c_in = 0, c_out = 0, kernel = 5, stride = 2, pad = 2, outpad = 1;
  Tensor<T> weight;  // (c_in, c_out, k, k)
  Tensor<T> bias;    // (c_out)
  Tensor<T> gweight, gbias;
  Tensor<T> cached_input;

  ConvTranspose2d() = default;
  ConvTranspose2d(int ci, int co, int k)
      : c_in(ci), c_out(co), kernel(k), pad((k - 1) / 2),
        weight({ci, co, k, k}), bias({co}),
        gweight({ci, co, k, k}), gbias({co}) {}

  int64_t out_size(int64_t in) const {
    return (in - 1) * stride - 2 * pad + kernel + outpad;
  }

  void init(Rng& rng) {
    for (int64_t i = 0; i < weight.numel(); ++i)
      weight[i] = static_cast<T>(rng.normal(0, 0.02));
    bias.zero();
  }

  void zero_grad() {
    gweight.zero();
    gbias.zero();
  }

  // Scatter col[(co*k+ky)*k+kx, iy*W+ix] into y(co, iy*s+ky-p, ix*s+kx-p).
  void scatter(const Tensor<T>& col, int64_t h, int64_t w, T* y) const {
    const int64_t ho = out_size(h), wo = out_size(w);
    const T* src = col.data();
    for (int co = 0; co < c_out; ++co) {
      T* plane = y + static_cast<int64_t>(co) * ho * wo;
      for (int ky = 0; ky < kernel; ++ky) {
        for (int kx = 0; kx < kernel; ++kx) {
          for (int64_t iy = 0; iy < h; ++iy) {
            const int64_t oy = iy * stride + ky - pad;
            for (int64_t ix = 0; ix < w; ++ix) {
              const int64_t ox = ix * stride + kx - pad;
              if (oy >= 0 && oy < ho && ox >= 0 && ox < wo) plane[oy * wo + ox] += *src;
              ++src;
            }
          }
        }
      }
    }
  }

  // Adjoint of scatter: gather dy into col layout.
  void gather(const T* dy, int64_t h, int64_t w, Tensor<T>& col) const {
    const int64_t ho = out_size(h), wo = out_size(w);
    T* dst = col.data();
    for (int co = 0; co < c_out; ++co) {
      const T* plane = dy + static_cast<int64_t>(co) * ho * wo;
      for (int ky = 0; ky < kernel; ++ky) {
        for (int kx = 0; kx < kernel; ++kx) {
          for (int64_t iy = 0; iy < h; ++iy) {
            const int64_t oy = iy * stride + ky - pad;
            for (int64_t ix = 0; ix < w; ++ix) {
              const int64_t ox = ix * stride + kx - pad;
              *dst++ = (oy >= 0 && oy < ho && ox >= 0 && ox < wo) ? plane[oy * wo + ox] : T(0);
            }
          }
        }
      }
    }
  }

  Tensor<T> forward(const Tensor<T>& x, bool keep_for_backward = true) {
    const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (x.dim(1) != c_in) throw std::invalid_argument("ConvTranspose2d: channel mismatch");
    const int64_t ho = out_size(h), wo = out_size(w);
    Tensor<T> y({n, c_out, ho, wo});
    Tensor<T> col({static_cast<int64_t>(c_out) * kernel * kernel, h * w});
    ConstMatMap<T> wm(weight.data(), c_in, static_cast<int64_t>(c_out) * kernel * kernel);
    for (int64_t s = 0; s < n; ++s) {
      ConstMatMap<T> xm(x.data() + s * c_in * h * w, c_in, h * w);
      MatMap<T> cm(col.data(), col.dim(0), col.dim(1));
      cm.noalias() = wm.transpose() * xm;
      T* yp = y.data() + s * c_out * ho * wo;
      scatter(col, h, w, yp);
      for (int co = 0; co < c_out; ++co) {
        T* plane = yp + static_cast<int64_t>(co) * ho * wo;
        for (int64_t i = 0; i < ho * wo; ++i) plane[i] += bias[co];
      }
    }
    if (keep_for_backward) cached_input = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const Tensor<T>& x = cached_input;
    const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const int64_t ho = out_size(h), wo = out_size(w);
    Tensor<T> dx(x.shape());
    Tensor<T> dcol({static_cast<int64_t>(c_out) * kernel * kernel, h * w});
    ConstMatMap<T> wm(weight.data(), c_in, dcol.dim(0));
    MatMap<T> gwm(gweight.data(), c_in, dcol.dim(0));
    for (int64_t s = 0; s < n; ++s) {
      gather(dy.data() + s * c_out * ho * wo, h, w, dcol);
      ConstMatMap<T> dcm(dcol.data(), dcol.dim(0), dcol.dim(1));
      ConstMatMap<T> xm(x.data() + s * c_in * h * w, c_in, h * w);
      MatMap<T> dxm(dx.data() + s * c_in * h * w, c_in, h * w);
      dxm.noalias() = wm * dcm;
      gwm.noalias() += xm * dcm.transpose();
      const T* dyp = dy.data() + s * c_out * ho * wo;
      for (int co = 0; co < c_out; ++co) {
        const T* plane = dyp + static_cast<int64_t>(co) * ho * wo;
        T acc = 0;
        for (int64_t i = 0; i < ho * wo; ++i) acc += plane[i];
        gbias[co] += acc;
      }
    }
    return dx;
  }
};

// Input interval [lo, hi) needed to produce output rows [a, b) of one
// transposed layer (o = stride*i + kappa - pad, kappa in [0, kernel)).
struct Interval {
  int64_t lo = 0, hi = 0;  // half-open
  int64_t extent() const { return hi - lo; }
};

inline Interval convt_preimage(int64_t a, int64_t b, int kernel, int stride, int pad) {
  Interval iv;
  iv.lo = floordiv(a + pad - kernel + 1 + (stride - 1), stride);
  iv.hi = floordiv(b - 1 + pad, stride) + 1;
  return iv;
}

// ---------------------------------------------------------------------------
// Batch normalization over (N, H, W) per channel.
// ---------------------------------------------------------------------------
template <typename T>
struct BatchNorm2d {
  int channels = 0;
  T eps = static_cast<T>(1e-5);
  T momentum = static_cast<T>(0.1);
  Tensor<T> gamma, beta;
  Tensor<T> running_mean, running_var;
  Tensor<T> ggamma, gbeta;
  Tensor<T> cached_xhat, cached_inv_std;

  BatchNorm2d() = default;
  explicit BatchNorm2d(int c)
      : channels(c), gamma({c}), beta({c}), running_mean({c}), running_var({c}),
        ggamma({c}), gbeta({c}) {
    gamma.fill(T(1));
    running_var.fill(T(1));
  }

  void init(Rng& rng) {
    for (int c = 0; c < channels; ++c) gamma[c] = static_cast<T>(rng.normal(1, 0.02));
    beta.zero();
    running_mean.zero();
    running_var.fill(T(1));
  }

  void zero_grad() {
    ggamma.zero();
    gbeta.zero();
  }

  Tensor<T> forward(const Tensor<T>& x, bool training) {
    const int64_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
    if (x.dim(1) != channels) throw std::invalid_argument("BatchNorm2d: channel mismatch");
    Tensor<T> y(x.shape());
    const int64_t plane = h * w, count = n * plane;
    if (training) {
      cached_xhat = Tensor<T>(x.shape());
      cached_inv_std = Tensor<T>({channels});
      for (int c = 0; c < channels; ++c) {
        double mean = 0;
        for (int64_t s = 0; s < n; ++s) {
          const T* p = x.data() + (s * channels + c) * plane;
          for (int64_t i = 0; i < plane; ++i) mean += p[i];
        }
        mean /= static_cast<double>(count);
        double var = 0;
        for (int64_t s = 0; s < n; ++s) {
          const T* p = x.data() + (s * channels + c) * plane;
          for (int64_t i = 0; i < plane; ++i) {
            double d = p[i] - mean;
            var += d * d;
          }
        }
        var /= static_cast<double>(count);  // biased, used for normalization
        const T inv_std = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
        cached_inv_std[c] = inv_std;
        for (int64_t s = 0; s < n; ++s) {
          const T* p = x.data() + (s * channels + c) * plane;
          T* xh = cached_xhat.data() + (s * channels + c) * plane;
          T* yp = y.data() + (s * channels + c) * plane;
          for (int64_t i = 0; i < plane; ++i) {
            xh[i] = static_cast<T>((p[i] - mean) * inv_std);
            yp[i] = gamma[c] * xh[i] + beta[c];
          }
        }
        // running stats track the unbiased variance
        const double unbiased = count > 1 ? var * count / (count - 1) : var;
        running_mean[c] = static_cast<T>((1 - momentum) * running_mean[c] + momentum * mean);
        running_var[c] = static_cast<T>((1 - momentum) * running_var[c] + momentum * unbiased);
      }
    } else {
      for (int c = 0; c < channels; ++c) {
        const T scale = gamma[c] / std::sqrt(running_var[c] + eps);
        const T shift = beta[c] - running_mean[c] * scale;
        for (int64_t s = 0; s < n; ++s) {
          const T* p = x.data() + (s * channels + c) * plane;
          T* yp = y.data() + (s * channels + c) * plane;
          for (int64_t i = 0; i < plane; ++i) yp[i] = p[i] * scale + shift;
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const int64_t n = dy.dim(0), h = dy.dim(2), w = dy.dim(3);
    const int64_t plane = h * w, count = n * plane;
    Tensor<T> dx(dy.shape());
    for (int c = 0; c < channels; ++c) {
      double sum_dy = 0, sum_dy_xhat = 0;
      for (int64_t s = 0; s < n; ++s) {
        const T* dp = dy.data() + (s * channels + c) * plane;
        const T* xh = cached_xhat.data() + (s * channels + c) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          sum_dy += dp[i];
          sum_dy_xhat += static_cast<double>(dp[i]) * xh[i];
        }
      }
      ggamma[c] += static_cast<T>(sum_dy_xhat);
      gbeta[c] += static_cast<T>(sum_dy);
      const double g = gamma[c], inv_std = cached_inv_std[c];
      const double mean_dy = sum_dy / count, mean_dy_xhat = sum_dy_xhat / count;
      for (int64_t s = 0; s < n; ++s) {
        const T* dp = dy.data() + (s * channels + c) * plane;
        const T* xh = cached_xhat.data() + (s * channels + c) * plane;
        T* dxp = dx.data() + (s * channels + c) * plane;
        for (int64_t i = 0; i < plane; ++i)
          dxp[i] = static_cast<T>(g * inv_std * (dp[i] - mean_dy - xh[i] * mean_dy_xhat));
      }
    }
    return dx;
  }
};

// ---------------------------------------------------------------------------
// Pointwise nonlinearities.
// ---------------------------------------------------------------------------
template <typename T>
struct ReLU {
  Tensor<T> cached_input;
  Tensor<T> forward(const Tensor<T>& x, bool keep_for_backward = true) {
    Tensor<T> y(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
    if (keep_for_backward) cached_input = x;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) const {
    Tensor<T> dx(dy.shape());
    for (int64_t i = 0; i < dy.numel(); ++i)
      dx[i] = cached_input[i] > T(0) ? dy[i] : T(0);
    return dx;
  }
};

template <typename T>
struct LeakyReLU {
  T slope = static_cast<T>(0.2);
  Tensor<T> cached_input;
  Tensor<T> forward(const Tensor<T>& x, bool keep_for_backward = true) {
    Tensor<T> y(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) y[i] = x[i] > T(0) ? x[i] : slope * x[i];
    if (keep_for_backward) cached_input = x;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) const {
    Tensor<T> dx(dy.shape());
    for (int64_t i = 0; i < dy.numel(); ++i)
      dx[i] = cached_input[i] > T(0) ? dy[i] : slope * dy[i];
    return dx;
  }
};

template <typename T>
struct Tanh {
  Tensor<T> cached_output;
  Tensor<T> forward(const Tensor<T>& x, bool keep_for_backward = true) {
    Tensor<T> y(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) y[i] = std::tanh(x[i]);
    if (keep_for_backward) cached_output = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) const {
    Tensor<T> dx(dy.shape());
    for (int64_t i = 0; i < dy.numel(); ++i)
      dx[i] = dy[i] * (T(1) - cached_output[i] * cached_output[i]);
    return dx;
  }
};

template <typename T>
struct Sigmoid {
  Tensor<T> cached_output;
  Tensor<T> forward(const Tensor<T>& x, bool keep_for_backward = true) {
    Tensor<T> y(x.shape());
    for (int64_t i = 0; i < x.numel(); ++i) y[i] = T(1) / (T(1) + std::exp(-x[i]));
    if (keep_for_backward) cached_output = y;
    return y;
  }
  Tensor<T> backward(const Tensor<T>& dy) const {
    Tensor<T> dx(dy.shape());
    for (int64_t i = 0; i < dy.numel(); ++i)
      dx[i] = dy[i] * cached_output[i] * (T(1) - cached_output[i]);
    return dx;
  }
};

}  // namespace psgan
