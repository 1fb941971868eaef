#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "psgan/config.hpp"
#include "psgan/layers.hpp"
#include "psgan/noise.hpp"

namespace psgan {

template <typename T>
struct ParamRef {
  std::string name;
  Tensor<T>* value = nullptr;
  Tensor<T>* grad = nullptr;
};

template <typename T>
struct BufferRef {
  std::string name;
  Tensor<T>* value = nullptr;
};

// Channel plan shared by both nets: hidden map ell steps from the image side
// carries channels_at(ell); the generator walks it from the low-resolution end.
inline int generator_in_channels(const NetSpec& spec, int layer /*1-based*/, int d_noise) {
  return layer == 1 ? d_noise : spec.channels_at(spec.depth - layer + 1);
}
inline int generator_out_channels(const NetSpec& spec, int layer) {
  return layer == spec.depth ? 3 : spec.channels_at(spec.depth - layer);
}
inline int discriminator_in_channels(const NetSpec& spec, int layer) {
  return layer == 1 ? 3 : spec.channels_at(layer - 1);
}
inline int discriminator_out_channels(const NetSpec& spec, int layer) {
  return layer == spec.depth ? 1 : spec.channels_at(layer);
}

// ---------------------------------------------------------------------------
// Generator: depth transposed-conv layers, batch norm + relu between layers,
// tanh output. Fully convolutional: (N, d, L, M) -> (N, 3, 2^depth L, 2^depth M).
// ---------------------------------------------------------------------------
template <typename T>
struct Generator {
  NetSpec spec;
  int d_noise = 0;
  std::vector<ConvTranspose2d<T>> convs;
  std::vector<BatchNorm2d<T>> bns;  // depth-1 entries when enabled
  std::vector<ReLU<T>> relus;
  Tanh<T> out_act;

  Generator() = default;
  Generator(const NetSpec& s, int d) : spec(s), d_noise(d) {
    spec.validate();
    if (d < 1) throw std::invalid_argument("Generator: noise dimension must be >= 1");
    for (int j = 1; j <= spec.depth; ++j)
      convs.emplace_back(generator_in_channels(spec, j, d), generator_out_channels(spec, j),
                         spec.kernel);
    if (spec.use_batchnorm_g)
      for (int j = 1; j < spec.depth; ++j)
        bns.emplace_back(generator_out_channels(spec, j));
    relus.resize(static_cast<std::size_t>(spec.depth - 1));
  }

  void init(Rng& rng) {
    for (int j = 0; j < spec.depth; ++j) {
      convs[static_cast<std::size_t>(j)].init(rng);
      if (spec.use_batchnorm_g && j < spec.depth - 1)
        bns[static_cast<std::size_t>(j)].init(rng);
    }
  }

  Tensor<T> forward(const Tensor<T>& z, bool training, bool keep_for_backward = true) {
    Tensor<T> x = z;
    for (int j = 0; j < spec.depth; ++j) {
      x = convs[static_cast<std::size_t>(j)].forward(x, keep_for_backward);
      if (j < spec.depth - 1) {
        if (spec.use_batchnorm_g) x = bns[static_cast<std::size_t>(j)].forward(x, training);
        x = relus[static_cast<std::size_t>(j)].forward(x, keep_for_backward);
      } else {
        x = out_act.forward(x, keep_for_backward);
      }
    }
    return x;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> d = out_act.backward(dy);
    d = convs[static_cast<std::size_t>(spec.depth - 1)].backward(d);
    for (int j = spec.depth - 2; j >= 0; --j) {
      d = relus[static_cast<std::size_t>(j)].backward(d);
      if (spec.use_batchnorm_g) d = bns[static_cast<std::size_t>(j)].backward(d);
      d = convs[static_cast<std::size_t>(j)].backward(d);
    }
    return d;
  }

  void zero_grad() {
    for (auto& c : convs) c.zero_grad();
    for (auto& b : bns) b.zero_grad();
  }

  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> out;
    for (int j = 0; j < spec.depth; ++j) {
      auto& c = convs[static_cast<std::size_t>(j)];
      std::string base = "g.conv" + std::to_string(j + 1);
      out.push_back({base + ".weight", &c.weight, &c.gweight});
      out.push_back({base + ".bias", &c.bias, &c.gbias});
      if (spec.use_batchnorm_g && j < spec.depth - 1) {
        auto& b = bns[static_cast<std::size_t>(j)];
        std::string bnb = "g.bn" + std::to_string(j + 1);
        out.push_back({bnb + ".gamma", &b.gamma, &b.ggamma});
        out.push_back({bnb + ".beta", &b.beta, &b.gbeta});
      }
    }
    return out;
  }

  std::vector<BufferRef<T>> buffers() {
    std::vector<BufferRef<T>> out;
    if (spec.use_batchnorm_g)
      for (int j = 0; j < spec.depth - 1; ++j) {
        auto& b = bns[static_cast<std::size_t>(j)];
        std::string bnb = "g.bn" + std::to_string(j + 1);
        out.push_back({bnb + ".running_mean", &b.running_mean});
        out.push_back({bnb + ".running_var", &b.running_var});
      }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Discriminator: depth stride-2 convs, leaky relu, sigmoid field output.
// (N, 3, H, W) -> (N, 1, H/2^depth, W/2^depth); H, W must be divisible.
// ---------------------------------------------------------------------------
template <typename T>
struct Discriminator {
  NetSpec spec;
  std::vector<Conv2d<T>> convs;
  std::vector<BatchNorm2d<T>> bns;
  std::vector<LeakyReLU<T>> lrelus;
  Sigmoid<T> out_act;

  Discriminator() = default;
  explicit Discriminator(const NetSpec& s) : spec(s) {
    spec.validate();
    for (int j = 1; j <= spec.depth; ++j)
      convs.emplace_back(discriminator_in_channels(spec, j),
                         discriminator_out_channels(spec, j), spec.kernel);
    if (spec.use_batchnorm_d)
      for (int j = 2; j < spec.depth; ++j)
        bns.emplace_back(discriminator_out_channels(spec, j));
    lrelus.resize(static_cast<std::size_t>(spec.depth - 1));
  }

  void init(Rng& rng) {
    for (int j = 0; j < spec.depth; ++j) {
      convs[static_cast<std::size_t>(j)].init(rng);
      if (spec.use_batchnorm_d && j >= 1 && j < spec.depth - 1)
        bns[static_cast<std::size_t>(j - 1)].init(rng);
    }
  }

  Tensor<T> forward(const Tensor<T>& x, bool training, bool keep_for_backward = true) {
    const int64_t div = int64_t(1) << spec.depth;
    if (x.dim(2) % div != 0 || x.dim(3) % div != 0)
      throw std::invalid_argument("Discriminator: input size not divisible by 2^depth");
    Tensor<T> h = x;
    for (int j = 0; j < spec.depth; ++j) {
      h = convs[static_cast<std::size_t>(j)].forward(h, keep_for_backward);
      if (j < spec.depth - 1) {
        if (spec.use_batchnorm_d && j >= 1)
          h = bns[static_cast<std::size_t>(j - 1)].forward(h, training);
        h = lrelus[static_cast<std::size_t>(j)].forward(h, keep_for_backward);
      } else {
        h = out_act.forward(h, keep_for_backward);
      }
    }
    return h;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> d = out_act.backward(dy);
    d = convs[static_cast<std::size_t>(spec.depth - 1)].backward(d);
    for (int j = spec.depth - 2; j >= 0; --j) {
      d = lrelus[static_cast<std::size_t>(j)].backward(d);
      if (spec.use_batchnorm_d && j >= 1) d = bns[static_cast<std::size_t>(j - 1)].backward(d);
      d = convs[static_cast<std::size_t>(j)].backward(d);
    }
    return d;
  }

  void zero_grad() {
    for (auto& c : convs) c.zero_grad();
    for (auto& b : bns) b.zero_grad();
  }

  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> out;
    for (int j = 0; j < spec.depth; ++j) {
      auto& c = convs[static_cast<std::size_t>(j)];
      std::string base = "d.conv" + std::to_string(j + 1);
      out.push_back({base + ".weight", &c.weight, &c.gweight});
      out.push_back({base + ".bias", &c.bias, &c.gbias});
      if (spec.use_batchnorm_d && j >= 1 && j < spec.depth - 1) {
        auto& b = bns[static_cast<std::size_t>(j - 1)];
        std::string bnb = "d.bn" + std::to_string(j + 1);
        out.push_back({bnb + ".gamma", &b.gamma, &b.ggamma});
        out.push_back({bnb + ".beta", &b.beta, &b.gbeta});
      }
    }
    return out;
  }

  std::vector<BufferRef<T>> buffers() {
    std::vector<BufferRef<T>> out;
    if (spec.use_batchnorm_d)
      for (std::size_t j = 0; j < bns.size(); ++j) {
        auto& b = bns[j];
        std::string bnb = "d.bn" + std::to_string(j + 2);
        out.push_back({bnb + ".running_mean", &b.running_mean});
        out.push_back({bnb + ".running_var", &b.running_var});
      }
    return out;
  }
};

// Mirror-symmetry check material: parameter spatial/channel shape lists.
template <typename T>
std::vector<std::vector<int64_t>> conv_weight_shapes(Generator<T>& g) {
  std::vector<std::vector<int64_t>> out;
  for (auto& c : g.convs) out.push_back(c.weight.shape());
  return out;
}
template <typename T>
std::vector<std::vector<int64_t>> conv_weight_shapes(Discriminator<T>& d) {
  std::vector<std::vector<int64_t>> out;
  for (auto& c : d.convs) out.push_back(c.weight.shape());
  return out;
}

// ---------------------------------------------------------------------------
// Ranged rendering path. Inference-only re-expression of the generator whose
// per-pixel accumulation order depends only on absolute output position, so a
// region rendered in chunks is bitwise identical to a monolithic render.
// ---------------------------------------------------------------------------
template <typename T>
struct StableLayer {
  int c_in = 0, c_out = 0, kernel = 5, stride = 2, pad = 2;
  Tensor<T> w_r;   // (c_out, k, k, c_in)
  Tensor<T> bias;  // (c_out)
  bool affine = false;            // eval-mode batch norm folded to scale/shift
  std::vector<T> scale, shift;    // per channel
  bool final_tanh = false;        // otherwise relu (unless final)
};

struct Rect {
  int64_t y0 = 0, y1 = 0, x0 = 0, x1 = 0;  // half-open
  int64_t rows() const { return y1 - y0; }
  int64_t cols() const { return x1 - x0; }
};

template <typename T>
struct StableGenerator {
  NetSpec spec;
  int d_noise = 0;
  std::vector<StableLayer<T>> layers;

  static StableGenerator from(const Generator<T>& g) {
    StableGenerator s;
    s.spec = g.spec;
    s.d_noise = g.d_noise;
    for (int j = 0; j < g.spec.depth; ++j) {
      const auto& c = g.convs[static_cast<std::size_t>(j)];
      StableLayer<T> l;
      l.c_in = c.c_in;
      l.c_out = c.c_out;
      l.kernel = c.kernel;
      l.stride = c.stride;
      l.pad = c.pad;
      l.bias = c.bias;
      l.w_r = Tensor<T>({c.c_out, c.kernel, c.kernel, c.c_in});
      for (int ci = 0; ci < c.c_in; ++ci)
        for (int co = 0; co < c.c_out; ++co)
          for (int ky = 0; ky < c.kernel; ++ky)
            for (int kx = 0; kx < c.kernel; ++kx)
              l.w_r.at(co, ky, kx, ci) = c.weight.at(ci, co, ky, kx);
      if (j < g.spec.depth - 1) {
        if (g.spec.use_batchnorm_g) {
          const auto& b = g.bns[static_cast<std::size_t>(j)];
          l.affine = true;
          l.scale.resize(static_cast<std::size_t>(c.c_out));
          l.shift.resize(static_cast<std::size_t>(c.c_out));
          for (int ch = 0; ch < c.c_out; ++ch) {
            double sc = static_cast<double>(b.gamma[ch]) /
                        std::sqrt(static_cast<double>(b.running_var[ch]) +
                                  static_cast<double>(b.eps));
            l.scale[static_cast<std::size_t>(ch)] = static_cast<T>(sc);
            l.shift[static_cast<std::size_t>(ch)] =
                static_cast<T>(static_cast<double>(b.beta[ch]) -
                               static_cast<double>(b.running_mean[ch]) * sc);
          }
        }
        l.final_tanh = false;
      } else {
        l.final_tanh = true;
      }
      s.layers.push_back(std::move(l));
    }
    return s;
  }

  // One transposed layer over an absolute output rect. `in` is (rows, cols,
  // c_in) covering absolute input rows [in_y0, ...) and must contain every
  // contributing position; validity of a kernel tap is judged against the
  // full layer extent (full_h, full_w), so results do not depend on the rect.
  static Tensor<T> forward_ranged(const StableLayer<T>& l, const Tensor<T>& in,
                                  int64_t in_y0, int64_t in_x0, int64_t full_h,
                                  int64_t full_w, const Rect& out, bool wrap) {
    const int64_t rows = out.rows(), cols = out.cols();
    Tensor<T> y({rows, cols, l.c_out});
    const int k = l.kernel, pad = l.pad, stride = l.stride;
    const int64_t in_rows = in.dim(0), in_cols = in.dim(1);
    struct Tap {
      int64_t w_off;
      const T* x;
    };
    std::vector<Tap> taps;
    taps.reserve(static_cast<std::size_t>(k) * k);
    for (int64_t oy = out.y0; oy < out.y1; ++oy) {
      for (int64_t ox = out.x0; ox < out.x1; ++ox) {
        taps.clear();
        for (int ky = 0; ky < k; ++ky) {
          const int64_t ty = oy + pad - ky;
          if (floormod(ty, stride) != 0) continue;
          const int64_t iy = floordiv(ty, stride);
          if (!wrap && (iy < 0 || iy >= full_h)) continue;
          const int64_t ry = iy - in_y0;
          for (int kx = 0; kx < k; ++kx) {
            const int64_t tx = ox + pad - kx;
            if (floormod(tx, stride) != 0) continue;
            const int64_t ix = floordiv(tx, stride);
            if (!wrap && (ix < 0 || ix >= full_w)) continue;
            const int64_t rx = ix - in_x0;
            if (ry < 0 || ry >= in_rows || rx < 0 || rx >= in_cols)
              throw std::logic_error("forward_ranged: input chunk does not cover preimage");
            taps.push_back(Tap{(static_cast<int64_t>(ky) * k + kx) * l.c_in,
                               in.data() + (ry * in_cols + rx) * l.c_in});
          }
        }
        T* yp = y.data() + ((oy - out.y0) * cols + (ox - out.x0)) * l.c_out;
        for (int co = 0; co < l.c_out; ++co) {
          T acc = l.bias[co];
          const T* wbase = l.w_r.data() +
                           static_cast<int64_t>(co) * k * k * l.c_in;
          for (const Tap& t : taps) acc += fixed_dot(wbase + t.w_off, t.x, l.c_in);
          yp[co] = acc;
        }
      }
    }
    // pointwise tail
    if (l.final_tanh) {
      for (int64_t i = 0; i < y.numel(); ++i) y[i] = std::tanh(y[i]);
    } else {
      if (l.affine) {
        T* p = y.data();
        for (int64_t i = 0; i < rows * cols; ++i, p += l.c_out)
          for (int c = 0; c < l.c_out; ++c)
            p[c] = p[c] * l.scale[static_cast<std::size_t>(c)] +
                   l.shift[static_cast<std::size_t>(c)];
      }
      for (int64_t i = 0; i < y.numel(); ++i)
        if (y[i] < T(0)) y[i] = T(0);
    }
    return y;
  }

  // Render the absolute image rect from the full noise field (d, L, M).
  // wrap=true treats the noise field as periodic in both directions.
  Tensor<T> render_region(const Tensor<T>& noise, const Rect& out_rect, bool wrap) const {
    if (noise.ndim() != 3 || noise.dim(0) != d_noise)
      throw std::invalid_argument("render_region: noise must be (d, L, M)");
    const int depth = spec.depth;
    const int64_t L = noise.dim(1), M = noise.dim(2);
    // full extent and required interval per level (0 = noise ... depth = image)
    std::vector<int64_t> full_h(static_cast<std::size_t>(depth) + 1),
        full_w(static_cast<std::size_t>(depth) + 1);
    full_h[0] = L;
    full_w[0] = M;
    for (int j = 1; j <= depth; ++j) {
      full_h[static_cast<std::size_t>(j)] = full_h[static_cast<std::size_t>(j - 1)] * 2;
      full_w[static_cast<std::size_t>(j)] = full_w[static_cast<std::size_t>(j - 1)] * 2;
    }
    if (!wrap) {
      if (out_rect.y0 < 0 || out_rect.x0 < 0 ||
          out_rect.y1 > full_h[static_cast<std::size_t>(depth)] ||
          out_rect.x1 > full_w[static_cast<std::size_t>(depth)])
        throw std::invalid_argument("render_region: rect outside the image extent");
    }
    std::vector<Rect> need(static_cast<std::size_t>(depth) + 1);
    need[static_cast<std::size_t>(depth)] = out_rect;
    for (int j = depth; j >= 1; --j) {
      const auto& l = layers[static_cast<std::size_t>(j - 1)];
      const Rect& r = need[static_cast<std::size_t>(j)];
      Interval iy = convt_preimage(r.y0, r.y1, l.kernel, l.stride, l.pad);
      Interval ix = convt_preimage(r.x0, r.x1, l.kernel, l.stride, l.pad);
      Rect p{iy.lo, iy.hi, ix.lo, ix.hi};
      if (!wrap) {
        p.y0 = std::max<int64_t>(p.y0, 0);
        p.x0 = std::max<int64_t>(p.x0, 0);
        p.y1 = std::min(p.y1, full_h[static_cast<std::size_t>(j - 1)]);
        p.x1 = std::min(p.x1, full_w[static_cast<std::size_t>(j - 1)]);
      }
      need[static_cast<std::size_t>(j - 1)] = p;
    }
    // materialize the level-0 chunk in (rows, cols, d) order
    const Rect& r0 = need[0];
    Tensor<T> cur({r0.rows(), r0.cols(), d_noise});
    for (int64_t y = r0.y0; y < r0.y1; ++y) {
      const int64_t sy = wrap ? floormod(y, L) : y;
      for (int64_t x = r0.x0; x < r0.x1; ++x) {
        const int64_t sx = wrap ? floormod(x, M) : x;
        T* dst = cur.data() + ((y - r0.y0) * r0.cols() + (x - r0.x0)) * d_noise;
        for (int c = 0; c < d_noise; ++c) dst[c] = noise.at(c, sy, sx);
      }
    }
    int64_t cur_y0 = r0.y0, cur_x0 = r0.x0;
    for (int j = 1; j <= depth; ++j) {
      const auto& l = layers[static_cast<std::size_t>(j - 1)];
      Tensor<T> next = forward_ranged(l, cur, cur_y0, cur_x0,
                                      full_h[static_cast<std::size_t>(j - 1)],
                                      full_w[static_cast<std::size_t>(j - 1)],
                                      need[static_cast<std::size_t>(j)], wrap);
      cur = std::move(next);
      cur_y0 = need[static_cast<std::size_t>(j)].y0;
      cur_x0 = need[static_cast<std::size_t>(j)].x0;
    }
    return cur;  // (rows, cols, 3)
  }
};

}  // namespace psgan
