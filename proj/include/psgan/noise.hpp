#pragma once

#include <array>
#include <cmath>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "psgan/config.hpp"
#include "psgan/rng.hpp"
#include "psgan/tensor.hpp"

namespace psgan {

// Noise fields are stored channel-major: (channels, L, M). Spatial index
// lambda is the row (first) axis, mu the column (second) axis.

// ---------------------------------------------------------------------------
// Local part: i.i.d. uniform samples over the prior range.
// ---------------------------------------------------------------------------
template <typename T>
Tensor<T> build_local(const NoiseSpec& spec, Rng& rng) {
  if (spec.d_l < 0) throw std::invalid_argument("build_local: d_l must be >= 0");
  Tensor<T> z({spec.d_l, spec.L, spec.M});
  for (int64_t i = 0; i < z.numel(); ++i)
    z[i] = static_cast<T>(rng.uniform(spec.prior_low, spec.prior_high));
  return z;
}

// ---------------------------------------------------------------------------
// Global part: constant, tiled, or bilinearly interpolated z^g field.
// ---------------------------------------------------------------------------
struct BroadcastMode {
  std::vector<double> z;  // empty: draw from the prior
};
struct QuiltMode {
  int delta = 1;
};
struct BilinearMode {
  // top-left, top-right, bottom-left, bottom-right; all empty: draw
  std::array<std::vector<double>, 4> corners;
};
using GlobalMode = std::variant<BroadcastMode, QuiltMode, BilinearMode>;

template <typename T>
struct GlobalField {
  Tensor<T> values;  // (d_g, L, M)
  std::string construction;  // "broadcast" | "quilt(D)" | "bilinear" | "explicit"

  bool spatially_constant() const {
    const int64_t d_g = values.dim(0), L = values.dim(1), M = values.dim(2);
    for (int64_t i = 0; i < d_g; ++i)
      for (int64_t l = 0; l < L; ++l)
        for (int64_t m = 0; m < M; ++m)
          if (values.at(i, l, m) != values.at(i, 0, 0)) return false;
    return true;
  }

  std::vector<T> column(int64_t lambda, int64_t mu) const {
    std::vector<T> z(static_cast<std::size_t>(values.dim(0)));
    for (std::size_t i = 0; i < z.size(); ++i)
      z[i] = values.at(static_cast<int64_t>(i), lambda, mu);
    return z;
  }
};

template <typename T>
GlobalField<T> build_global(const NoiseSpec& spec, const GlobalMode& mode, Rng& rng) {
  if (spec.d_g < 1)
    throw std::invalid_argument("build_global: d_g must be >= 1 (skip the global part otherwise)");
  const int d_g = spec.d_g, L = spec.L, M = spec.M;
  GlobalField<T> field;
  field.values = Tensor<T>({d_g, L, M});

  auto draw = [&]() {
    std::vector<double> z(static_cast<std::size_t>(d_g));
    for (auto& v : z) v = rng.uniform(spec.prior_low, spec.prior_high);
    return z;
  };

  if (const auto* bc = std::get_if<BroadcastMode>(&mode)) {
    std::vector<double> z = bc->z.empty() ? draw() : bc->z;
    if (static_cast<int>(z.size()) != d_g)
      throw std::invalid_argument("build_global: broadcast vector length != d_g");
    for (int i = 0; i < d_g; ++i)
      for (int l = 0; l < L; ++l)
        for (int m = 0; m < M; ++m) field.values.at(i, l, m) = static_cast<T>(z[i]);
    field.construction = "broadcast";
  } else if (const auto* q = std::get_if<QuiltMode>(&mode)) {
    if (q->delta < 1) throw std::invalid_argument("build_global: quilt delta must be >= 1");
    if (q->delta > std::min(L, M))
      throw std::invalid_argument("build_global: quilt delta exceeds min(L, M)");
    const int ty = (L + q->delta - 1) / q->delta;
    const int tx = (M + q->delta - 1) / q->delta;
    for (int t = 0; t < ty; ++t) {
      for (int s = 0; s < tx; ++s) {
        std::vector<double> z = draw();
        for (int l = t * q->delta; l < std::min(L, (t + 1) * q->delta); ++l)
          for (int m = s * q->delta; m < std::min(M, (s + 1) * q->delta); ++m)
            for (int i = 0; i < d_g; ++i) field.values.at(i, l, m) = static_cast<T>(z[i]);
      }
    }
    field.construction = "quilt(" + std::to_string(q->delta) + ")";
  } else {
    const auto& bl = std::get<BilinearMode>(mode);
    std::array<std::vector<double>, 4> c = bl.corners;
    bool all_empty = true, any_empty = false;
    for (const auto& v : c) {
      if (v.empty()) any_empty = true;
      else all_empty = false;
    }
    if (any_empty && !all_empty)
      throw std::invalid_argument("build_global: bilinear corners must all be given or all drawn");
    if (all_empty)
      for (auto& v : c) v = draw();
    for (const auto& v : c)
      if (static_cast<int>(v.size()) != d_g)
        throw std::invalid_argument("build_global: bilinear corner length != d_g");
    for (int l = 0; l < L; ++l) {
      double u = (L > 1) ? static_cast<double>(l) / (L - 1) : 0.0;
      for (int m = 0; m < M; ++m) {
        double v = (M > 1) ? static_cast<double>(m) / (M - 1) : 0.0;
        for (int i = 0; i < d_g; ++i) {
          double val = (1 - u) * (1 - v) * c[0][static_cast<std::size_t>(i)] +
                       (1 - u) * v * c[1][static_cast<std::size_t>(i)] +
                       u * (1 - v) * c[2][static_cast<std::size_t>(i)] +
                       u * v * c[3][static_cast<std::size_t>(i)];
          field.values.at(i, l, m) = static_cast<T>(val);
        }
      }
    }
    field.construction = "bilinear";
  }
  return field;
}

template <typename T>
GlobalField<T> global_from_values(Tensor<T> values, std::string construction = "explicit") {
  if (values.ndim() != 3)
    throw std::invalid_argument("global_from_values: expected (d_g, L, M)");
  GlobalField<T> f;
  f.values = std::move(values);
  f.construction = std::move(construction);
  return f;
}

// ---------------------------------------------------------------------------
// Wave-number MLP: z^g -> 2 x d_p matrix K. With d_g = 0 the hidden layer
// vanishes and the two bias vectors are the only live parameters.
// ---------------------------------------------------------------------------
template <typename T>
struct WaveNumberMLP {
  int d_g = 0, d_h = 0, d_p = 0;
  Tensor<T> W, b, W1, W2;  // (d_h,d_g), (d_h), (d_p,d_h), (d_p,d_h)
  Tensor<T> b1, b2;        // (d_p)
  std::vector<double> c;   // initialization means, strictly increasing in (0, pi]

  // gradient accumulators, laid out like the parameters
  Tensor<T> gW, gb, gW1, gW2, gb1, gb2;

  bool has_hidden() const { return d_g > 0; }

  void zero_grad() {
    gW.zero(); gb.zero(); gW1.zero(); gW2.zero(); gb1.zero(); gb2.zero();
  }

  std::vector<T> hidden(const std::vector<T>& z_g) const {
    std::vector<T> h(static_cast<std::size_t>(d_h), T(0));
    for (int j = 0; j < d_h; ++j) {
      T acc = b[j];
      for (int i = 0; i < d_g; ++i) acc += W.at(j, i) * z_g[static_cast<std::size_t>(i)];
      h[static_cast<std::size_t>(j)] = acc > T(0) ? acc : T(0);
    }
    return h;
  }

  // K(0,i) = W1 relu(W z + b) + b1, K(1,i) likewise with W2, b2.
  Tensor<T> forward(const std::vector<T>& z_g) const {
    if (static_cast<int>(z_g.size()) != d_g && d_g > 0)
      throw std::invalid_argument("WaveNumberMLP::forward: z_g length != d_g");
    Tensor<T> K({2, d_p});
    if (!has_hidden()) {
      for (int i = 0; i < d_p; ++i) {
        K.at(0, i) = b1[i];
        K.at(1, i) = b2[i];
      }
      return K;
    }
    std::vector<T> h = hidden(z_g);
    for (int i = 0; i < d_p; ++i) {
      T a1 = b1[i], a2 = b2[i];
      for (int j = 0; j < d_h; ++j) {
        a1 += W1.at(i, j) * h[static_cast<std::size_t>(j)];
        a2 += W2.at(i, j) * h[static_cast<std::size_t>(j)];
      }
      K.at(0, i) = a1;
      K.at(1, i) = a2;
    }
    return K;
  }

  // Accumulate parameter gradients for one sample. The hidden activation is
  // recomputed; z_g receives no gradient (it is input noise).
  void backward(const std::vector<T>& z_g, const Tensor<T>& dK) {
    if (dK.ndim() != 2 || dK.dim(0) != 2 || dK.dim(1) != d_p)
      throw std::invalid_argument("WaveNumberMLP::backward: dK must be (2, d_p)");
    for (int i = 0; i < d_p; ++i) {
      gb1[i] += dK.at(0, i);
      gb2[i] += dK.at(1, i);
    }
    if (!has_hidden()) return;
    std::vector<T> h = hidden(z_g);
    // dh = W1^T dK0 + W2^T dK1, masked by relu
    std::vector<T> dh(static_cast<std::size_t>(d_h), T(0));
    for (int i = 0; i < d_p; ++i) {
      for (int j = 0; j < d_h; ++j) {
        gW1.at(i, j) += dK.at(0, i) * h[static_cast<std::size_t>(j)];
        gW2.at(i, j) += dK.at(1, i) * h[static_cast<std::size_t>(j)];
        dh[static_cast<std::size_t>(j)] +=
            W1.at(i, j) * dK.at(0, i) + W2.at(i, j) * dK.at(1, i);
      }
    }
    for (int j = 0; j < d_h; ++j) {
      if (h[static_cast<std::size_t>(j)] <= T(0)) continue;  // relu gate
      gb[j] += dh[static_cast<std::size_t>(j)];
      for (int i = 0; i < d_g; ++i)
        gW.at(j, i) += dh[static_cast<std::size_t>(j)] * z_g[static_cast<std::size_t>(i)];
    }
  }
};

template <typename T>
Tensor<T> mlp_wavenumbers(const WaveNumberMLP<T>& mlp, const std::vector<T>& z_g) {
  return mlp.forward(z_g);
}

// Evenly spaced initialization means over (0, pi], endpoint included.
inline std::vector<double> wavenumber_init_means(int d_p) {
  std::vector<double> c(static_cast<std::size_t>(d_p));
  for (int i = 0; i < d_p; ++i)
    c[static_cast<std::size_t>(i)] = M_PI * (i + 1) / d_p;
  return c;
}

template <typename T>
WaveNumberMLP<T> init_wavenumber_mlp(const NoiseSpec& spec, int d_h, Rng& rng) {
  if (spec.d_p < 1) throw std::invalid_argument("init_wavenumber_mlp: d_p must be >= 1");
  WaveNumberMLP<T> mlp;
  mlp.d_g = spec.d_g;
  mlp.d_h = spec.d_g > 0 ? d_h : 0;
  mlp.d_p = spec.d_p;
  mlp.c = wavenumber_init_means(spec.d_p);
  if (mlp.has_hidden()) {
    mlp.W = Tensor<T>({mlp.d_h, mlp.d_g});
    mlp.b = Tensor<T>({mlp.d_h});
    mlp.W1 = Tensor<T>({mlp.d_p, mlp.d_h});
    mlp.W2 = Tensor<T>({mlp.d_p, mlp.d_h});
    for (int64_t i = 0; i < mlp.W.numel(); ++i) mlp.W[i] = static_cast<T>(rng.normal(0, 0.02));
    for (int64_t i = 0; i < mlp.b.numel(); ++i) mlp.b[i] = static_cast<T>(rng.normal(0, 0.02));
    for (int64_t i = 0; i < mlp.W1.numel(); ++i) mlp.W1[i] = static_cast<T>(rng.normal(0, 0.02));
    for (int64_t i = 0; i < mlp.W2.numel(); ++i) mlp.W2[i] = static_cast<T>(rng.normal(0, 0.02));
  }
  mlp.b1 = Tensor<T>({mlp.d_p});
  mlp.b2 = Tensor<T>({mlp.d_p});
  for (int i = 0; i < mlp.d_p; ++i) {
    double ci = mlp.c[static_cast<std::size_t>(i)];
    mlp.b1[i] = static_cast<T>(rng.normal(ci, 0.02 * ci));
    mlp.b2[i] = static_cast<T>(rng.normal(ci, 0.02 * ci));
  }
  mlp.gW = Tensor<T>(mlp.W.shape());
  mlp.gb = Tensor<T>(mlp.b.shape());
  mlp.gW1 = Tensor<T>(mlp.W1.shape());
  mlp.gW2 = Tensor<T>(mlp.W2.shape());
  mlp.gb1 = Tensor<T>(mlp.b1.shape());
  mlp.gb2 = Tensor<T>(mlp.b2.shape());
  return mlp;
}

// ---------------------------------------------------------------------------
// Periodic part: plane waves sin(k^T (lambda, mu) + phi), 0-based indices.
// ---------------------------------------------------------------------------
template <typename T>
struct PeriodicField {
  Tensor<T> values;  // (d_p, L, M)
  Tensor<T> K;       // (2, d_p) constant, or (L, M, 2, d_p) when varying
  std::vector<T> phases;
  bool spatially_varying = false;

  // Wave-number matrix at one position.
  Tensor<T> K_at(int64_t lambda, int64_t mu) const {
    if (!spatially_varying) return K;
    const int d_p = static_cast<int>(K.dim(3));
    Tensor<T> k({2, d_p});
    for (int r = 0; r < 2; ++r)
      for (int i = 0; i < d_p; ++i) k.at(r, i) = K.at(lambda, mu, r, i);
    return k;
  }
};

template <typename T>
void check_phases(const std::vector<T>& phases) {
  for (T p : phases)
    if (!(p >= T(0) && p < T(2 * M_PI)))
      throw std::invalid_argument("phases must lie in [0, 2*pi)");
}

template <typename T>
PeriodicField<T> build_periodic_field(const Tensor<T>& K, const std::vector<T>& phases,
                                      int L, int M) {
  if (K.ndim() != 2 || K.dim(0) != 2)
    throw std::invalid_argument("build_periodic_field: K must be 2 x d_p");
  const int d_p = static_cast<int>(K.dim(1));
  if (static_cast<int>(phases.size()) != d_p)
    throw std::invalid_argument("build_periodic_field: phases length != d_p");
  check_phases(phases);
  PeriodicField<T> f;
  f.values = Tensor<T>({d_p, L, M});
  f.K = K;
  f.phases = phases;
  for (int i = 0; i < d_p; ++i) {
    const T kl = K.at(0, i), km = K.at(1, i), ph = phases[static_cast<std::size_t>(i)];
    for (int l = 0; l < L; ++l)
      for (int m = 0; m < M; ++m)
        f.values.at(i, l, m) = std::sin(kl * T(l) + km * T(m) + ph);
  }
  return f;
}

// Pointwise variant: K is evaluated from the global field at every position.
template <typename T>
PeriodicField<T> build_periodic_field(const WaveNumberMLP<T>& mlp, const GlobalField<T>& g,
                                      const std::vector<T>& phases) {
  const int d_g = static_cast<int>(g.values.dim(0));
  const int L = static_cast<int>(g.values.dim(1));
  const int M = static_cast<int>(g.values.dim(2));
  if (d_g != mlp.d_g)
    throw std::invalid_argument("build_periodic_field: global field dims != mlp.d_g");
  if (static_cast<int>(phases.size()) != mlp.d_p)
    throw std::invalid_argument("build_periodic_field: phases length != d_p");
  check_phases(phases);

  if (g.spatially_constant()) {
    Tensor<T> K = mlp.forward(g.column(0, 0));
    return build_periodic_field(K, phases, L, M);
  }

  PeriodicField<T> f;
  f.spatially_varying = true;
  f.values = Tensor<T>({mlp.d_p, L, M});
  f.K = Tensor<T>({L, M, 2, mlp.d_p});
  std::vector<T> z(static_cast<std::size_t>(d_g));
  for (int l = 0; l < L; ++l) {
    for (int m = 0; m < M; ++m) {
      for (int i = 0; i < d_g; ++i) z[static_cast<std::size_t>(i)] = g.values.at(i, l, m);
      Tensor<T> K = mlp.forward(z);
      for (int i = 0; i < mlp.d_p; ++i) {
        f.K.at(l, m, 0, i) = K.at(0, i);
        f.K.at(l, m, 1, i) = K.at(1, i);
        f.values.at(i, l, m) =
            std::sin(K.at(0, i) * T(l) + K.at(1, i) * T(m) + phases[static_cast<std::size_t>(i)]);
      }
    }
  }
  f.phases = phases;
  return f;
}

// d(values)/dK for a spatially constant K, given upstream dValues (d_p, L, M).
template <typename T>
Tensor<T> periodic_field_backward(const Tensor<T>& K, const std::vector<T>& phases,
                                  const Tensor<T>& dValues) {
  const int d_p = static_cast<int>(K.dim(1));
  const int L = static_cast<int>(dValues.dim(1));
  const int M = static_cast<int>(dValues.dim(2));
  Tensor<T> dK({2, d_p});
  for (int i = 0; i < d_p; ++i) {
    const T kl = K.at(0, i), km = K.at(1, i), ph = phases[static_cast<std::size_t>(i)];
    T g0 = 0, g1 = 0;
    for (int l = 0; l < L; ++l) {
      for (int m = 0; m < M; ++m) {
        T c = std::cos(kl * T(l) + km * T(m) + ph) * dValues.at(i, l, m);
        g0 += c * T(l);
        g1 += c * T(m);
      }
    }
    dK.at(0, i) = g0;
    dK.at(1, i) = g1;
  }
  return dK;
}

template <typename T>
std::vector<T> sample_phases(int d_p, Rng& rng) {
  if (d_p < 0) throw std::invalid_argument("sample_phases: d_p must be >= 0");
  std::vector<T> phases(static_cast<std::size_t>(d_p));
  for (auto& p : phases) p = static_cast<T>(rng.uniform(0.0, 2.0 * M_PI));
  return phases;
}

// ---------------------------------------------------------------------------
// Assembled noise tensor Z = [Z^l | Z^g | Z^p], channel-concatenated.
// ---------------------------------------------------------------------------
template <typename T>
struct NoiseTensor {
  Tensor<T> values;  // (d, L, M)
  NoiseSpec spec;
  // provenance of the structured parts (the local part is the leading
  // channel slice of `values` itself)
  std::optional<GlobalField<T>> global_src;
  std::optional<PeriodicField<T>> periodic_src;

  T at(int64_t lambda, int64_t mu, int64_t channel) const {
    return values.at(channel, lambda, mu);
  }
};

template <typename T>
NoiseTensor<T> assemble_noise(const NoiseSpec& spec, const Tensor<T>& local,
                              const std::optional<GlobalField<T>>& global_field,
                              const std::optional<PeriodicField<T>>& periodic_field) {
  spec.validate();
  const int L = spec.L, M = spec.M;
  auto check_part = [&](const Tensor<T>& t, int channels, const char* what) {
    if (t.ndim() != 3 || t.dim(0) != channels || t.dim(1) != L || t.dim(2) != M)
      throw std::invalid_argument(std::string("assemble_noise: ") + what +
                                  " has shape " + t.shape_str() + ", expected (" +
                                  std::to_string(channels) + "," + std::to_string(L) + "," +
                                  std::to_string(M) + ")");
  };
  check_part(local, spec.d_l, "local part");
  if (spec.d_g > 0) {
    if (!global_field) throw std::invalid_argument("assemble_noise: missing global part");
    check_part(global_field->values, spec.d_g, "global part");
  } else if (global_field) {
    throw std::invalid_argument("assemble_noise: global part given but d_g = 0");
  }
  if (spec.d_p > 0) {
    if (!periodic_field) throw std::invalid_argument("assemble_noise: missing periodic part");
    check_part(periodic_field->values, spec.d_p, "periodic part");
  } else if (periodic_field) {
    throw std::invalid_argument("assemble_noise: periodic part given but d_p = 0");
  }

  NoiseTensor<T> z;
  z.spec = spec;
  z.values = Tensor<T>({spec.d(), L, M});
  const int64_t plane = static_cast<int64_t>(L) * M;
  T* dst = z.values.data();
  std::memcpy(dst, local.data(), sizeof(T) * static_cast<std::size_t>(spec.d_l * plane));
  dst += spec.d_l * plane;
  if (spec.d_g > 0) {
    std::memcpy(dst, global_field->values.data(),
                sizeof(T) * static_cast<std::size_t>(spec.d_g * plane));
    dst += spec.d_g * plane;
    z.global_src = *global_field;
  }
  if (spec.d_p > 0) {
    std::memcpy(dst, periodic_field->values.data(),
                sizeof(T) * static_cast<std::size_t>(spec.d_p * plane));
    z.periodic_src = *periodic_field;
  }

  // range contracts
  for (int64_t i = 0; i < spec.d_l * plane; ++i) {
    T v = z.values[i];
    if (!(v >= T(spec.prior_low) && v <= T(spec.prior_high)))
      throw std::invalid_argument("assemble_noise: local entry outside the prior range");
  }
  const int64_t p_off = static_cast<int64_t>(spec.d_l + spec.d_g) * plane;
  for (int64_t i = 0; i < spec.d_p * plane; ++i) {
    T v = z.values[p_off + i];
    if (!(v >= T(-1) && v <= T(1)))
      throw std::invalid_argument("assemble_noise: periodic entry outside [-1, 1]");
  }
  return z;
}

}  // namespace psgan
