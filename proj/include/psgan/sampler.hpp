#pragma once

#include <array>
#include <cmath>
#include <cstring>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "psgan/checkpoint.hpp"
#include "psgan/errors.hpp"
#include "psgan/image.hpp"
#include "psgan/net.hpp"
#include "psgan/noise.hpp"

namespace psgan {

// Inference bundle reconstructed from a checkpoint (generator + MLP only).
struct SamplerModel {
  NoiseSpec noise;
  NetSpec net;
  Generator<float> G;
  WaveNumberMLP<float> mlp;
};

inline SamplerModel make_sampler_model(const Checkpoint& ck) {
  SamplerModel m{ck.config.noise, ck.config.net, Generator<float>(ck.config.net, ck.config.noise.d()),
                 WaveNumberMLP<float>{}};
  for (auto& p : m.G.params()) copy_named_tensor(ck, p.name, *p.value);
  for (auto& b : m.G.buffers()) copy_named_tensor(ck, b.name, *b.value);
  if (m.noise.d_p > 0) {
    m.mlp.d_g = m.noise.d_g;
    m.mlp.d_h = m.noise.d_g > 0 ? ck.config.net.mlp_hidden : 0;
    m.mlp.d_p = m.noise.d_p;
    m.mlp.c = wavenumber_init_means(m.noise.d_p);
    if (m.mlp.has_hidden()) {
      m.mlp.W = Tensor<float>({m.mlp.d_h, m.mlp.d_g});
      m.mlp.b = Tensor<float>({m.mlp.d_h});
      m.mlp.W1 = Tensor<float>({m.mlp.d_p, m.mlp.d_h});
      m.mlp.W2 = Tensor<float>({m.mlp.d_p, m.mlp.d_h});
      copy_named_tensor(ck, "mlp.W", m.mlp.W);
      copy_named_tensor(ck, "mlp.b", m.mlp.b);
      copy_named_tensor(ck, "mlp.W1", m.mlp.W1);
      copy_named_tensor(ck, "mlp.W2", m.mlp.W2);
    }
    m.mlp.b1 = Tensor<float>({m.mlp.d_p});
    m.mlp.b2 = Tensor<float>({m.mlp.d_p});
    copy_named_tensor(ck, "mlp.b1", m.mlp.b1);
    copy_named_tensor(ck, "mlp.b2", m.mlp.b2);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Render plans.
// ---------------------------------------------------------------------------
struct CoupledPeriodic {};  // K evaluated from the global field
struct OverriddenPeriodic {
  std::vector<double> z_hat;  // K from this vector instead of the global field
};
struct ExplicitK {
  Tensor<float> K;  // (2, d_p)
};
using PeriodicSource = std::variant<CoupledPeriodic, OverriddenPeriodic, ExplicitK>;

struct RenderPlan {
  int extent_l = 5, extent_m = 5;  // noise-space output extent
  GlobalMode global = BroadcastMode{};
  PeriodicSource periodic = CoupledPeriodic{};
  uint64_t seed = 0;
  int chunk = 0;  // max noise extent rendered per pass; 0 = single pass
  bool tileable = false;
};

inline int min_chunk_extent(const NetSpec& net) {
  const int up = 1 << net.depth;
  return (receptive_field(net) + up - 1) / up;
}

inline void validate_plan(const RenderPlan& plan, const SamplerModel& m) {
  if (plan.extent_l < 1 || plan.extent_m < 1)
    throw ConfigError("render plan: output extent must be >= 1");
  if (plan.chunk != 0 && plan.chunk < min_chunk_extent(m.net))
    throw ConfigError("render plan: chunk extent " + std::to_string(plan.chunk) +
                      " is smaller than the noise-space receptive field " +
                      std::to_string(min_chunk_extent(m.net)));
  if (m.noise.d_g == 0 && !std::holds_alternative<BroadcastMode>(plan.global))
    throw ConfigError("render plan: structured global field requires d_g >= 1");
  if (std::holds_alternative<OverriddenPeriodic>(plan.periodic)) {
    if (m.noise.d_p == 0) throw ConfigError("render plan: periodic override requires d_p >= 1");
    const auto& ov = std::get<OverriddenPeriodic>(plan.periodic);
    if (static_cast<int>(ov.z_hat.size()) != m.noise.d_g)
      throw ConfigError("render plan: override vector length != d_g");
  }
  if (std::holds_alternative<ExplicitK>(plan.periodic)) {
    const auto& ek = std::get<ExplicitK>(plan.periodic);
    if (ek.K.ndim() != 2 || ek.K.dim(0) != 2 || ek.K.dim(1) != m.noise.d_p)
      throw ConfigError("render plan: explicit K must be 2 x d_p");
  }
  if (plan.tileable) {
    if (!std::holds_alternative<BroadcastMode>(plan.global))
      throw ConfigError("tileable rendering requires a broadcast global field");
    if (std::holds_alternative<CoupledPeriodic>(plan.periodic) && m.noise.d_g > 0) {
      // fine: broadcast global gives a constant K
    }
  }
}

inline double snap_to_multiple(double k, double base) {
  return base * std::round(k / base);
}

// Build the full structured noise field for a plan. Draw order: local field,
// global field, phases, then any deferred vector draws. One phase vector per
// rendered image.
inline NoiseTensor<float> build_render_noise(const SamplerModel& m, const RenderPlan& plan) {
  validate_plan(plan, m);
  NoiseSpec spec = m.noise;
  spec.L = plan.extent_l;
  spec.M = plan.extent_m;
  Rng rng(plan.seed);
  Tensor<float> local = build_local<float>(spec, rng);
  std::optional<GlobalField<float>> global;
  if (spec.d_g > 0) global = build_global<float>(spec, plan.global, rng);
  std::optional<PeriodicField<float>> periodic;
  if (spec.d_p > 0) {
    std::vector<float> phases = sample_phases<float>(spec.d_p, rng);
    if (const auto* ov = std::get_if<OverriddenPeriodic>(&plan.periodic)) {
      std::vector<float> zh(ov->z_hat.begin(), ov->z_hat.end());
      Tensor<float> K = m.mlp.forward(zh);
      periodic = build_periodic_field(K, phases, spec.L, spec.M);
    } else if (const auto* ek = std::get_if<ExplicitK>(&plan.periodic)) {
      periodic = build_periodic_field(ek->K, phases, spec.L, spec.M);
    } else {
      if (spec.d_g > 0) {
        periodic = build_periodic_field(m.mlp, *global, phases);
      } else {
        Tensor<float> K = m.mlp.forward({});
        periodic = build_periodic_field(K, phases, spec.L, spec.M);
      }
    }
    if (plan.tileable) {
      if (periodic->spatially_varying)
        throw ConfigError("tileable rendering requires a constant wave-number matrix");
      Tensor<float> K = periodic->K;
      for (int i = 0; i < spec.d_p; ++i) {
        K.at(0, i) = static_cast<float>(
            snap_to_multiple(K.at(0, i), 2.0 * M_PI / plan.extent_l));
        K.at(1, i) = static_cast<float>(
            snap_to_multiple(K.at(1, i), 2.0 * M_PI / plan.extent_m));
      }
      periodic = build_periodic_field(K, periodic->phases, spec.L, spec.M);
    }
  }
  return assemble_noise(spec, local, global, periodic);
}

// ---------------------------------------------------------------------------
// Rendering. Chunked and monolithic paths share the ranged forward, so their
// outputs are bitwise identical.
// ---------------------------------------------------------------------------
inline ImageF render_noise_field(const SamplerModel&, const StableGenerator<float>& sg,
                                 const Tensor<float>& noise, int chunk, bool tileable) {
  const int up = 1 << sg.spec.depth;
  const int64_t L = noise.dim(1), M = noise.dim(2);
  const int64_t H = L * up, W = M * up;
  ImageF out;
  out.h = static_cast<int>(H);
  out.w = static_cast<int>(W);
  out.rgb.resize(static_cast<std::size_t>(H) * W * 3);
  const int64_t step = chunk > 0 ? static_cast<int64_t>(chunk) : std::max(L, M);
  for (int64_t ty = 0; ty < L; ty += step) {
    for (int64_t tx = 0; tx < M; tx += step) {
      Rect r{ty * up, std::min(ty + step, L) * up, tx * up, std::min(tx + step, M) * up};
      Tensor<float> block = sg.render_region(noise, r, tileable);
      for (int64_t y = r.y0; y < r.y1; ++y)
        std::memcpy(out.rgb.data() + (static_cast<std::size_t>(y) * W + r.x0) * 3,
                    block.data() + (y - r.y0) * r.cols() * 3,
                    sizeof(float) * static_cast<std::size_t>(r.cols()) * 3);
    }
  }
  return out;
}

inline ImageF render(const SamplerModel& m, const RenderPlan& plan) {
  NoiseTensor<float> z = build_render_noise(m, plan);
  StableGenerator<float> sg = StableGenerator<float>::from(m.G);
  return render_noise_field(m, sg, z.values, plan.chunk, plan.tileable);
}

inline ImageF render_quilt(const SamplerModel& m, int tiles_y, int tiles_x, int delta,
                           uint64_t seed, int chunk = 0) {
  if (tiles_y < 1 || tiles_x < 1) throw ConfigError("quilt: tile counts must be >= 1");
  if (delta < 1) throw ConfigError("quilt: delta must be >= 1");
  RenderPlan plan;
  plan.extent_l = tiles_y * delta;
  plan.extent_m = tiles_x * delta;
  plan.global = QuiltMode{delta};
  plan.periodic = CoupledPeriodic{};
  plan.seed = seed;
  plan.chunk = chunk;
  return render(m, plan);
}

inline ImageF render_morph(const SamplerModel& m, const std::array<std::vector<double>, 4>& corners,
                           int extent_l, int extent_m, uint64_t seed, int chunk = 0) {
  if (m.noise.d_g == 0) throw ConfigError("morph: d_g = 0 leaves no manifold to interpolate");
  RenderPlan plan;
  plan.extent_l = extent_l;
  plan.extent_m = extent_m;
  plan.global = BilinearMode{corners};
  plan.periodic = CoupledPeriodic{};
  plan.seed = seed;
  plan.chunk = chunk;
  return render(m, plan);
}

inline ImageF render_tileable(const SamplerModel& m, int extent_l, int extent_m, uint64_t seed,
                              int chunk = 0) {
  RenderPlan plan;
  plan.extent_l = extent_l;
  plan.extent_m = extent_m;
  plan.global = BroadcastMode{};
  plan.periodic = CoupledPeriodic{};
  plan.seed = seed;
  plan.chunk = chunk;
  plan.tileable = true;
  return render(m, plan);
}

// ---------------------------------------------------------------------------
// Disentangling substitutions: vary one structured part while holding the
// other fixed. The local field, the quilt draws, the phases, and the z-hat
// vector are identical across modes under the same seed.
// ---------------------------------------------------------------------------
enum class DisentangleMode { vary_g_fix_p, fix_g_vary_p, vary_both };

inline DisentangleMode parse_disentangle_mode(const std::string& s) {
  if (s == "vary_g_fix_p") return DisentangleMode::vary_g_fix_p;
  if (s == "fix_g_vary_p") return DisentangleMode::fix_g_vary_p;
  if (s == "vary_both") return DisentangleMode::vary_both;
  throw ConfigError("unknown disentangle mode '" + s +
                    "' (expected vary_g_fix_p | fix_g_vary_p | vary_both)");
}

inline NoiseTensor<float> build_disentangled_noise(const SamplerModel& m, DisentangleMode mode,
                                                   int tiles_y, int tiles_x, int delta,
                                                   std::vector<double> z_hat, uint64_t seed) {
  if (m.noise.d_g < 1 || m.noise.d_p < 1)
    throw ConfigError("disentangle requires d_g >= 1 and d_p >= 1");
  if (tiles_y < 1 || tiles_x < 1 || delta < 1)
    throw ConfigError("disentangle: bad quilt geometry");
  NoiseSpec spec = m.noise;
  spec.L = tiles_y * delta;
  spec.M = tiles_x * delta;
  Rng rng(seed);
  // shared draw sequence across all three modes
  Tensor<float> local = build_local<float>(spec, rng);
  GlobalField<float> quilt = build_global<float>(spec, QuiltMode{delta}, rng);
  std::vector<float> phases = sample_phases<float>(spec.d_p, rng);
  if (z_hat.empty()) {
    z_hat.resize(static_cast<std::size_t>(spec.d_g));
    for (auto& v : z_hat) v = rng.uniform(spec.prior_low, spec.prior_high);
  } else if (static_cast<int>(z_hat.size()) != spec.d_g) {
    throw ConfigError("disentangle: z_hat length != d_g");
  }
  std::vector<float> zh(z_hat.begin(), z_hat.end());

  std::optional<GlobalField<float>> global;
  std::optional<PeriodicField<float>> periodic;
  switch (mode) {
    case DisentangleMode::vary_g_fix_p: {
      global = quilt;
      Tensor<float> K = m.mlp.forward(zh);
      periodic = build_periodic_field(K, phases, spec.L, spec.M);
      break;
    }
    case DisentangleMode::fix_g_vary_p: {
      std::vector<double> zd(z_hat.begin(), z_hat.end());
      global = build_global<float>(spec, BroadcastMode{zd}, rng);  // no draws consumed
      periodic = build_periodic_field(m.mlp, quilt, phases);
      break;
    }
    case DisentangleMode::vary_both: {
      global = quilt;
      periodic = build_periodic_field(m.mlp, quilt, phases);
      break;
    }
  }
  return assemble_noise(spec, local, global, periodic);
}

inline ImageF render_disentangled(const SamplerModel& m, DisentangleMode mode, int tiles_y,
                                  int tiles_x, int delta, std::vector<double> z_hat,
                                  uint64_t seed, int chunk = 0) {
  NoiseTensor<float> z =
      build_disentangled_noise(m, mode, tiles_y, tiles_x, delta, std::move(z_hat), seed);
  StableGenerator<float> sg = StableGenerator<float>::from(m.G);
  return render_noise_field(m, sg, z.values, chunk, false);
}

// ---------------------------------------------------------------------------
// Plan (de)serialization for snapshots and --plan files.
// ---------------------------------------------------------------------------
inline std::string join_reals(const std::vector<double>& v) {
  std::string s;
  char buf[32];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", v[i]);
    if (i) s += " ";
    s += buf;
  }
  return s;
}

inline std::vector<double> split_reals(const std::string& s) {
  std::vector<double> v;
  std::istringstream is(s);
  double x;
  while (is >> x) v.push_back(x);
  return v;
}

inline KvDoc plan_to_doc(const RenderPlan& plan) {
  KvDoc doc;
  doc.set_int("plan.extent_l", plan.extent_l);
  doc.set_int("plan.extent_m", plan.extent_m);
  doc.set_int("plan.seed", static_cast<int64_t>(plan.seed));
  doc.set_int("plan.chunk", plan.chunk);
  doc.set_bool("plan.tileable", plan.tileable);
  if (const auto* bc = std::get_if<BroadcastMode>(&plan.global)) {
    doc.set("plan.global", "broadcast");
    if (!bc->z.empty()) doc.set("plan.global_z", join_reals(bc->z));
  } else if (const auto* q = std::get_if<QuiltMode>(&plan.global)) {
    doc.set("plan.global", "quilt");
    doc.set_int("plan.delta", q->delta);
  } else {
    const auto& bl = std::get<BilinearMode>(plan.global);
    doc.set("plan.global", "bilinear");
    static const char* corner_keys[4] = {"plan.corner_tl", "plan.corner_tr", "plan.corner_bl",
                                         "plan.corner_br"};
    for (int i = 0; i < 4; ++i)
      if (!bl.corners[static_cast<std::size_t>(i)].empty())
        doc.set(corner_keys[i], join_reals(bl.corners[static_cast<std::size_t>(i)]));
  }
  if (std::holds_alternative<CoupledPeriodic>(plan.periodic)) {
    doc.set("plan.periodic", "coupled");
  } else if (const auto* ov = std::get_if<OverriddenPeriodic>(&plan.periodic)) {
    doc.set("plan.periodic", "overridden");
    doc.set("plan.z_hat", join_reals(ov->z_hat));
  } else {
    const auto& ek = std::get<ExplicitK>(plan.periodic);
    doc.set("plan.periodic", "explicit");
    std::vector<double> flat;
    for (int64_t i = 0; i < ek.K.numel(); ++i) flat.push_back(ek.K[i]);
    doc.set("plan.k", join_reals(flat));
  }
  return doc;
}

inline RenderPlan plan_from_doc(const KvDoc& doc) {
  RenderPlan plan;
  plan.extent_l = static_cast<int>(doc.get_int("plan.extent_l"));
  plan.extent_m = static_cast<int>(doc.get_int("plan.extent_m"));
  plan.seed = doc.has("plan.seed") ? static_cast<uint64_t>(doc.get_int("plan.seed")) : 0;
  plan.chunk = doc.has("plan.chunk") ? static_cast<int>(doc.get_int("plan.chunk")) : 0;
  plan.tileable = doc.has("plan.tileable") ? doc.get_bool("plan.tileable") : false;
  const std::string g = doc.get_or("plan.global", "broadcast");
  if (g == "broadcast") {
    BroadcastMode bc;
    if (doc.has("plan.global_z")) bc.z = split_reals(doc.get("plan.global_z"));
    plan.global = bc;
  } else if (g == "quilt") {
    plan.global = QuiltMode{static_cast<int>(doc.get_int("plan.delta"))};
  } else if (g == "bilinear") {
    BilinearMode bl;
    static const char* corner_keys[4] = {"plan.corner_tl", "plan.corner_tr", "plan.corner_bl",
                                         "plan.corner_br"};
    for (int i = 0; i < 4; ++i)
      if (doc.has(corner_keys[i]))
        bl.corners[static_cast<std::size_t>(i)] = split_reals(doc.get(corner_keys[i]));
    plan.global = bl;
  } else {
    throw ConfigError("plan: unknown global mode '" + g + "'");
  }
  const std::string p = doc.get_or("plan.periodic", "coupled");
  if (p == "coupled") {
    plan.periodic = CoupledPeriodic{};
  } else if (p == "overridden") {
    plan.periodic = OverriddenPeriodic{split_reals(doc.get("plan.z_hat"))};
  } else if (p == "explicit") {
    std::vector<double> flat = split_reals(doc.get("plan.k"));
    if (flat.empty() || flat.size() % 2 != 0)
      throw ConfigError("plan: explicit K must have 2 x d_p entries");
    Tensor<float> K({2, static_cast<int64_t>(flat.size() / 2)});
    for (std::size_t i = 0; i < flat.size(); ++i) K[static_cast<int64_t>(i)] =
        static_cast<float>(flat[i]);
    plan.periodic = ExplicitK{std::move(K)};
  } else {
    throw ConfigError("plan: unknown periodic source '" + p + "'");
  }
  return plan;
}

}  // namespace psgan
