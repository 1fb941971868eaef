#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "psgan/adam.hpp"
#include "psgan/checkpoint.hpp"
#include "psgan/data.hpp"
#include "psgan/errors.hpp"
#include "psgan/loss.hpp"
#include "psgan/net.hpp"
#include "psgan/noise.hpp"

namespace psgan {

template <typename T>
std::vector<ParamRef<T>> mlp_params(WaveNumberMLP<T>& m) {
  std::vector<ParamRef<T>> out;
  auto add = [&](const char* n, Tensor<T>& v, Tensor<T>& g) {
    if (v.numel() > 0) out.push_back({n, &v, &g});
  };
  add("mlp.W", m.W, m.gW);
  add("mlp.b", m.b, m.gb);
  add("mlp.W1", m.W1, m.gW1);
  add("mlp.W2", m.W2, m.gW2);
  add("mlp.b1", m.b1, m.gb1);
  add("mlp.b2", m.b2, m.gb2);
  return out;
}

// One minibatch of assembled noise plus the per-sample structured sources
// needed to push gradients from the periodic channels back into the MLP.
template <typename T>
struct TrainingBatch {
  Tensor<T> z;  // (N, d, L, M)
  std::vector<std::vector<T>> z_g;
  std::vector<Tensor<T>> K;
  std::vector<std::vector<T>> phases;
};

// Per sample, in draw order: local field, one z^g (broadcast), phases.
template <typename T>
TrainingBatch<T> make_training_batch(const NoiseSpec& spec, const WaveNumberMLP<T>& mlp,
                                     int batch, Rng& rng) {
  if (batch < 1) throw std::invalid_argument("make_training_batch: batch must be >= 1");
  spec.validate();
  if (spec.d_p > 0 && mlp.d_p != spec.d_p)
    throw std::invalid_argument("make_training_batch: MLP/noise d_p mismatch");
  TrainingBatch<T> tb;
  tb.z = Tensor<T>({batch, spec.d(), spec.L, spec.M});
  const int64_t sample_sz = static_cast<int64_t>(spec.d()) * spec.L * spec.M;
  for (int s = 0; s < batch; ++s) {
    Tensor<T> local = build_local<T>(spec, rng);
    std::optional<GlobalField<T>> global;
    std::vector<T> z_g;
    if (spec.d_g > 0) {
      global = build_global<T>(spec, BroadcastMode{}, rng);
      z_g = global->column(0, 0);
    }
    std::optional<PeriodicField<T>> periodic;
    if (spec.d_p > 0) {
      Tensor<T> K = mlp.forward(z_g);
      std::vector<T> phases = sample_phases<T>(spec.d_p, rng);
      periodic = build_periodic_field(K, phases, spec.L, spec.M);
      tb.K.push_back(std::move(K));
      tb.phases.push_back(std::move(phases));
    }
    NoiseTensor<T> z = assemble_noise(spec, local, global, periodic);
    std::memcpy(tb.z.data() + s * sample_sz, z.values.data(),
                sizeof(T) * static_cast<std::size_t>(sample_sz));
    tb.z_g.push_back(std::move(z_g));
  }
  return tb;
}

struct TrainMetrics {
  int64_t step = 0;
  double d_loss = 0, g_loss = 0, d_real_mean = 0, d_fake_mean = 0;

  std::string line() const {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "step=%lld d_loss=%.17g g_loss=%.17g d_real_mean=%.17g d_fake_mean=%.17g",
                  static_cast<long long>(step), d_loss, g_loss, d_real_mean, d_fake_mean);
    return buf;
  }
};

struct TrainerState {
  RunConfig cfg;
  Generator<float> G;
  Discriminator<float> D;
  WaveNumberMLP<float> mlp;
  Adam<float> opt_d, opt_g;
  Rng rng;
  int64_t step = 0;

  explicit TrainerState(const RunConfig& c)
      : cfg(c), G(c.net, c.noise.d()), D(c.net), rng(static_cast<uint64_t>(c.train.seed)) {
    cfg.validate(/*require_data=*/false);
    // parameter draw order: generator, discriminator, wave-number MLP
    G.init(rng);
    D.init(rng);
    if (cfg.noise.d_p > 0) mlp = init_wavenumber_mlp<float>(cfg.noise, cfg.net.mlp_hidden, rng);
    opt_d.lr = opt_g.lr = cfg.train.learning_rate;
    opt_d.beta1 = opt_g.beta1 = cfg.train.adam_beta1;
    opt_d.beta2 = opt_g.beta2 = cfg.train.adam_beta2;
    opt_d.attach(D.params());
    std::vector<ParamRef<float>> gp = G.params();
    for (auto& p : mlp_params(mlp)) gp.push_back(p);
    opt_g.attach(std::move(gp));
  }

  TrainerState(const TrainerState&) = delete;
  TrainerState& operator=(const TrainerState&) = delete;
};

inline Tensor<float> slice_sample_channels(const Tensor<float>& batch, int sample, int c0,
                                           int c1) {
  const int64_t L = batch.dim(2), M = batch.dim(3);
  Tensor<float> out({c1 - c0, L, M});
  for (int c = c0; c < c1; ++c)
    std::memcpy(out.data() + static_cast<int64_t>(c - c0) * L * M,
                batch.data() + ((static_cast<int64_t>(sample) * batch.dim(1) + c) * L * M),
                sizeof(float) * static_cast<std::size_t>(L * M));
  return out;
}

inline TrainMetrics train_step(TrainerState& st, const Tensor<float>& real) {
  const auto& cfg = st.cfg;
  if (real.ndim() != 4 || real.dim(1) != 3)
    throw std::invalid_argument("train_step: real batch must be (N, 3, H, W)");
  const int N = static_cast<int>(real.dim(0));
  const int64_t ps = real.dim(2);
  if (ps != cfg.train.patch_size || real.dim(3) != cfg.train.patch_size)
    throw std::invalid_argument("train_step: patch size mismatch");

  // --- discriminator update ---------------------------------------------
  TrainingBatch<float> bd = make_training_batch(cfg.noise, st.mlp, N, st.rng);
  Tensor<float> fake = st.G.forward(bd.z, /*training=*/true, /*keep_for_backward=*/false);
  // Real and fake are scored in separate passes so that batch norm, when
  // enabled, normalizes each population by its own statistics; without batch
  // norm this is equivalent to scoring one concatenated batch.
  st.D.zero_grad();
  Tensor<float> d_real = st.D.forward(real, /*training=*/true);
  st.D.backward(discriminator_real_grad(d_real));
  Tensor<float> d_fake = st.D.forward(fake, /*training=*/true);
  st.D.backward(discriminator_fake_grad(d_fake));
  const double dl = discriminator_loss(d_fake, d_real);
  if (!std::isfinite(dl))
    throw DivergenceError("non-finite discriminator loss at step " +
                          std::to_string(st.step + 1));
  st.opt_d.step();

  double d_real_mean = 0, d_fake_mean = 0;
  for (int64_t i = 0; i < d_real.numel(); ++i) d_real_mean += d_real[i];
  for (int64_t i = 0; i < d_fake.numel(); ++i) d_fake_mean += d_fake[i];
  d_real_mean /= static_cast<double>(d_real.numel());
  d_fake_mean /= static_cast<double>(d_fake.numel());

  // --- generator + MLP update (fresh noise) ------------------------------
  TrainingBatch<float> bg = make_training_batch(cfg.noise, st.mlp, N, st.rng);
  Tensor<float> fake2 = st.G.forward(bg.z, /*training=*/true);
  Tensor<float> dfake2 = st.D.forward(fake2, /*training=*/true);
  const double gl = generator_loss(dfake2);
  if (!std::isfinite(gl))
    throw DivergenceError("non-finite generator loss at step " + std::to_string(st.step + 1));
  Tensor<float> dgf = generator_loss_grad(dfake2);
  st.D.zero_grad();  // gradients w.r.t. D params are discarded in this pass
  Tensor<float> dximg = st.D.backward(dgf);
  st.G.zero_grad();
  Tensor<float> dz = st.G.backward(dximg);
  if (cfg.noise.d_p > 0) {
    st.mlp.zero_grad();
    const int c0 = cfg.noise.d_l + cfg.noise.d_g;
    for (int s = 0; s < N; ++s) {
      Tensor<float> dvals = slice_sample_channels(dz, s, c0, c0 + cfg.noise.d_p);
      Tensor<float> dK = periodic_field_backward(bg.K[static_cast<std::size_t>(s)],
                                                 bg.phases[static_cast<std::size_t>(s)], dvals);
      st.mlp.backward(bg.z_g[static_cast<std::size_t>(s)], dK);
    }
  }
  st.opt_g.step();

  ++st.step;
  return {st.step, dl, gl, d_real_mean, d_fake_mean};
}

// ---------------------------------------------------------------------------
// Checkpoint <-> state
// ---------------------------------------------------------------------------
inline Checkpoint checkpoint_from_state(TrainerState& st) {
  Checkpoint ck;
  ck.config = st.cfg;
  ck.step = st.step;
  ck.rng_state = st.rng.state();
  ck.opt_t_d = st.opt_d.t;
  ck.opt_t_g = st.opt_g.t;
  auto put = [&](const std::string& name, const Tensor<float>& t) {
    ck.tensors.emplace(name, t);
  };
  for (auto& p : st.G.params()) put(p.name, *p.value);
  for (auto& b : st.G.buffers()) put(b.name, *b.value);
  for (auto& p : st.D.params()) put(p.name, *p.value);
  for (auto& b : st.D.buffers()) put(b.name, *b.value);
  for (auto& p : mlp_params(st.mlp)) put(p.name, *p.value);
  for (std::size_t i = 0; i < st.opt_d.params.size(); ++i) {
    put("opt_d." + st.opt_d.params[i].name + ".m", st.opt_d.m[i]);
    put("opt_d." + st.opt_d.params[i].name + ".v", st.opt_d.v[i]);
  }
  for (std::size_t i = 0; i < st.opt_g.params.size(); ++i) {
    put("opt_g." + st.opt_g.params[i].name + ".m", st.opt_g.m[i]);
    put("opt_g." + st.opt_g.params[i].name + ".v", st.opt_g.v[i]);
  }
  return ck;
}

inline std::unique_ptr<TrainerState> state_from_checkpoint(const Checkpoint& ck) {
  auto st = std::make_unique<TrainerState>(ck.config);
  for (auto& p : st->G.params()) copy_named_tensor(ck, p.name, *p.value);
  for (auto& b : st->G.buffers()) copy_named_tensor(ck, b.name, *b.value);
  for (auto& p : st->D.params()) copy_named_tensor(ck, p.name, *p.value);
  for (auto& b : st->D.buffers()) copy_named_tensor(ck, b.name, *b.value);
  for (auto& p : mlp_params(st->mlp)) copy_named_tensor(ck, p.name, *p.value);
  for (std::size_t i = 0; i < st->opt_d.params.size(); ++i) {
    copy_named_tensor(ck, "opt_d." + st->opt_d.params[i].name + ".m", st->opt_d.m[i]);
    copy_named_tensor(ck, "opt_d." + st->opt_d.params[i].name + ".v", st->opt_d.v[i]);
  }
  for (std::size_t i = 0; i < st->opt_g.params.size(); ++i) {
    copy_named_tensor(ck, "opt_g." + st->opt_g.params[i].name + ".m", st->opt_g.m[i]);
    copy_named_tensor(ck, "opt_g." + st->opt_g.params[i].name + ".v", st->opt_g.v[i]);
  }
  st->opt_d.t = ck.opt_t_d;
  st->opt_g.t = ck.opt_t_g;
  st->step = ck.step;
  st->rng.set_state(ck.rng_state);
  return st;
}

// ---------------------------------------------------------------------------
// Training loop. Per step, in rng order: real patches, D noise, G noise.
// ---------------------------------------------------------------------------
inline void save_run_checkpoint(TrainerState& st, const std::string& dir) {
  Checkpoint ck = checkpoint_from_state(st);
  char name[64];
  std::snprintf(name, sizeof name, "checkpoint-%06lld.ckpt", static_cast<long long>(st.step));
  save_checkpoint((std::filesystem::path(dir) / name).string(), ck);
  save_checkpoint((std::filesystem::path(dir) / "latest.ckpt").string(), ck);
}

inline void train(TrainerState& st, const ImageSource& src, std::ostream* metrics,
                  const std::string& checkpoint_dir) {
  const auto& tc = st.cfg.train;
  if (src.images.empty()) throw ConfigError("train: empty image source");
  if (!checkpoint_dir.empty() && st.step == 0) save_run_checkpoint(st, checkpoint_dir);
  while (st.step < tc.steps) {
    Tensor<float> real =
        sample_patch_batch<float>(src, tc.patch_size, tc.minibatch, st.rng);
    TrainMetrics m = train_step(st, real);
    if (metrics && (tc.log_every <= 1 || m.step % tc.log_every == 0 || m.step == tc.steps))
      *metrics << m.line() << "\n";
    if (!checkpoint_dir.empty() && tc.checkpoint_every > 0 &&
        m.step % tc.checkpoint_every == 0)
      save_run_checkpoint(st, checkpoint_dir);
  }
  if (!checkpoint_dir.empty() &&
      (tc.checkpoint_every <= 0 || st.step % tc.checkpoint_every != 0 || st.step == 0))
    if (st.step > 0) save_run_checkpoint(st, checkpoint_dir);
}

}  // namespace psgan
