#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <vector>

#include "psgan/sampler.hpp"
#include "psgan/trainer.hpp"
#include "util.hpp"

using namespace psgan;

namespace {

// Freshly initialized weights are enough for sampler plumbing tests; one
// checkpoint round-trip keeps the path identical to production use.
SamplerModel tiny_model(int d_l = 2, int d_g = 2, int d_p = 2, uint64_t seed = 9) {
  RunConfig cfg;
  cfg.noise = NoiseSpec{d_l, d_g, d_p, 2, 2};
  cfg.net.depth = 2;
  cfg.net.kernel = 5;
  cfg.net.base_channels = 8;
  cfg.net.mlp_hidden = 6;
  cfg.train.minibatch = 1;
  cfg.train.patch_size = 8;
  cfg.train.seed = seed;
  TrainerState st(cfg);
  return make_sampler_model(checkpoint_from_state(st));
}

}  // namespace

TEST_CASE("sampler model restores generator and MLP parameters exactly") {
  RunConfig cfg;
  cfg.noise = NoiseSpec{2, 1, 1, 2, 2};
  cfg.net.depth = 2;
  cfg.net.base_channels = 8;
  cfg.net.mlp_hidden = 6;
  cfg.train.patch_size = 8;
  cfg.train.seed = 17;
  TrainerState st(cfg);
  SamplerModel m = make_sampler_model(checkpoint_from_state(st));

  auto gp = st.G.params();
  auto mp = m.G.params();
  REQUIRE(gp.size() == mp.size());
  for (std::size_t i = 0; i < gp.size(); ++i) {
    REQUIRE(gp[i].name == mp[i].name);
    REQUIRE(tvec(*gp[i].value) == tvec(*mp[i].value));
  }
  for (std::size_t i = 0; i < st.G.buffers().size(); ++i)
    REQUIRE(tvec(*st.G.buffers()[i].value) == tvec(*m.G.buffers()[i].value));
  REQUIRE(tvec(st.mlp.b1) == tvec(m.mlp.b1));
  REQUIRE(tvec(st.mlp.b2) == tvec(m.mlp.b2));
}

TEST_CASE("render output size is the noise extent times the upsampling factor") {
  SamplerModel m = tiny_model();
  RenderPlan plan;
  plan.extent_l = 3;
  plan.extent_m = 5;
  plan.seed = 4;
  ImageF img = render(m, plan);
  REQUIRE(img.h == 12);  // 3 * 2^2
  REQUIRE(img.w == 20);
  for (float v : img.rgb) {
    REQUIRE(v >= -1.0f);
    REQUIRE(v <= 1.0f);
  }

  ImageF again = render(m, plan);
  REQUIRE(again.rgb == img.rgb);

  RenderPlan other = plan;
  other.seed = 5;
  REQUIRE(render(m, other).rgb != img.rgb);
}

TEST_CASE("chunked rendering is bitwise identical to a single pass") {
  SamplerModel m = tiny_model();
  REQUIRE(min_chunk_extent(m.net) == 4);  // 13-pixel footprint over 4x upsampling

  RenderPlan plan;
  plan.extent_l = 9;
  plan.extent_m = 7;
  plan.seed = 123;
  ImageF whole = render(m, plan);

  for (int chunk : {4, 5, 9}) {
    RenderPlan c = plan;
    c.chunk = chunk;
    REQUIRE(render(m, c).rgb == whole.rgb);
  }

  RenderPlan bad = plan;
  bad.chunk = 3;
  REQUIRE_THROWS_AS(render(m, bad), ConfigError);
}

TEST_CASE("plan validation rejects inconsistent requests") {
  SamplerModel m = tiny_model(/*d_l=*/2, /*d_g=*/2, /*d_p=*/2);
  SamplerModel no_g = tiny_model(/*d_l=*/2, /*d_g=*/0, /*d_p=*/1);

  RenderPlan plan;
  plan.extent_l = 0;
  REQUIRE_THROWS_AS(render(m, plan), ConfigError);

  RenderPlan quilt;
  quilt.global = QuiltMode{2};
  quilt.extent_l = quilt.extent_m = 4;
  REQUIRE_THROWS_AS(render(no_g, quilt), ConfigError);

  RenderPlan ov;
  ov.periodic = OverriddenPeriodic{{0.1}};  // wrong length: d_g = 2
  REQUIRE_THROWS_AS(render(m, ov), ConfigError);

  RenderPlan ek;
  ek.periodic = ExplicitK{Tensor<float>({2, 5})};  // wrong d_p
  REQUIRE_THROWS_AS(render(m, ek), ConfigError);

  RenderPlan tq;
  tq.tileable = true;
  tq.global = QuiltMode{2};
  tq.extent_l = tq.extent_m = 4;
  REQUIRE_THROWS_AS(render(m, tq), ConfigError);
}

TEST_CASE("one-tile quilt degenerates to a broadcast render") {
  SamplerModel m = tiny_model();
  ImageF q = render_quilt(m, 1, 1, 4, /*seed=*/77);

  RenderPlan plan;
  plan.extent_l = plan.extent_m = 4;
  plan.global = BroadcastMode{};
  plan.seed = 77;
  ImageF b = render(m, plan);
  REQUIRE(q.rgb == b.rgb);

  REQUIRE_THROWS_AS(render_quilt(m, 0, 1, 4, 0), ConfigError);
  REQUIRE_THROWS_AS(render_quilt(m, 1, 1, 0, 0), ConfigError);
}

TEST_CASE("morphing between identical corners is a plain broadcast render") {
  SamplerModel m = tiny_model();
  const std::vector<double> v{0.25, -0.5};
  ImageF morph = render_morph(m, {v, v, v, v}, 4, 4, /*seed=*/5);

  RenderPlan plan;
  plan.extent_l = plan.extent_m = 4;
  plan.global = BroadcastMode{v};
  plan.seed = 5;
  ImageF flat = render(m, plan);
  REQUIRE(morph.rgb == flat.rgb);

  SamplerModel no_g = tiny_model(2, 0, 1);
  REQUIRE_THROWS_AS(render_morph(no_g, {v, v, v, v}, 4, 4, 5), ConfigError);
}

TEST_CASE("disentangled rendering recombines the documented draw sequence") {
  SamplerModel m = tiny_model();
  const int ty = 2, tx = 3, delta = 2;
  const uint64_t seed = 31;
  const std::vector<double> z_hat{0.6, -0.2};

  // replicate the shared draw sequence: local, quilted global, phases
  NoiseSpec spec = m.noise;
  spec.L = ty * delta;
  spec.M = tx * delta;
  Rng rng(seed);
  Tensor<float> local = build_local<float>(spec, rng);
  GlobalField<float> quilt = build_global<float>(spec, QuiltMode{delta}, rng);
  std::vector<float> phases = sample_phases<float>(spec.d_p, rng);
  std::vector<float> zh(z_hat.begin(), z_hat.end());

  SECTION("vary_g_fix_p quilts the global field under one fixed wave") {
    NoiseTensor<float> z =
        build_disentangled_noise(m, DisentangleMode::vary_g_fix_p, ty, tx, delta, z_hat, seed);
    auto expect_p = build_periodic_field(m.mlp.forward(zh), phases, spec.L, spec.M);
    for (int l = 0; l < spec.L; ++l)
      for (int mu = 0; mu < spec.M; ++mu) {
        for (int c = 0; c < spec.d_g; ++c)
          REQUIRE(z.at(l, mu, spec.d_l + c) == quilt.values.at(c, l, mu));
        for (int c = 0; c < spec.d_p; ++c)
          REQUIRE(z.at(l, mu, spec.d_l + spec.d_g + c) == expect_p.values.at(c, l, mu));
      }
  }

  SECTION("fix_g_vary_p holds the global vector and quilts the waves") {
    NoiseTensor<float> z =
        build_disentangled_noise(m, DisentangleMode::fix_g_vary_p, ty, tx, delta, z_hat, seed);
    auto expect_p = build_periodic_field(m.mlp, quilt, phases);
    REQUIRE(expect_p.spatially_varying);
    for (int l = 0; l < spec.L; ++l)
      for (int mu = 0; mu < spec.M; ++mu) {
        for (int c = 0; c < spec.d_g; ++c)
          REQUIRE(z.at(l, mu, spec.d_l + c) == static_cast<float>(z_hat[c]));
        for (int c = 0; c < spec.d_p; ++c)
          REQUIRE(z.at(l, mu, spec.d_l + spec.d_g + c) == expect_p.values.at(c, l, mu));
      }
  }

  SECTION("vary_both quilts global field and waves together") {
    NoiseTensor<float> z =
        build_disentangled_noise(m, DisentangleMode::vary_both, ty, tx, delta, z_hat, seed);
    auto expect_p = build_periodic_field(m.mlp, quilt, phases);
    for (int l = 0; l < spec.L; ++l)
      for (int mu = 0; mu < spec.M; ++mu) {
        for (int c = 0; c < spec.d_g; ++c)
          REQUIRE(z.at(l, mu, spec.d_l + c) == quilt.values.at(c, l, mu));
        for (int c = 0; c < spec.d_p; ++c)
          REQUIRE(z.at(l, mu, spec.d_l + spec.d_g + c) == expect_p.values.at(c, l, mu));
      }
  }

  SECTION("local channels are shared across modes") {
    auto za = build_disentangled_noise(m, DisentangleMode::vary_g_fix_p, ty, tx, delta, z_hat, seed);
    auto zb = build_disentangled_noise(m, DisentangleMode::fix_g_vary_p, ty, tx, delta, z_hat, seed);
    for (int l = 0; l < spec.L; ++l)
      for (int mu = 0; mu < spec.M; ++mu)
        for (int c = 0; c < spec.d_l; ++c) REQUIRE(za.at(l, mu, c) == zb.at(l, mu, c));
  }

  SECTION("rejections") {
    SamplerModel no_p = tiny_model(2, 2, 0);
    REQUIRE_THROWS_AS(
        build_disentangled_noise(no_p, DisentangleMode::vary_both, 2, 2, 2, {}, 0),
        ConfigError);
    REQUIRE_THROWS_AS(
        build_disentangled_noise(m, DisentangleMode::vary_both, 0, 2, 2, {}, 0), ConfigError);
    REQUIRE_THROWS_AS(
        build_disentangled_noise(m, DisentangleMode::vary_both, 2, 2, 2, {0.1}, 0),
        ConfigError);
    REQUIRE_THROWS_AS(parse_disentangle_mode("sideways"), ConfigError);
    REQUIRE(parse_disentangle_mode("vary_g_fix_p") == DisentangleMode::vary_g_fix_p);
    REQUIRE(parse_disentangle_mode("fix_g_vary_p") == DisentangleMode::fix_g_vary_p);
    REQUIRE(parse_disentangle_mode("vary_both") == DisentangleMode::vary_both);
  }

  SECTION("rendered image matches rendering the assembled noise directly") {
    NoiseTensor<float> z =
        build_disentangled_noise(m, DisentangleMode::vary_both, ty, tx, delta, z_hat, seed);
    StableGenerator<float> sg = StableGenerator<float>::from(m.G);
    ImageF direct = render_noise_field(m, sg, z.values, 0, false);
    ImageF via = render_disentangled(m, DisentangleMode::vary_both, ty, tx, delta, z_hat, seed);
    REQUIRE(via.rgb == direct.rgb);
  }
}

TEST_CASE("tileable rendering snaps wave-numbers and tiles exactly") {
  SamplerModel m = tiny_model();
  const int ext = 8;

  RenderPlan plan;
  plan.extent_l = plan.extent_m = ext;
  plan.seed = 13;
  plan.tileable = true;

  NoiseTensor<float> z = build_render_noise(m, plan);
  REQUIRE(z.periodic_src.has_value());
  const double base = 2.0 * M_PI / ext;
  RenderPlan free_plan = plan;
  free_plan.tileable = false;
  NoiseTensor<float> zf = build_render_noise(m, free_plan);
  for (int i = 0; i < m.noise.d_p; ++i)
    for (int r = 0; r < 2; ++r) {
      const double k = z.periodic_src->K.at(r, i);
      const double cycles = k / base;
      // exact integer number of wave cycles across the tile
      REQUIRE(std::abs(cycles - std::round(cycles)) < 1e-5);
      // snapping moved each component by at most half the grid spacing
      REQUIRE(std::abs(k - zf.periodic_src->K.at(r, i)) <= 0.5 * base + 1e-6);
    }
  // phases survive the snap untouched
  REQUIRE(z.periodic_src->phases == zf.periodic_src->phases);

  // the rendered texture repeats: the window one period to the right (and
  // below) reproduces the image bitwise
  ImageF img = render_tileable(m, ext, ext, plan.seed);
  const int up = upsample_factor(m.net);
  const int64_t H = static_cast<int64_t>(ext) * up, W = static_cast<int64_t>(ext) * up;
  REQUIRE(img.h == H);
  REQUIRE(img.w == W);
  StableGenerator<float> sg = StableGenerator<float>::from(m.G);
  Tensor<float> right = sg.render_region(z.values, Rect{0, H, W, 2 * W}, /*wrap=*/true);
  Tensor<float> below = sg.render_region(z.values, Rect{H, 2 * H, 0, W}, /*wrap=*/true);
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x)
      for (int64_t c = 0; c < 3; ++c) {
        REQUIRE(img.at(static_cast<int>(y), static_cast<int>(x), static_cast<int>(c)) ==
                right.at(y, x, c));
        REQUIRE(img.at(static_cast<int>(y), static_cast<int>(x), static_cast<int>(c)) ==
                below.at(y, x, c));
      }

  // chunked tileable rendering agrees with the single pass
  ImageF chunked = render_tileable(m, ext, ext, plan.seed, /*chunk=*/4);
  REQUIRE(chunked.rgb == img.rgb);
}

TEST_CASE("render plans serialize to text and back") {
  auto roundtrip = [](const RenderPlan& plan) {
    KvDoc doc = plan_to_doc(plan);
    KvDoc parsed;
    std::istringstream is(doc.str());
    parsed.parse(is);
    RenderPlan back = plan_from_doc(parsed);
    REQUIRE(plan_to_doc(back).str() == doc.str());
  };

  RenderPlan a;
  a.extent_l = 3;
  a.extent_m = 9;
  a.seed = 42;
  a.chunk = 5;
  roundtrip(a);

  RenderPlan b;
  b.global = BroadcastMode{{0.5, -0.25, 1.0 / 3.0}};
  b.periodic = OverriddenPeriodic{{0.125, -0.75, 0.875}};
  roundtrip(b);

  RenderPlan c;
  c.global = QuiltMode{7};
  c.tileable = true;
  roundtrip(c);

  RenderPlan d;
  d.global = BilinearMode{{{{0.1, 0.2}, {0.3, 0.4}, {-0.5, 0.5}, {1.0, -1.0}}}};
  Tensor<float> K({2, 2});
  K.at(0, 0) = 0.5f;
  K.at(1, 0) = -0.25f;
  K.at(0, 1) = 1.5f;
  K.at(1, 1) = 0.0f;
  d.periodic = ExplicitK{K};
  roundtrip(d);

  REQUIRE(split_reals(join_reals({0.1, -2.5e-17, 3.0})) ==
          std::vector<double>({0.1, -2.5e-17, 3.0}));
}

TEST_CASE("chunked rendering needs far less tensor memory than a single pass") {
  SamplerModel m = tiny_model();

  auto peak_for = [&](int extent, int chunk) {
    RenderPlan plan;
    plan.extent_l = plan.extent_m = extent;
    plan.seed = 3;
    plan.chunk = chunk;
    MemStats::reset_peak();
    const std::size_t before = MemStats::peak().load();
    render(m, plan);
    return MemStats::peak().load() - before;
  };

  // a monolithic pass materializes full-resolution feature maps; chunked
  // passes only ever hold one small pyramid plus the (cheap) noise field
  const std::size_t mono = peak_for(32, 0);
  const std::size_t chunked = peak_for(32, 4);
  REQUIRE(chunked * 2 <= mono);
}
