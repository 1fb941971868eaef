// psgan: train and sample periodic spatial texture GANs.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "psgan/data.hpp"
#include "psgan/eval.hpp"
#include "psgan/image.hpp"
#include "psgan/sampler.hpp"
#include "psgan/trainer.hpp"

namespace fs = std::filesystem;
using namespace psgan;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string preset;
  std::vector<std::string> overrides;
  std::optional<uint64_t> seed;
  std::string out;
};

void add_config_opts(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "run config file (key = value lines)");
  cmd->add_option("--preset", o.preset, "named preset configuration");
  cmd->add_option("--override", o.overrides, "config override key=value (repeatable)");
}

RunConfig resolve_config(const CommonOpts& o) {
  if (!o.config_path.empty() && !o.preset.empty())
    throw ConfigError("pass either --config or --preset, not both");
  RunConfig cfg;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw IoError("cannot open config file: " + o.config_path);
    KvDoc doc;
    doc.parse(in);
    cfg = RunConfig::from_doc(doc);
  } else if (!o.preset.empty()) {
    cfg = preset_config(o.preset);
  } else {
    throw ConfigError("one of --config or --preset is required");
  }
  for (const auto& kv : o.overrides) cfg.apply_override(kv);
  if (o.seed) cfg.train.seed = *o.seed;
  return cfg;
}

Checkpoint load_checkpoint_file(const std::string& path) {
  if (path.empty()) throw ConfigError("--checkpoint is required");
  return load_checkpoint(path);
}

void write_image(const ImageF& img, const std::string& path) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  save_png(path, denormalize(img));
}

void write_plan_snapshot(const RenderPlan& plan, const std::string& ckpt,
                         const std::string& image_path) {
  KvDoc doc = plan_to_doc(plan);
  doc.set("plan.checkpoint", ckpt);
  std::ofstream out(image_path + ".plan.txt");
  if (!out) throw IoError("cannot write plan snapshot next to " + image_path);
  doc.write(out);
}

std::pair<int, int> parse_size(const std::string& s, const char* what) {
  std::size_t x = s.find('x');
  if (x == std::string::npos || x == 0 || x + 1 >= s.size())
    throw ConfigError(std::string(what) + " must look like LxM, got: " + s);
  try {
    int a = std::stoi(s.substr(0, x));
    int b = std::stoi(s.substr(x + 1));
    if (a < 1 || b < 1) throw std::invalid_argument("");
    return {a, b};
  } catch (...) {
    throw ConfigError(std::string(what) + " must be two positive integers LxM, got: " + s);
  }
}

std::string default_run_dir(const RunConfig& cfg) { return "runs/" + cfg.name; }

void write_config_snapshot(const RunConfig& cfg, const fs::path& dir) {
  KvDoc doc;
  cfg.to_doc(doc);
  std::ofstream out(dir / "config.txt");
  if (!out) throw IoError("cannot write config snapshot in " + dir.string());
  doc.write(out);
}

int run_training(TrainerState& st, const ImageSource& src, const fs::path& dir, bool fresh) {
  fs::create_directories(dir);
  write_config_snapshot(st.cfg, dir);
  std::ofstream metrics(dir / "metrics.txt", fresh ? std::ios::trunc : std::ios::app);
  if (!metrics) throw IoError("cannot open metrics log in " + dir.string());
  train(st, src, &metrics, dir.string());
  std::cout << "run directory: " << dir.string() << "\n";
  return 0;
}

int cmd_train(const CommonOpts& o) {
  RunConfig cfg = resolve_config(o);
  cfg.validate();
  // load data before creating the run directory so a bad path leaves nothing behind
  ImageSource src = load_source(cfg.data, cfg.train.patch_size);
  fs::path dir = o.out.empty() ? fs::path(default_run_dir(cfg)) : fs::path(o.out);
  TrainerState st(cfg);
  return run_training(st, src, dir, /*fresh=*/true);
}

int cmd_resume(const CommonOpts& o, const std::string& run_dir, const std::string& ckpt_path) {
  fs::path dir = run_dir.empty() ? fs::path(o.out) : fs::path(run_dir);
  if (dir.empty()) throw ConfigError("resume needs a run directory");
  fs::path ck_file = ckpt_path.empty() ? dir / "latest.ckpt" : fs::path(ckpt_path);
  Checkpoint ck = load_checkpoint_file(ck_file.string());
  for (const auto& kv : o.overrides) ck.config.apply_override(kv);
  std::unique_ptr<TrainerState> st = state_from_checkpoint(ck);
  ImageSource src = load_source(st->cfg.data, st->cfg.train.patch_size);
  return run_training(*st, src, dir, /*fresh=*/false);
}

int cmd_sample(const CommonOpts& o, const std::string& ckpt, const std::string& size, int chunk) {
  Checkpoint ck = load_checkpoint_file(ckpt);
  SamplerModel m = make_sampler_model(ck);
  RenderPlan plan;
  auto [l, mm] = size.empty() ? std::pair<int, int>{m.noise.L, m.noise.M}
                              : parse_size(size, "--size");
  plan.extent_l = l;
  plan.extent_m = mm;
  plan.seed = o.seed.value_or(0);
  plan.chunk = chunk;
  ImageF img = render(m, plan);
  std::string path = o.out.empty() ? "sample.png" : o.out;
  write_image(img, path);
  write_plan_snapshot(plan, ckpt, path);
  std::cout << path << " (" << img.w << "x" << img.h << ")\n";
  return 0;
}

int cmd_quilt(const CommonOpts& o, const std::string& ckpt, const std::string& tiles, int delta,
              int chunk) {
  Checkpoint ck = load_checkpoint_file(ckpt);
  SamplerModel m = make_sampler_model(ck);
  auto [ty, tx] = parse_size(tiles, "--tiles");
  RenderPlan plan;
  plan.extent_l = ty * delta;
  plan.extent_m = tx * delta;
  plan.global = QuiltMode{delta};
  plan.seed = o.seed.value_or(0);
  plan.chunk = chunk;
  ImageF img = render(m, plan);
  std::string path = o.out.empty() ? "quilt.png" : o.out;
  write_image(img, path);
  write_plan_snapshot(plan, ckpt, path);
  std::cout << path << " (" << img.w << "x" << img.h << ")\n";
  return 0;
}

std::array<std::vector<double>, 4> parse_corners(const std::vector<std::string>& specs) {
  std::array<std::vector<double>, 4> corners;
  for (std::size_t i = 0; i < specs.size() && i < 4; ++i)
    if (!specs[i].empty()) corners[i] = split_reals(specs[i]);
  return corners;
}

int cmd_morph(const CommonOpts& o, const std::string& ckpt, const std::string& size,
              const std::vector<std::string>& corner_specs, int chunk) {
  Checkpoint ck = load_checkpoint_file(ckpt);
  SamplerModel m = make_sampler_model(ck);
  auto [l, mm] = parse_size(size.empty() ? "50x50" : size, "--size");
  RenderPlan plan;
  plan.extent_l = l;
  plan.extent_m = mm;
  plan.global = BilinearMode{parse_corners(corner_specs)};
  plan.seed = o.seed.value_or(0);
  plan.chunk = chunk;
  ImageF img = render(m, plan);
  std::string path = o.out.empty() ? "morph.png" : o.out;
  write_image(img, path);
  write_plan_snapshot(plan, ckpt, path);
  std::cout << path << " (" << img.w << "x" << img.h << ")\n";
  return 0;
}

int cmd_disentangle(const CommonOpts& o, const std::string& ckpt, const std::string& mode_s,
                    const std::string& tiles, int delta, const std::string& z_hat_s, int chunk) {
  Checkpoint ck = load_checkpoint_file(ckpt);
  SamplerModel m = make_sampler_model(ck);
  DisentangleMode mode = parse_disentangle_mode(mode_s);
  auto [ty, tx] = parse_size(tiles, "--tiles");
  std::vector<double> z_hat = z_hat_s.empty() ? std::vector<double>{} : split_reals(z_hat_s);
  ImageF img = render_disentangled(m, mode, ty, tx, delta, z_hat, o.seed.value_or(0), chunk);
  std::string path = o.out.empty() ? "disentangle.png" : o.out;
  write_image(img, path);
  std::cout << path << " (" << img.w << "x" << img.h << ")\n";
  return 0;
}

int cmd_tile(const CommonOpts& o, const std::string& ckpt, const std::string& size, int chunk) {
  Checkpoint ck = load_checkpoint_file(ckpt);
  SamplerModel m = make_sampler_model(ck);
  auto [l, mm] = size.empty() ? std::pair<int, int>{m.noise.L, m.noise.M}
                              : parse_size(size, "--size");
  ImageF img = render_tileable(m, l, mm, o.seed.value_or(0), chunk);
  std::string path = o.out.empty() ? "tile.png" : o.out;
  write_image(img, path);
  std::cout << path << " (" << img.w << "x" << img.h << ")\n";
  return 0;
}

int cmd_eval(const CommonOpts& o, const std::string& ckpt, const std::string& image_path,
             const std::string& size, int max_lag, double threshold) {
  Checkpoint ck = load_checkpoint_file(ckpt);
  SamplerModel m = make_sampler_model(ck);
  std::string prefix = o.out.empty() ? "eval" : o.out;
  fs::path pp(prefix);
  if (pp.has_parent_path()) fs::create_directories(pp.parent_path());

  if (m.noise.d_p == 0) {
    ConsistencyReport rep;
    rep.aperiodic = true;
    std::ofstream out(prefix + ".report.txt");
    out << rep.to_text();
    std::cout << "aperiodic model (no periodic noise channels)\n" << rep.to_text();
    return 0;
  }

  RenderPlan plan;
  auto [l, mm] = parse_size(size.empty() ? "16x16" : size, "--size");
  plan.extent_l = l;
  plan.extent_m = mm;
  plan.seed = o.seed.value_or(0);
  NoiseTensor<float> z = build_render_noise(m, plan);
  std::vector<float> z_g;
  if (m.noise.d_g > 0 && z.global_src) {
    for (int c = 0; c < m.noise.d_g; ++c) z_g.push_back(z.global_src->values.at(c, 0, 0));
  }
  ImageF img;
  if (!image_path.empty()) {
    img = normalize(load_image(image_path));
  } else {
    StableGenerator<float> sg = StableGenerator<float>::from(m.G);
    img = render_noise_field(m, sg, z.values, plan.chunk, false);
  }
  if (max_lag == 0) max_lag = std::min(img.h, img.w) / 4;
  ConsistencyReport rep = wavenumber_consistency(m, z_g, img, max_lag, threshold);
  std::ofstream out(prefix + ".report.txt");
  if (!out) throw IoError("cannot write report " + prefix + ".report.txt");
  out << rep.to_text();
  std::cout << rep.to_text();

  if (!rep.aperiodic) {
    AutocorrMap map = autocorrelation(img, max_lag);
    std::vector<std::array<double, 2>> vecs;
    for (const auto& mt : rep.matches) vecs.push_back(mt.period_vec);
    save_png(prefix + ".heatmap.png", autocorr_heatmap(map, vecs));
  }
  return 0;
}

int cmd_fixtures(const CommonOpts& o, const std::string& desc, int size) {
  Rng rng(o.seed.value_or(0));
  ImageF img = synth_texture(desc, size, rng);
  std::string path = o.out.empty() ? "fixture.png" : o.out;
  write_image(img, path);
  std::cout << path << " (" << img.w << "x" << img.h << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"periodic spatial texture GAN toolkit"};
  app.require_subcommand(1);

  CommonOpts o;
  std::string ckpt, size, tiles = "2x2", mode_s = "vary_g_fix_p", image_path, run_dir,
              resume_ckpt, desc = "stripes(16,45)", z_hat_s;
  std::vector<std::string> corner_specs;
  int chunk = 0, delta = 15, max_lag = 0, fixture_size = 256;
  double threshold = 0.2;

  auto add_common = [&](CLI::App* cmd, bool with_seed = true) {
    if (with_seed) {
      cmd->add_option_function<uint64_t>(
          "--seed", [&](uint64_t s) { o.seed = s; }, "RNG seed");
    }
    cmd->add_option("--out", o.out, "output path (run dir, image file or report prefix)");
  };
  auto add_render = [&](CLI::App* cmd) {
    add_common(cmd);
    cmd->add_option("--checkpoint", ckpt, "model checkpoint file")->required();
    cmd->add_option("--chunk", chunk, "noise-space chunk extent per render pass (0 = whole image)");
  };

  CLI::App* train = app.add_subcommand("train", "train a model from a config or preset");
  add_common(train);
  add_config_opts(train, o);

  CLI::App* resume = app.add_subcommand("resume", "continue training from a run's checkpoint");
  add_common(resume);
  resume->add_option("run_dir", run_dir, "run directory holding latest.ckpt");
  resume->add_option("--checkpoint", resume_ckpt, "explicit checkpoint file");
  resume->add_option("--override", o.overrides, "config override key=value (repeatable)");

  CLI::App* sample = app.add_subcommand("sample", "render a texture sample");
  add_render(sample);
  sample->add_option("--size", size, "noise extent LxM (image is 2^depth times larger)");

  CLI::App* quilt = app.add_subcommand("quilt", "render a patchwork of textures");
  add_render(quilt);
  quilt->add_option("--tiles", tiles, "tile grid TYxTX");
  quilt->add_option("--delta", delta, "tile extent in noise units");

  CLI::App* morph = app.add_subcommand("morph", "render a texture interpolation field");
  add_render(morph);
  morph->add_option("--size", size, "noise extent LxM");
  morph->add_option("--corner", corner_specs,
                    "corner global codes tl,tr,bl,br (repeatable, space-separated reals)");

  CLI::App* disentangle = app.add_subcommand("disentangle", "vary one noise part, freeze the rest");
  add_render(disentangle);
  disentangle->add_option("--mode", mode_s, "vary_g_fix_p | fix_g_vary_p | vary_both");
  disentangle->add_option("--tiles", tiles, "tile grid TYxTX");
  disentangle->add_option("--delta", delta, "tile extent in noise units");
  disentangle->add_option("--z-hat", z_hat_s, "fixed global code (space-separated reals)");

  CLI::App* tile = app.add_subcommand("tile", "render a seamlessly tileable texture");
  add_render(tile);
  tile->add_option("--size", size, "noise extent LxM");

  CLI::App* eval_cmd = app.add_subcommand("eval", "periodicity consistency report + heat map");
  add_common(eval_cmd);
  eval_cmd->add_option("--checkpoint", ckpt, "model checkpoint file")->required();
  eval_cmd->add_option("--image", image_path, "evaluate this image instead of rendering one");
  eval_cmd->add_option("--size", size, "noise extent LxM for the rendered evaluation image");
  eval_cmd->add_option("--max-lag", max_lag, "autocorrelation lag bound (0 = size/4)");
  eval_cmd->add_option("--threshold", threshold, "peak detection threshold");

  CLI::App* fixtures = app.add_subcommand("fixtures", "write a synthetic texture image");
  add_common(fixtures);
  fixtures->add_option("desc", desc,
                       "stripes(period[,angle]) | checkerboard(period) | hexgrid(period) | "
                       "colored_noise");
  fixtures->add_option("--size", fixture_size, "image side in pixels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*train) return cmd_train(o);
    if (*resume) return cmd_resume(o, run_dir, resume_ckpt);
    if (*sample) return cmd_sample(o, ckpt, size, chunk);
    if (*quilt) return cmd_quilt(o, ckpt, tiles, delta, chunk);
    if (*morph) return cmd_morph(o, ckpt, size, corner_specs, chunk);
    if (*disentangle) return cmd_disentangle(o, ckpt, mode_s, tiles, delta, z_hat_s, chunk);
    if (*tile) return cmd_tile(o, ckpt, size, chunk);
    if (*eval_cmd) return cmd_eval(o, ckpt, image_path, size, max_lag, threshold);
    if (*fixtures) return cmd_fixtures(o, desc, fixture_size);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
