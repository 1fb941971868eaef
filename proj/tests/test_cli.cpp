// Drives the installed command-line binary end to end: training run
// directories, sampling, evaluation reports, and the documented exit codes.
#include <sys/wait.h>

#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "psgan/config.hpp"
#include "psgan/checkpoint.hpp"
#include "psgan/image.hpp"
#include "util.hpp"

using namespace psgan;
namespace fs = std::filesystem;

namespace {

const fs::path& cli_scratch() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / "psgan-cli-test";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

int run_cli(const std::string& args, std::string* output = nullptr) {
  static int counter = 0;
  const fs::path log = cli_scratch() / ("cli-out-" + std::to_string(counter++) + ".txt");
  const std::string cmd =
      std::string("'") + PSGAN_CLI_PATH + "' " + args + " > '" + log.string() + "' 2>&1";
  const int raw = std::system(cmd.c_str());
  if (output) {
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    *output = ss.str();
  }
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

// A small, fast run configuration over a synthetic stripes fixture.
fs::path write_config(const fs::path& dir, const std::string& image, int64_t steps) {
  RunConfig cfg;
  cfg.name = "cli-test";
  cfg.noise = NoiseSpec{2, 1, 1, 4, 4};
  cfg.net.depth = 2;
  cfg.net.kernel = 5;
  cfg.net.base_channels = 8;
  cfg.net.mlp_hidden = 4;
  cfg.train.minibatch = 2;
  cfg.train.patch_size = 16;
  cfg.train.steps = steps;
  cfg.train.seed = 11;
  cfg.train.log_every = 1;
  cfg.train.checkpoint_every = 100;
  cfg.data.kind = "single_image";
  cfg.data.path = image;
  KvDoc doc;
  cfg.to_doc(doc);
  fs::path p = dir / "config.txt";
  std::ofstream out(p);
  doc.write(out);
  return p;
}

}  // namespace

TEST_CASE("cli trains reproducible run directories and samples from them") {
  const fs::path dir = cli_scratch();

  std::string out;
  REQUIRE(run_cli("fixtures 'stripes(8,0)' --size 64 --out '" + (dir / "tex.png").string() + "'",
                  &out) == 0);
  REQUIRE(fs::exists(dir / "tex.png"));

  const fs::path cfg = write_config(dir, (dir / "tex.png").string(), 3);
  const std::string run1 = (dir / "run1").string();
  const std::string run2 = (dir / "run2").string();
  REQUIRE(run_cli("train --config '" + cfg.string() + "' --out '" + run1 + "'") == 0);
  REQUIRE(run_cli("train --config '" + cfg.string() + "' --out '" + run2 + "'") == 0);
  for (const char* f : {"config.txt", "metrics.txt", "latest.ckpt", "checkpoint-000003.ckpt"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(fs::path(run1) / f));
    REQUIRE(slurp(fs::path(run1) / f) == slurp(fs::path(run2) / f));
  }

  SECTION("metrics carry one line per step") {
    std::ifstream metrics(fs::path(run1) / "metrics.txt");
    std::string line;
    int lines = 0;
    while (std::getline(metrics, line)) {
      REQUIRE(line.rfind("step=", 0) == 0);
      ++lines;
    }
    REQUIRE(lines == 3);
  }

  SECTION("sampling is seed-deterministic and records its plan") {
    const std::string ck = run1 + "/latest.ckpt";
    const fs::path s1 = dir / "s1.png", s2 = dir / "s2.png", s3 = dir / "s3.png";
    REQUIRE(run_cli("sample --checkpoint '" + ck + "' --size 4x6 --seed 3 --out '" + s1.string() +
                    "'") == 0);
    REQUIRE(run_cli("sample --checkpoint '" + ck + "' --size 4x6 --seed 3 --out '" + s2.string() +
                    "'") == 0);
    REQUIRE(run_cli("sample --checkpoint '" + ck + "' --size 4x6 --seed 4 --out '" + s3.string() +
                    "'") == 0);
    REQUIRE(slurp(s1) == slurp(s2));
    REQUIRE(slurp(s1) != slurp(s3));
    ImageU8 img = load_image(s1.string());
    REQUIRE(img.h == 16);  // 4 noise units * 2^2
    REQUIRE(img.w == 24);

    std::ifstream plan_in(s1.string() + ".plan.txt");
    REQUIRE(plan_in.good());
    KvDoc plan;
    plan.parse(plan_in);
    REQUIRE(plan.get_int("plan.extent_l") == 4);
    REQUIRE(plan.get_int("plan.extent_m") == 6);
    REQUIRE(plan.get_int("plan.seed") == 3);
  }

  SECTION("resume continues in place and advances the checkpoint") {
    REQUIRE(run_cli("resume '" + run1 + "' --override train.steps=5") == 0);
    Checkpoint ck = load_checkpoint(run1 + "/latest.ckpt");
    REQUIRE(ck.step == 5);
    std::ifstream metrics(fs::path(run1) / "metrics.txt");
    std::string line, last;
    while (std::getline(metrics, line)) last = line;
    REQUIRE(last.rfind("step=5 ", 0) == 0);
  }

  SECTION("eval writes a parseable report and a heat map") {
    const std::string prefix = (dir / "rep").string();
    REQUIRE(run_cli("eval --checkpoint '" + run1 + "/latest.ckpt' --size 8x8 --seed 2 --out '" +
                    prefix + "'") == 0);
    std::ifstream rep_in(prefix + ".report.txt");
    REQUIRE(rep_in.good());
    KvDoc rep;
    rep.parse(rep_in);
    REQUIRE(rep.has("report.aperiodic"));
    const int64_t count = rep.get_int("report.count");
    REQUIRE(count >= 0);
    for (int64_t i = 0; i < count; ++i) {
      REQUIRE(rep.has("match." + std::to_string(i) + ".rel_error"));
      REQUIRE(rep.has("match." + std::to_string(i) + ".matched"));
    }
    if (!rep.get_bool("report.aperiodic")) REQUIRE(fs::exists(prefix + ".heatmap.png"));
  }
}

TEST_CASE("cli failure modes exit nonzero without leaving partial state") {
  const fs::path dir = cli_scratch();

  SECTION("missing training image leaves no run directory") {
    const fs::path cfg = write_config(dir, (dir / "no-such-image.png").string(), 3);
    std::string out;
    const fs::path ghost = dir / "ghost-run";
    REQUIRE(run_cli("train --config '" + cfg.string() + "' --out '" + ghost.string() + "'",
                    &out) == 4);
    REQUIRE(!fs::exists(ghost));
    REQUIRE(out.find("i/o error") != std::string::npos);
  }

  SECTION("unknown preset is a config error") {
    std::string out;
    REQUIRE(run_cli("train --preset no-such-preset --out '" + (dir / "x").string() + "'", &out) ==
            2);
    REQUIRE(out.find("config error") != std::string::npos);
  }

  SECTION("config and preset together are rejected") {
    const fs::path cfg = write_config(dir, (dir / "tex.png").string(), 1);
    REQUIRE(run_cli("train --config '" + cfg.string() + "' --preset dtd --out '" +
                    (dir / "y").string() + "'") == 2);
  }

  SECTION("missing subcommand is a usage error") { REQUIRE(run_cli("") == 2); }

  SECTION("divergent training reports exit code 3") {
    std::string out;
    REQUIRE(run_cli("fixtures colored_noise --size 32 --out '" + (dir / "cn.png").string() +
                    "'") == 0);
    const fs::path cfg2 = dir / "config-diverge.txt";
    {
      RunConfig cfg;
      cfg.name = "cli-diverge";
      cfg.noise = NoiseSpec{2, 1, 1, 4, 4};
      cfg.net.depth = 2;
      cfg.net.kernel = 5;
      cfg.net.base_channels = 8;
      cfg.net.mlp_hidden = 4;
      cfg.train.minibatch = 2;
      cfg.train.patch_size = 16;
      cfg.train.steps = 50;
      cfg.train.seed = 1;
      cfg.train.learning_rate = 1e18;
      cfg.data.kind = "single_image";
      cfg.data.path = (dir / "cn.png").string();
      KvDoc doc;
      cfg.to_doc(doc);
      std::ofstream o(cfg2);
      doc.write(o);
    }
    REQUIRE(run_cli("train --config '" + cfg2.string() + "' --out '" +
                    (dir / "diverge-run").string() + "'",
                    &out) == 3);
    REQUIRE(out.find("diverged") != std::string::npos);
  }
}
