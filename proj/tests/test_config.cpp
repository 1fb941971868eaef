#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "psgan/config.hpp"

using namespace psgan;

TEST_CASE("kv documents round-trip through text", "[config]") {
  KvDoc doc;
  doc.set("a.name", "hello world");
  doc.set_int("a.count", -42);
  doc.set_real("a.rate", 0.1);
  doc.set_bool("a.flag", true);

  std::istringstream in(doc.str());
  KvDoc back;
  back.parse(in);
  REQUIRE(back.get("a.name") == "hello world");
  REQUIRE(back.get_int("a.count") == -42);
  REQUIRE(back.get_real("a.rate") == 0.1);
  REQUIRE(back.get_bool("a.flag"));
}

TEST_CASE("kv parsing skips comments and validates lines", "[config]") {
  std::istringstream in("# a comment\n\n  key = some value  \nother=1\n");
  KvDoc doc;
  doc.parse(in);
  REQUIRE(doc.get("key") == "some value");
  REQUIRE(doc.get_int("other") == 1);
  REQUIRE_FALSE(doc.has("missing"));
  REQUIRE(doc.get_or("missing", "x") == "x");

  REQUIRE_THROWS_AS(doc.get("missing"), ConfigError);
  REQUIRE_THROWS_AS(doc.get_int("key"), ConfigError);

  std::istringstream bad("not a kv line\n");
  KvDoc doc2;
  REQUIRE_THROWS_AS(doc2.parse(bad), ConfigError);
}

TEST_CASE("noise spec validation", "[config]") {
  NoiseSpec s;
  s.d_l = 2;
  REQUIRE(s.d() == 2);
  REQUIRE_NOTHROW(s.validate());

  NoiseSpec zero;
  REQUIRE_THROWS_AS(zero.validate(), ConfigError);  // d == 0

  NoiseSpec neg;
  neg.d_l = 1;
  neg.d_g = -1;
  REQUIRE_THROWS_AS(neg.validate(), ConfigError);

  NoiseSpec flat;
  flat.d_l = 1;
  flat.prior_low = 1.0;
  flat.prior_high = 1.0;
  REQUIRE_THROWS_AS(flat.validate(), ConfigError);
}

TEST_CASE("channel plan doubles up to the cap", "[config]") {
  NetSpec net;  // base 64, cap 512
  REQUIRE(net.channels_at(1) == 64);
  REQUIRE(net.channels_at(2) == 128);
  REQUIRE(net.channels_at(3) == 256);
  REQUIRE(net.channels_at(4) == 512);
  REQUIRE(net.channels_at(5) == 512);
  REQUIRE(net.channels_at(9) == 512);
}

TEST_CASE("resolution factor and dependency extent", "[config]") {
  NetSpec net;
  net.depth = 5;
  REQUIRE(upsample_factor(net) == 32);
  REQUIRE(receptive_field(net) == 125);
  net.depth = 4;
  REQUIRE(upsample_factor(net) == 16);
  REQUIRE(receptive_field(net) == 61);
  net.depth = 1;
  REQUIRE(upsample_factor(net) == 2);
  REQUIRE(receptive_field(net) == 5);
  net.kernel = 3;
  net.depth = 3;
  REQUIRE(receptive_field(net) == 15);  // 3 -> 7 -> 15
}

TEST_CASE("dependency extent recurrence", "[config]") {
  NetSpec net;
  net.kernel = 3;
  net.depth = 3;
  // r1 = 3, r2 = (3-1)*2+3 = 7, r3 = (7-1)*2+3 = 15
  REQUIRE(receptive_field(net) == 15);
}

TEST_CASE("run config consistency check ties patch size to depth", "[config]") {
  RunConfig c;
  c.noise.d_l = 4;
  c.noise.L = c.noise.M = 5;
  c.net.depth = 5;
  c.train.patch_size = 160;
  c.data.path = "unused";
  REQUIRE_NOTHROW(c.validate(false));

  c.train.patch_size = 128;
  REQUIRE_THROWS_AS(c.validate(false), ConfigError);
}

TEST_CASE("run config round-trips through a document", "[config]") {
  RunConfig c;
  c.noise.d_l = 7;
  c.noise.d_g = 3;
  c.noise.d_p = 2;
  c.noise.L = c.noise.M = 5;
  c.net.depth = 5;
  c.net.base_channels = 32;
  c.train.patch_size = 160;
  c.train.steps = 123;
  c.train.seed = 99;
  c.data.kind = "folder";
  c.data.path = "/tmp/imgs";
  c.name = "roundtrip";

  KvDoc doc;
  c.to_doc(doc);
  RunConfig back = RunConfig::from_doc(doc);
  REQUIRE(back == c);
}

TEST_CASE("overrides replace known keys only", "[config]") {
  RunConfig c = preset_config("merrigum");
  c.apply_override("train.steps=77");
  REQUIRE(c.train.steps == 77);
  c.apply_override("net.base_channels = 16");
  REQUIRE(c.net.base_channels == 16);
  REQUIRE_THROWS_AS(c.apply_override("bogus.key=1"), ConfigError);
  REQUIRE_THROWS_AS(c.apply_override("no-equals-sign"), ConfigError);
}

TEST_CASE("experiment presets carry the published dimensions", "[config][presets]") {
  struct Row {
    const char* name;
    int d_g, d_l, d_p, depth;
  };
  const Row rows[] = {
      {"text-p6", 0, 10, 2, 4},   {"single-honeycomb", 0, 10, 2, 5},
      {"merrigum", 10, 30, 2, 5}, {"dtd", 40, 20, 4, 5},
      {"facades", 40, 20, 6, 5},  {"sydney", 30, 20, 4, 5},
  };
  for (const Row& r : rows) {
    RunConfig c = preset_config(r.name);
    INFO(r.name);
    REQUIRE(c.noise.d_g == r.d_g);
    REQUIRE(c.noise.d_l == r.d_l);
    REQUIRE(c.noise.d_p == r.d_p);
    REQUIRE(c.net.depth == r.depth);
    REQUIRE(c.train.patch_size == 160);
    REQUIRE(c.train.patch_size == upsample_factor(c.net) * c.noise.L);
    REQUIRE(c.noise.L == c.noise.M);
  }
  REQUIRE(preset_names().size() == 6);
  REQUIRE_THROWS_AS(preset_config("nope"), ConfigError);
}
