#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <vector>

#include "psgan/data.hpp"
#include "psgan/image.hpp"
#include "psgan/rng.hpp"

using namespace psgan;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path d = fs::temp_directory_path() / ("psgan_test_" + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

ImageU8 solid_u8(int h, int w, unsigned char r, unsigned char g, unsigned char b) {
  ImageU8 img;
  img.h = h;
  img.w = w;
  img.rgb.resize(static_cast<std::size_t>(h) * w * 3);
  for (int i = 0; i < h * w; ++i) {
    img.rgb[3 * i + 0] = r;
    img.rgb[3 * i + 1] = g;
    img.rgb[3 * i + 2] = b;
  }
  return img;
}

}  // namespace

TEST_CASE("normalize/denormalize round-trips every byte value") {
  ImageU8 img;
  img.h = 16;
  img.w = 16;
  img.rgb.resize(16 * 16 * 3);
  for (int i = 0; i < 256; ++i) img.rgb[i] = static_cast<unsigned char>(i);
  for (std::size_t i = 256; i < img.rgb.size(); ++i)
    img.rgb[i] = static_cast<unsigned char>((i * 7) % 256);

  ImageF f = normalize(img);
  for (float v : f.rgb) {
    REQUIRE(v >= -1.0f);
    REQUIRE(v <= 1.0f);
  }
  ImageU8 back = denormalize(f);
  REQUIRE(back.rgb == img.rgb);

  // denormalize clamps out-of-range floats instead of wrapping
  ImageF hot;
  hot.h = hot.w = 1;
  hot.rgb = {2.0f, -3.0f, 0.0f};
  ImageU8 c = denormalize(hot);
  REQUIRE(c.rgb[0] == 255);
  REQUIRE(c.rgb[1] == 0);
  REQUIRE(c.rgb[2] == 128);
}

TEST_CASE("png save/load is bitwise lossless") {
  fs::path dir = fresh_dir("png");
  ImageU8 img;
  img.h = 9;
  img.w = 13;
  img.rgb.resize(9 * 13 * 3);
  Rng rng(7);
  for (auto& v : img.rgb) v = static_cast<unsigned char>(rng.uniform_int(256));

  const std::string path = (dir / "pattern.png").string();
  save_png(path, img);
  ImageU8 back = load_png(path);
  REQUIRE(back.h == img.h);
  REQUIRE(back.w == img.w);
  REQUIRE(back.rgb == img.rgb);

  // load_image dispatches on magic bytes, not extension
  const std::string odd = (dir / "actually_png.jpg").string();
  save_png(odd, img);
  ImageU8 via_magic = load_image(odd);
  REQUIRE(via_magic.rgb == img.rgb);

  fs::remove_all(dir);
}

TEST_CASE("image loading errors") {
  fs::path dir = fresh_dir("imgerr");
  REQUIRE_THROWS_AS(load_image((dir / "missing.png").string()), IoError);
  REQUIRE_THROWS_AS(load_png((dir / "missing.png").string()), IoError);

  const std::string junk = (dir / "junk.png").string();
  std::ofstream(junk) << "this is not an image";
  REQUIRE_THROWS_AS(load_image(junk), IoError);

  fs::remove_all(dir);
}

TEST_CASE("rescale changes dimensions and keeps range") {
  ImageU8 u = solid_u8(20, 30, 10, 200, 90);
  ImageF f = normalize(u);
  ImageF half = rescale(f, 0.5);
  REQUIRE(half.h == 10);
  REQUIRE(half.w == 15);
  // constant image stays constant under bilinear resampling
  for (int y = 0; y < half.h; ++y)
    for (int x = 0; x < half.w; ++x)
      for (int c = 0; c < 3; ++c)
        REQUIRE(half.at(y, x, c) == Catch::Approx(f.at(0, 0, c)).margin(1e-6));
  ImageF same = rescale(f, 1.0);
  REQUIRE(same.h == f.h);
  REQUIRE(same.w == f.w);
  REQUIRE_THROWS_AS(rescale(f, 0.0), ConfigError);
  REQUIRE_THROWS_AS(rescale(f, -2.0), ConfigError);
}

TEST_CASE("patch sampling stays in bounds and is exhaustive over offsets") {
  ImageU8 u = solid_u8(24, 17, 0, 0, 0);
  // encode (y, x) into the red/green channels so patches reveal their origin
  for (int y = 0; y < u.h; ++y)
    for (int x = 0; x < u.w; ++x) {
      u.rgb[(static_cast<std::size_t>(y) * u.w + x) * 3 + 0] = static_cast<unsigned char>(y * 10);
      u.rgb[(static_cast<std::size_t>(y) * u.w + x) * 3 + 1] = static_cast<unsigned char>(x * 10);
    }
  ImageSource src = source_from_images({normalize(u)});

  const int ps = 8;
  Rng rng(123);
  bool top_zero = false, top_max = false, left_zero = false, left_max = false;
  for (int rep = 0; rep < 250; ++rep) {
    Tensor<float> batch = sample_patch_batch<float>(src, ps, 4, rng);
    REQUIRE(batch.shape() == std::vector<int64_t>({4, 3, ps, ps}));
    for (int b = 0; b < 4; ++b) {
      // recover the top-left coordinate from the encoded channels
      const float ry = batch.at(b, 0, 0, 0);
      const float rx = batch.at(b, 1, 0, 0);
      const int top = static_cast<int>(std::lround((ry + 1.0f) * 127.5f)) / 10;
      const int left = static_cast<int>(std::lround((rx + 1.0f) * 127.5f)) / 10;
      REQUIRE(top >= 0);
      REQUIRE(top <= u.h - ps);
      REQUIRE(left >= 0);
      REQUIRE(left <= u.w - ps);
      // patch contents must match the source at the recovered offset
      for (int c = 0; c < 3; ++c)
        REQUIRE(batch.at(b, c, ps - 1, ps - 1) ==
                src.images[0].at(top + ps - 1, left + ps - 1, c));
      top_zero |= (top == 0);
      top_max |= (top == u.h - ps);
      left_zero |= (left == 0);
      left_max |= (left == u.w - ps);
    }
  }
  // with 1000 draws over 17x10 valid offsets, every edge case shows up
  REQUIRE(top_zero);
  REQUIRE(top_max);
  REQUIRE(left_zero);
  REQUIRE(left_max);

  REQUIRE_THROWS_AS(sample_patch_batch<float>(src, 32, 1, rng), ConfigError);
  REQUIRE_THROWS(sample_patch_batch<float>(src, ps, 0, rng));
}

TEST_CASE("patch sampling draws uniformly across a folder of images") {
  // 120 solid-color images; the red value identifies the source image.
  std::vector<ImageF> imgs;
  const int n = 120;
  for (int i = 0; i < n; ++i)
    imgs.push_back(normalize(solid_u8(12, 12, static_cast<unsigned char>(i), 0, 0)));
  ImageSource src = source_from_images(std::move(imgs));

  Rng rng(99);
  std::vector<int> freq(n, 0);
  const int draws = 12000;
  Tensor<float> batch = sample_patch_batch<float>(src, 4, draws, rng);
  for (int b = 0; b < draws; ++b) {
    const int idx = static_cast<int>(std::lround((batch.at(b, 0, 0, 0) + 1.0f) * 127.5f));
    REQUIRE(idx >= 0);
    REQUIRE(idx < n);
    ++freq[idx];
  }
  // chi-squared against the uniform null; df = 119, 180 is far out in the tail
  const double expect = static_cast<double>(draws) / n;
  double chi2 = 0;
  for (int i = 0; i < n; ++i) {
    REQUIRE(freq[i] > 0);
    const double d = freq[i] - expect;
    chi2 += d * d / expect;
  }
  REQUIRE(chi2 < 180.0);
}

TEST_CASE("folder sources pick up images and ignore other files") {
  fs::path dir = fresh_dir("folder");
  save_png((dir / "b.png").string(), solid_u8(16, 16, 20, 0, 0));
  save_png((dir / "a.PNG").string(), solid_u8(18, 16, 40, 0, 0));
  std::ofstream(dir / "notes.txt") << "not an image";
  std::ofstream(dir / "raw.bin") << "\x01\x02";

  DataConfig cfg;
  cfg.kind = "folder";
  cfg.path = dir.string();
  ImageSource src = load_source(cfg, 8);
  REQUIRE(src.count() == 2);
  REQUIRE(src.min_h == 16);
  REQUIRE(src.min_w == 16);

  // sorted path order is deterministic
  REQUIRE(src.paths[0] < src.paths[1]);

  DataConfig missing;
  missing.kind = "folder";
  missing.path = (dir / "nope").string();
  REQUIRE_THROWS_AS(load_source(missing, 8), IoError);

  fs::path empty = fresh_dir("folder_empty");
  std::ofstream(empty / "readme.md") << "x";
  DataConfig nothing;
  nothing.kind = "folder";
  nothing.path = empty.string();
  REQUIRE_THROWS_AS(load_source(nothing, 8), IoError);

  DataConfig single;
  single.kind = "single_image";
  single.path = (dir / "b.png").string();
  ImageSource one = load_source(single, 8);
  REQUIRE(one.count() == 1);
  // patch size larger than the image is a config error
  REQUIRE_THROWS_AS(load_source(single, 64), ConfigError);

  DataConfig bad;
  bad.kind = "databases";
  bad.path = dir.string();
  REQUIRE_THROWS_AS(load_source(bad, 8), ConfigError);

  fs::remove_all(dir);
  fs::remove_all(empty);
}

TEST_CASE("stripes fixture has the stated period and orientation") {
  ImageF img = synth_stripes(64, 16, 0.0);
  REQUIRE(img.h == 64);
  REQUIRE(img.w == 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const float v = img.at(y, x, 0);
      REQUIRE((v == 1.0f || v == -1.0f));
      REQUIRE(img.at(y, x, 1) == v);
      REQUIRE(img.at(y, x, 2) == v);
      // angle 0: constant along x, periodic along y
      REQUIRE(img.at(y, (x + 5) % 64, 0) == v);
      if (y + 16 < 64) REQUIRE(img.at(y + 16, x, 0) == v);
      if (y + 8 < 64) REQUIRE(img.at(y + 8, x, 0) == -v);
    }
  REQUIRE_THROWS(synth_stripes(64, 1, 0.0));

  // 90 degrees swaps the axes
  ImageF rot = synth_stripes(64, 16, 90.0);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 48; ++x) REQUIRE(rot.at(y, x + 16, 0) == rot.at(y, x, 0));
}

TEST_CASE("checkerboard fixture period and parity") {
  ImageF img = synth_checkerboard(32, 8);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      const float v = img.at(y, x, 0);
      REQUIRE((v == 1.0f || v == -1.0f));
      if (y + 8 < 32) REQUIRE(img.at(y + 8, x, 0) == v);
      if (x + 8 < 32) REQUIRE(img.at(y, x + 8, 0) == v);
      // half-period shift flips the sign (cells are period/2)
      if (y + 4 < 32) REQUIRE(img.at(y + 4, x, 0) == -v);
      if (x + 4 < 32) REQUIRE(img.at(y, x + 4, 0) == -v);
    }
  REQUIRE(img.at(0, 0, 0) == 1.0f);
  REQUIRE_THROWS(synth_checkerboard(32, 1));
}

TEST_CASE("hexgrid and colored noise fixtures stay in range") {
  ImageF hex = synth_hexgrid(48, 12);
  bool has_dot = false, has_bg = false;
  for (float v : hex.rgb) {
    REQUIRE((v == 1.0f || v == -1.0f));
    has_dot |= (v == 1.0f);
    has_bg |= (v == -1.0f);
  }
  REQUIRE(has_dot);
  REQUIRE(has_bg);

  Rng rng(5);
  ImageF cn = synth_colored_noise(64, rng);
  float lo = 1e9f, hi = -1e9f;
  for (std::size_t i = 0; i < cn.rgb.size(); i += 3) {
    REQUIRE(cn.rgb[i] == cn.rgb[i + 1]);  // gray
    REQUIRE(cn.rgb[i] == cn.rgb[i + 2]);
    lo = std::min(lo, cn.rgb[i]);
    hi = std::max(hi, cn.rgb[i]);
  }
  REQUIRE(lo >= -1.0f);
  REQUIRE(hi <= 1.0f);
  REQUIRE(hi - lo > 0.5f);  // blurred noise, but nowhere near constant
}

TEST_CASE("synthetic texture descriptions parse") {
  Rng rng(1);
  ImageF a = synth_texture("stripes(16,45)", 32, rng);
  REQUIRE(a.h == 32);
  ImageF b = synth_texture("checkerboard(8)", 32, rng);
  REQUIRE(b.at(0, 0, 0) == 1.0f);
  ImageF c = synth_texture("hexgrid(10)", 32, rng);
  REQUIRE(c.h == 32);
  ImageF d = synth_texture("colored_noise", 32, rng);
  REQUIRE(d.h == 32);

  REQUIRE_THROWS_AS(synth_texture("spirals(3)", 32, rng), ConfigError);
  REQUIRE_THROWS_AS(synth_texture("stripes", 32, rng), ConfigError);
  REQUIRE_THROWS_AS(synth_texture("stripes(abc)", 32, rng), ConfigError);
}
