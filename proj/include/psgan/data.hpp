#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "psgan/config.hpp"
#include "psgan/errors.hpp"
#include "psgan/image.hpp"
#include "psgan/rng.hpp"
#include "psgan/tensor.hpp"

namespace psgan {

struct ImageSource {
  std::string kind;  // "single_image" | "folder" | "memory"
  std::vector<std::string> paths;
  std::vector<ImageF> images;
  int min_h = 0, min_w = 0;

  std::size_t count() const { return images.size(); }
};

inline ImageSource source_from_images(std::vector<ImageF> images) {
  if (images.empty()) throw ConfigError("image source is empty");
  ImageSource src;
  src.kind = "memory";
  src.images = std::move(images);
  src.min_h = src.images[0].h;
  src.min_w = src.images[0].w;
  for (const auto& im : src.images) {
    src.min_h = std::min(src.min_h, im.h);
    src.min_w = std::min(src.min_w, im.w);
  }
  return src;
}

inline bool has_image_extension(const std::filesystem::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e == ".png" || e == ".jpg" || e == ".jpeg";
}

inline ImageSource load_source(const DataConfig& cfg, int patch_size) {
  ImageSource src;
  src.kind = cfg.kind;
  if (cfg.kind == "single_image") {
    src.paths.push_back(cfg.path);
  } else if (cfg.kind == "folder") {
    std::error_code ec;
    if (!std::filesystem::is_directory(cfg.path, ec))
      throw IoError("not a directory: " + cfg.path);
    for (const auto& entry : std::filesystem::directory_iterator(cfg.path)) {
      if (entry.is_regular_file() && has_image_extension(entry.path()))
        src.paths.push_back(entry.path().string());
    }
    std::sort(src.paths.begin(), src.paths.end());  // deterministic order
    if (src.paths.empty()) throw IoError("no PNG/JPEG images in " + cfg.path);
  } else {
    throw ConfigError("data.kind must be single_image or folder");
  }
  for (const auto& p : src.paths) {
    ImageF img = normalize(load_image(p));
    if (cfg.rescale != 1.0) img = rescale(img, cfg.rescale);
    if (img.h < patch_size || img.w < patch_size)
      throw ConfigError("image " + p + " is " + std::to_string(img.w) + "x" +
                        std::to_string(img.h) + ", smaller than patch size " +
                        std::to_string(patch_size));
    src.images.push_back(std::move(img));
  }
  src.min_h = src.images[0].h;
  src.min_w = src.images[0].w;
  for (const auto& im : src.images) {
    src.min_h = std::min(src.min_h, im.h);
    src.min_w = std::min(src.min_w, im.w);
  }
  return src;
}

// Batch of random patches as (batch, 3, ps, ps) in [-1, 1]. Draw order per
// patch: image index, top, left.
template <typename T>
Tensor<T> sample_patch_batch(const ImageSource& src, int patch_size, int batch, Rng& rng) {
  if (batch < 1) throw std::invalid_argument("sample_patch_batch: batch must be >= 1");
  if (src.images.empty()) throw ConfigError("image source is empty");
  if (src.min_h < patch_size || src.min_w < patch_size)
    throw ConfigError("source images smaller than patch size");
  Tensor<T> out({batch, 3, patch_size, patch_size});
  for (int b = 0; b < batch; ++b) {
    const auto& img =
        src.images[static_cast<std::size_t>(rng.uniform_int(static_cast<uint64_t>(src.images.size())))];
    const int top = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(img.h - patch_size + 1)));
    const int left = static_cast<int>(rng.uniform_int(static_cast<uint64_t>(img.w - patch_size + 1)));
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < patch_size; ++y)
        for (int x = 0; x < patch_size; ++x)
          out.at(b, c, y, x) = static_cast<T>(img.at(top + y, left + x, c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic textures with known ground-truth periodicity (test fixtures).
// All are gray (equal RGB channels) with values in {-1, 1} or [-1, 1].
// ---------------------------------------------------------------------------

// Two-tone stripes. `period` is the repeat distance perpendicular to the
// stripes in pixels; `angle_deg` = 0 varies along the row axis.
inline ImageF synth_stripes(int size, double period, double angle_deg) {
  if (period < 2) throw std::invalid_argument("synth_stripes: period must be >= 2");
  ImageF img;
  img.h = img.w = size;
  img.rgb.resize(static_cast<std::size_t>(size) * size * 3);
  const double th = angle_deg * M_PI / 180.0;
  const double ny = std::cos(th), nx = std::sin(th);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double t = (y * ny + x * nx) / period;
      const double fr = t - std::floor(t);
      const float v = fr < 0.5 ? 1.0f : -1.0f;
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = v;
    }
  }
  return img;
}

// Checkerboard whose full lattice period is `period` (cells period/2).
inline ImageF synth_checkerboard(int size, int period) {
  if (period < 2) throw std::invalid_argument("synth_checkerboard: period must be >= 2");
  const int cell = std::max(1, period / 2);
  ImageF img;
  img.h = img.w = size;
  img.rgb.resize(static_cast<std::size_t>(size) * size * 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const float v = (((y / cell) + (x / cell)) % 2 == 0) ? 1.0f : -1.0f;
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = v;
    }
  }
  return img;
}

// Dots on a hexagonal lattice with the given row period.
inline ImageF synth_hexgrid(int size, double period) {
  if (period < 2) throw std::invalid_argument("synth_hexgrid: period must be >= 2");
  ImageF img;
  img.h = img.w = size;
  img.rgb.assign(static_cast<std::size_t>(size) * size * 3, -1.0f);
  const double row_h = period * std::sqrt(3.0) / 2.0;
  const double r = period / 4.0;
  const int rows = static_cast<int>(size / row_h) + 2;
  const int cols = static_cast<int>(size / period) + 2;
  for (int i = -1; i <= rows; ++i) {
    const double cy = i * row_h;
    const double off = (i % 2 == 0) ? 0.0 : period / 2.0;
    for (int j = -1; j <= cols; ++j) {
      const double cx = j * period + off;
      const int y0 = std::max(0, static_cast<int>(cy - r) - 1);
      const int y1 = std::min(size - 1, static_cast<int>(cy + r) + 1);
      const int x0 = std::max(0, static_cast<int>(cx - r) - 1);
      const int x1 = std::min(size - 1, static_cast<int>(cx + r) + 1);
      for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x)
          if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = 1.0f;
    }
  }
  return img;
}

// Short-range-correlated noise: white noise box-blurred twice. Smoothly
// decaying autocorrelation with no off-origin local peak.
inline ImageF synth_colored_noise(int size, Rng& rng) {
  std::vector<float> buf(static_cast<std::size_t>(size) * size);
  for (auto& v : buf) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  std::vector<float> tmp(buf.size());
  const int rad = 2;
  for (int pass = 0; pass < 2; ++pass) {
    // horizontal then vertical box blur, edge-clamped
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        float acc = 0;
        for (int d = -rad; d <= rad; ++d)
          acc += buf[static_cast<std::size_t>(y) * size + std::clamp(x + d, 0, size - 1)];
        tmp[static_cast<std::size_t>(y) * size + x] = acc / (2 * rad + 1);
      }
    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        float acc = 0;
        for (int d = -rad; d <= rad; ++d)
          acc += tmp[static_cast<std::size_t>(std::clamp(y + d, 0, size - 1)) * size + x];
        buf[static_cast<std::size_t>(y) * size + x] = acc / (2 * rad + 1);
      }
  }
  float lo = buf[0], hi = buf[0];
  for (float v : buf) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const float span = std::max(hi - lo, 1e-6f);
  ImageF img;
  img.h = img.w = size;
  img.rgb.resize(buf.size() * 3);
  for (std::size_t i = 0; i < buf.size(); ++i) {
    const float v = 2.0f * (buf[i] - lo) / span - 1.0f;
    img.rgb[i * 3 + 0] = img.rgb[i * 3 + 1] = img.rgb[i * 3 + 2] = v;
  }
  return img;
}

// Parse "stripes(16,45)" / "checkerboard(32)" / "hexgrid(24)" /
// "colored_noise" into an image. Used by the CLI fixtures subcommand.
inline ImageF synth_texture(const std::string& desc, int size, Rng& rng) {
  auto args_of = [&](const std::string& name) -> std::vector<double> {
    std::vector<double> args;
    if (desc.size() <= name.size() || desc[name.size()] != '(' || desc.back() != ')')
      return args;
    std::string inner = desc.substr(name.size() + 1, desc.size() - name.size() - 2);
    std::size_t pos = 0;
    while (pos < inner.size()) {
      std::size_t comma = inner.find(',', pos);
      if (comma == std::string::npos) comma = inner.size();
      try {
        args.push_back(std::stod(inner.substr(pos, comma - pos)));
      } catch (const std::exception&) {
        throw ConfigError("bad synthetic texture argument in '" + desc + "'");
      }
      pos = comma + 1;
    }
    return args;
  };
  if (desc.rfind("stripes", 0) == 0) {
    auto a = args_of("stripes");
    if (a.empty()) throw ConfigError("stripes needs (period[,angle])");
    return synth_stripes(size, a[0], a.size() > 1 ? a[1] : 0.0);
  }
  if (desc.rfind("checkerboard", 0) == 0) {
    auto a = args_of("checkerboard");
    if (a.empty()) throw ConfigError("checkerboard needs (period)");
    return synth_checkerboard(size, static_cast<int>(a[0]));
  }
  if (desc.rfind("hexgrid", 0) == 0) {
    auto a = args_of("hexgrid");
    if (a.empty()) throw ConfigError("hexgrid needs (period)");
    return synth_hexgrid(size, a[0]);
  }
  if (desc == "colored_noise") return synth_colored_noise(size, rng);
  throw ConfigError("unknown synthetic texture '" + desc + "'");
}

}  // namespace psgan
