#pragma once

#include <jpeglib.h>
#include <png.h>

#include <csetjmp>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "psgan/errors.hpp"
#include "psgan/tensor.hpp"

namespace psgan {

struct ImageU8 {
  int h = 0, w = 0;
  std::vector<unsigned char> rgb;  // HWC
};

struct ImageF {
  int h = 0, w = 0;
  std::vector<float> rgb;  // HWC, values in [-1, 1]
  float at(int y, int x, int c) const {
    return rgb[(static_cast<std::size_t>(y) * w + x) * 3 + static_cast<std::size_t>(c)];
  }
  float& at(int y, int x, int c) {
    return rgb[(static_cast<std::size_t>(y) * w + x) * 3 + static_cast<std::size_t>(c)];
  }
};

inline ImageF normalize(const ImageU8& u) {
  ImageF f;
  f.h = u.h;
  f.w = u.w;
  f.rgb.resize(u.rgb.size());
  for (std::size_t i = 0; i < u.rgb.size(); ++i)
    f.rgb[i] = static_cast<float>(u.rgb[i]) / 127.5f - 1.0f;
  return f;
}

inline ImageU8 denormalize(const ImageF& f) {
  ImageU8 u;
  u.h = f.h;
  u.w = f.w;
  u.rgb.resize(f.rgb.size());
  for (std::size_t i = 0; i < f.rgb.size(); ++i) {
    const float v = (f.rgb[i] + 1.0f) * 127.5f;
    long r = std::lround(v);
    if (r < 0) r = 0;
    if (r > 255) r = 255;
    u.rgb[i] = static_cast<unsigned char>(r);
  }
  return u;
}

// ---------------------------------------------------------------------------
// PNG
// ---------------------------------------------------------------------------
inline ImageU8 load_png(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError("libpng init failed for " + path);
  }
  ImageU8 img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError("failed to decode PNG: " + path);
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  img.w = static_cast<int>(png_get_image_width(png, info));
  img.h = static_cast<int>(png_get_image_height(png, info));
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS))
    png_set_strip_alpha(png);
  png_read_update_info(png, info);
  if (png_get_rowbytes(png, info) != static_cast<std::size_t>(img.w) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    throw IoError("unexpected PNG row layout: " + path);
  }
  img.rgb.resize(static_cast<std::size_t>(img.h) * img.w * 3);
  rows.resize(static_cast<std::size_t>(img.h));
  for (int y = 0; y < img.h; ++y)
    rows[static_cast<std::size_t>(y)] = img.rgb.data() + static_cast<std::size_t>(y) * img.w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  std::fclose(fp);
  return img;
}

inline void save_png(const std::string& path, const ImageU8& img) {
  if (img.h <= 0 || img.w <= 0 ||
      img.rgb.size() != static_cast<std::size_t>(img.h) * img.w * 3)
    throw IoError("save_png: malformed image buffer");
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    if (png) png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("libpng init failed for " + path);
  }
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw IoError("failed to encode PNG: " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.w), static_cast<png_uint_32>(img.h), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  rows.resize(static_cast<std::size_t>(img.h));
  for (int y = 0; y < img.h; ++y)
    rows[static_cast<std::size_t>(y)] =
        const_cast<png_bytep>(img.rgb.data() + static_cast<std::size_t>(y) * img.w * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

// ---------------------------------------------------------------------------
// JPEG
// ---------------------------------------------------------------------------
namespace detail {
struct JpegErr {
  jpeg_error_mgr pub;
  std::jmp_buf jb;
};
inline void jpeg_error_trampoline(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErr*>(cinfo->err);
  std::longjmp(err->jb, 1);
}
}  // namespace detail

inline ImageU8 load_jpeg(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot open " + path);
  jpeg_decompress_struct cinfo;
  detail::JpegErr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = detail::jpeg_error_trampoline;
  ImageU8 img;
  if (setjmp(jerr.jb)) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(fp);
    throw IoError("failed to decode JPEG: " + path);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, fp);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  img.w = static_cast<int>(cinfo.output_width);
  img.h = static_cast<int>(cinfo.output_height);
  img.rgb.resize(static_cast<std::size_t>(img.h) * img.w * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * img.w * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::fclose(fp);
  return img;
}

inline ImageU8 load_image(const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "rb");
  if (!fp) throw IoError("cannot open " + path);
  unsigned char magic[2] = {0, 0};
  const std::size_t got = std::fread(magic, 1, 2, fp);
  std::fclose(fp);
  if (got != 2) throw IoError("cannot read " + path);
  if (magic[0] == 0x89 && magic[1] == 'P') return load_png(path);
  if (magic[0] == 0xFF && magic[1] == 0xD8) return load_jpeg(path);
  throw IoError("unsupported image format: " + path);
}

// Uniform bilinear rescale by a positive factor (1.0 = no-op).
inline ImageF rescale(const ImageF& src, double factor) {
  if (factor <= 0) throw ConfigError("rescale factor must be positive");
  if (factor == 1.0) return src;
  ImageF dst;
  dst.h = std::max(1, static_cast<int>(std::lround(src.h * factor)));
  dst.w = std::max(1, static_cast<int>(std::lround(src.w * factor)));
  dst.rgb.resize(static_cast<std::size_t>(dst.h) * dst.w * 3);
  for (int y = 0; y < dst.h; ++y) {
    double sy = (y + 0.5) * src.h / dst.h - 0.5;
    sy = std::min(std::max(sy, 0.0), static_cast<double>(src.h - 1));
    const int y0 = static_cast<int>(sy), y1 = std::min(y0 + 1, src.h - 1);
    const double fy = sy - y0;
    for (int x = 0; x < dst.w; ++x) {
      double sx = (x + 0.5) * src.w / dst.w - 0.5;
      sx = std::min(std::max(sx, 0.0), static_cast<double>(src.w - 1));
      const int x0 = static_cast<int>(sx), x1 = std::min(x0 + 1, src.w - 1);
      const double fx = sx - x0;
      for (int c = 0; c < 3; ++c) {
        const double v = (1 - fy) * ((1 - fx) * src.at(y0, x0, c) + fx * src.at(y0, x1, c)) +
                         fy * ((1 - fx) * src.at(y1, x0, c) + fx * src.at(y1, x1, c));
        dst.at(y, x, c) = static_cast<float>(v);
      }
    }
  }
  return dst;
}

// (H, W, 3) float image <-> (3, H, W) tensor in [-1, 1].
template <typename T>
Tensor<T> image_to_chw(const ImageF& img) {
  Tensor<T> t({3, img.h, img.w});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) t.at(c, y, x) = static_cast<T>(img.at(y, x, c));
  return t;
}

template <typename T>
ImageF chw_to_image(const Tensor<T>& t) {
  ImageF img;
  img.h = static_cast<int>(t.dim(1));
  img.w = static_cast<int>(t.dim(2));
  img.rgb.resize(static_cast<std::size_t>(img.h) * img.w * 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) img.at(y, x, c) = static_cast<float>(t.at(c, y, x));
  return img;
}

}  // namespace psgan
