#pragma once

// 8-bit PNG read/write through libpng and baseline JPEG read through libjpeg.
// Grids map to bytes as floor(255 v + 0.5), bytes back as b / 255, so
// write-then-read of 8-bit data is lossless.

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstdio>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "bicamo/edge_prior.hpp"
#include "bicamo/grid.hpp"

namespace bicamo {

inline unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5));
}
inline double from_byte(unsigned char b) { return b / 255.0; }

// Interleaved 8-bit pixels, 1 (gray) or 3 (RGB) channels.
struct RasterImage {
  int height = 0, width = 0, channels = 0;
  std::vector<unsigned char> pixels;
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::string& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  return f;
}

inline void png_error_to_exception(png_structp png, png_const_charp msg) {
  auto* buf = static_cast<std::string*>(png_get_error_ptr(png));
  if (buf) *buf = msg ? msg : "unknown libpng error";
  png_longjmp(png, 1);
}
inline void png_quiet_warning(png_structp, png_const_charp) {}

}  // namespace detail

inline RasterImage read_png_raster(const std::string& path) {
  detail::FilePtr file = detail::open_file(path, "rb");
  unsigned char sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw std::runtime_error("'" + path + "' is not a PNG file");
  }
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_to_exception,
                                           detail::png_quiet_warning);
  if (!png) throw std::runtime_error("libpng: out of memory");
  png_infop info = png_create_info_struct(png);
  RasterImage img;
  std::vector<png_bytep> rows;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("malformed PNG '" + path + "': " + err);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth > 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("unsupported PNG bit depth " + std::to_string(depth) + " in '" + path +
                             "' (only 8-bit and lower are supported)");
  }
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = png_get_channels(png, info);
  if (img.channels != 1 && img.channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("unsupported PNG channel layout in '" + path + "'");
  }
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  img.pixels.resize(stride * img.height);
  rows.resize(img.height);
  for (int i = 0; i < img.height; ++i) rows[i] = img.pixels.data() + stride * i;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline void write_png_raster(const RasterImage& img, const std::string& path) {
  if (img.channels != 1 && img.channels != 3) throw std::invalid_argument("write_png: 1 or 3 channels");
  detail::FilePtr file = detail::open_file(path, "wb");
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, detail::png_error_to_exception,
                                            detail::png_quiet_warning);
  if (!png) throw std::runtime_error("libpng: out of memory");
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> rows(img.height);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("failed to write PNG '" + path + "': " + err);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, img.width, img.height, 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  for (int i = 0; i < img.height; ++i) {
    rows[i] = const_cast<png_bytep>(img.pixels.data() + stride * i);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

namespace detail {

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
  auto* mgr = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, mgr->message);
  std::longjmp(mgr->jump, 1);
}

}  // namespace detail

inline RasterImage read_jpeg_raster(const std::string& path) {
  detail::FilePtr file = detail::open_file(path, "rb");
  jpeg_decompress_struct cinfo;
  detail::JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = detail::jpeg_error_exit;
  RasterImage img;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw std::runtime_error("malformed JPEG '" + path + "': " + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file.get());
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.num_components != 1) cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  img.width = static_cast<int>(cinfo.output_width);
  img.height = static_cast<int>(cinfo.output_height);
  img.channels = cinfo.output_components;
  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  img.pixels.resize(stride * img.height);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.pixels.data() + stride * cinfo.output_scanline;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

inline std::string lowercase_extension(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

inline RasterImage read_raster(const std::string& path) {
  const std::string ext = lowercase_extension(path);
  if (ext == ".png") return read_png_raster(path);
  if (ext == ".jpg" || ext == ".jpeg") return read_jpeg_raster(path);
  throw std::runtime_error("unsupported image extension for '" + path + "'");
}

inline ImageRGB raster_to_rgb(const RasterImage& img) {
  Grid r(img.height, img.width), g(img.height, img.width), b(img.height, img.width);
  for (std::size_t k = 0; k < r.size(); ++k) {
    if (img.channels == 1) {
      r[k] = g[k] = b[k] = from_byte(img.pixels[k]);
    } else {
      r[k] = from_byte(img.pixels[3 * k]);
      g[k] = from_byte(img.pixels[3 * k + 1]);
      b[k] = from_byte(img.pixels[3 * k + 2]);
    }
  }
  return ImageRGB(r, g, b);
}

// Colour files are reduced with the luminance weights used for edge priors.
inline Grid raster_to_gray(const RasterImage& img) {
  if (img.channels == 3) return to_grayscale(raster_to_rgb(img));
  Grid out(img.height, img.width);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = from_byte(img.pixels[k]);
  return out;
}

inline ImageRGB read_image_rgb(const std::string& path) { return raster_to_rgb(read_raster(path)); }
inline Grid read_image_gray(const std::string& path) { return raster_to_gray(read_raster(path)); }

inline void write_png(const Grid& g, const std::string& path) {
  RasterImage img{g.height(), g.width(), 1, std::vector<unsigned char>(g.size())};
  for (std::size_t k = 0; k < g.size(); ++k) img.pixels[k] = to_byte(g[k]);
  write_png_raster(img, path);
}

inline void write_png(const ImageRGB& rgb, const std::string& path) {
  RasterImage img{rgb.height(), rgb.width(), 3, std::vector<unsigned char>(3 * rgb.r.size())};
  for (std::size_t k = 0; k < rgb.r.size(); ++k) {
    img.pixels[3 * k] = to_byte(rgb.r[k]);
    img.pixels[3 * k + 1] = to_byte(rgb.g[k]);
    img.pixels[3 * k + 2] = to_byte(rgb.b[k]);
  }
  write_png_raster(img, path);
}

}  // namespace bicamo
