#pragma once

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "mdcnn/tensor.hpp"

namespace mdcnn {

/// Every image entering the model is standardized to this size.
inline constexpr int kImageSize = 140;

namespace detail {

struct JpegErrorTrap {
  jpeg_error_mgr mgr;
  std::jmp_buf env;
  char message[JMSG_LENGTH_MAX] = {};
};

inline void jpeg_error_thrower(j_common_ptr cinfo) {
  auto* trap = reinterpret_cast<JpegErrorTrap*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, trap->message);
  std::longjmp(trap->env, 1);
}

inline TensorT<float> rgb_bytes_to_tensor(const std::vector<unsigned char>& rgb, int h, int w) {
  TensorT<float> out({3, h, w}, 0.0f);
  float* dst = out.data();
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  for (std::int64_t i = 0; i < plane; ++i) {
    dst[i] = rgb[static_cast<std::size_t>(3 * i)] / 255.0f;
    dst[plane + i] = rgb[static_cast<std::size_t>(3 * i + 1)] / 255.0f;
    dst[2 * plane + i] = rgb[static_cast<std::size_t>(3 * i + 2)] / 255.0f;
  }
  return out;
}

inline TensorT<float> decode_png(const std::string& path) {
  png_image im{};
  im.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&im, path.c_str())) {
    throw std::runtime_error(path + ": " + im.message);
  }
  // Read RGBA so an alpha channel is dropped rather than composited.
  im.format = PNG_FORMAT_RGBA;
  if (im.width == 0 || im.height == 0) {
    png_image_free(&im);
    throw std::runtime_error(path + ": zero-area image");
  }
  std::vector<unsigned char> rgba(static_cast<std::size_t>(PNG_IMAGE_SIZE(im)));
  if (!png_image_finish_read(&im, nullptr, rgba.data(), 0, nullptr)) {
    const std::string msg = im.message;
    png_image_free(&im);
    throw std::runtime_error(path + ": " + msg);
  }
  const int h = static_cast<int>(im.height), w = static_cast<int>(im.width);
  std::vector<unsigned char> rgb(static_cast<std::size_t>(3) * h * w);
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(h) * w; ++i) {
    rgb[static_cast<std::size_t>(3 * i)] = rgba[static_cast<std::size_t>(4 * i)];
    rgb[static_cast<std::size_t>(3 * i + 1)] = rgba[static_cast<std::size_t>(4 * i + 1)];
    rgb[static_cast<std::size_t>(3 * i + 2)] = rgba[static_cast<std::size_t>(4 * i + 2)];
  }
  return rgb_bytes_to_tensor(rgb, h, w);
}

inline TensorT<float> decode_jpeg(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) {
    throw std::runtime_error(path + ": cannot open file");
  }
  jpeg_decompress_struct cinfo{};
  JpegErrorTrap trap;
  cinfo.err = jpeg_std_error(&trap.mgr);
  trap.mgr.error_exit = jpeg_error_thrower;
  std::vector<unsigned char> rgb;
  int h = 0, w = 0;
  if (setjmp(trap.env)) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(f);
    throw std::runtime_error(path + ": " + trap.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, f);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  h = static_cast<int>(cinfo.output_height);
  w = static_cast<int>(cinfo.output_width);
  if (h == 0 || w == 0) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(f);
    throw std::runtime_error(path + ": zero-area image");
  }
  rgb.resize(static_cast<std::size_t>(3) * h * w);
  while (cinfo.output_scanline < cinfo.output_height) {
    unsigned char* row = rgb.data() + static_cast<std::size_t>(3) * w * cinfo.output_scanline;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::fclose(f);
  return rgb_bytes_to_tensor(rgb, h, w);
}

}  // namespace detail

/// Decodes a PNG or JPEG file (detected by signature, not extension) into a
/// [3,H,W] tensor of values in [0,1] at the image's native size. An alpha
/// channel is dropped; grayscale is expanded to three equal channels.
inline TensorT<float> decode_image(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) {
    throw std::runtime_error(path + ": cannot open file");
  }
  unsigned char magic[8] = {};
  const std::size_t got = std::fread(magic, 1, sizeof(magic), f);
  std::fclose(f);
  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (got >= 8 && std::equal(magic, magic + 8, png_sig)) {
    return detail::decode_png(path);
  }
  if (got >= 3 && magic[0] == 0xFF && magic[1] == 0xD8 && magic[2] == 0xFF) {
    return detail::decode_jpeg(path);
  }
  throw std::runtime_error(path + ": not a PNG or JPEG file");
}

/// Bilinear resample with half-pixel centers and no aspect preservation:
/// the source coordinate of destination pixel i along an axis is
///   s = (i + 0.5) * (src_extent / dst_extent) - 0.5
/// clamped to [0, src_extent - 1], then the four neighbours are blended.
/// A same-size resize reproduces the input exactly.
template <typename T>
TensorT<T> resize_bilinear(const TensorT<T>& img, int out_h, int out_w) {
  if (img.rank() != 3) {
    throw std::invalid_argument("resize expects a [C,H,W] tensor");
  }
  if (out_h <= 0 || out_w <= 0) {
    throw std::invalid_argument("resize target extents must be positive");
  }
  const int c = img.extent(0), h = img.extent(1), w = img.extent(2);
  TensorT<T> out({c, out_h, out_w}, T(0));
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, h - 1);
    const T wy = static_cast<T>(fy - y0);
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, w - 1);
      const T wx = static_cast<T>(fx - x0);
      for (int ci = 0; ci < c; ++ci) {
        const T* plane = img.data() + static_cast<std::int64_t>(ci) * h * w;
        const T top = (T(1) - wx) * plane[static_cast<std::int64_t>(y0) * w + x0] +
                      wx * plane[static_cast<std::int64_t>(y0) * w + x1];
        const T bot = (T(1) - wx) * plane[static_cast<std::int64_t>(y1) * w + x0] +
                      wx * plane[static_cast<std::int64_t>(y1) * w + x1];
        out.data()[(static_cast<std::int64_t>(ci) * out_h + y) * out_w + x] =
            (T(1) - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

/// Decode, drop alpha, resize to kImageSize x kImageSize, scale to [0,1].
inline TensorT<float> load_image(const std::string& path) {
  return resize_bilinear(decode_image(path), kImageSize, kImageSize);
}

/// Writes a [3,H,W] tensor of values in [0,1] as an 8-bit RGB PNG.
inline void write_png(const std::string& path, const TensorT<float>& img) {
  if (img.rank() != 3 || img.extent(0) != 3) {
    throw std::invalid_argument("write_png expects a [3,H,W] tensor");
  }
  const int h = img.extent(1), w = img.extent(2);
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  std::vector<unsigned char> rgb(static_cast<std::size_t>(3) * h * w);
  for (std::int64_t i = 0; i < plane; ++i) {
    for (int c = 0; c < 3; ++c) {
      const float v = std::clamp(img.data()[c * plane + i], 0.0f, 1.0f);
      rgb[static_cast<std::size_t>(3 * i + c)] =
          static_cast<unsigned char>(std::lround(v * 255.0f));
    }
  }
  png_image im{};
  im.version = PNG_IMAGE_VERSION;
  im.width = static_cast<png_uint_32>(w);
  im.height = static_cast<png_uint_32>(h);
  im.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&im, path.c_str(), 0, rgb.data(), 0, nullptr)) {
    throw std::runtime_error(path + ": " + im.message);
  }
}

}  // namespace mdcnn
