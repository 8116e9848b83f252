#include "acnet/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

namespace acnet {

namespace {

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<uint8_t>& rgb) {
  if (rgb.size() != static_cast<size_t>(width) * height * 3) {
    throw std::invalid_argument("write_png_rgb: buffer does not match " +
                                std::to_string(width) + "x" + std::to_string(height));
  }
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw std::runtime_error("cannot open for writing: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("png write error: " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<size_t>(y) * width * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::vector<uint8_t> read_png_rgb(const std::string& path, int& width, int& height) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw std::runtime_error("cannot open image: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw std::runtime_error("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw std::runtime_error("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw std::runtime_error("png read error: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  const png_byte color_type = png_get_color_type(png, info);
  const png_byte bit_depth = png_get_bit_depth(png, info);

  // Normalize whatever is on disk to 8-bit RGB.
  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  std::vector<uint8_t> out(static_cast<size_t>(width) * height * 3);
  for (int y = 0; y < height; ++y) {
    png_read_row(png, out.data() + static_cast<size_t>(y) * width * 3, nullptr);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

std::vector<uint8_t> quantize_image(const std::vector<float>& chw, int side) {
  std::vector<uint8_t> rgb(static_cast<size_t>(side) * side * 3);
  const size_t plane = static_cast<size_t>(side) * side;
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      for (int c = 0; c < 3; ++c) {
        float v = chw[c * plane + y * side + x];
        v = std::min(1.f, std::max(-1.f, v));
        rgb[(static_cast<size_t>(y) * side + x) * 3 + c] =
            static_cast<uint8_t>(std::lround((v + 1.f) * 127.5f));
      }
    }
  }
  return rgb;
}

std::vector<float> dequantize_image(const std::vector<uint8_t>& rgb, int width,
                                    int height) {
  std::vector<float> chw(static_cast<size_t>(width) * height * 3);
  const size_t plane = static_cast<size_t>(width) * height;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const uint8_t b = rgb[(static_cast<size_t>(y) * width + x) * 3 + c];
        chw[c * plane + y * width + x] = static_cast<float>(b) / 127.5f - 1.f;
      }
    }
  }
  return chw;
}

std::vector<uint8_t> resize_rgb(const std::vector<uint8_t>& rgb, int width, int height,
                                int new_width, int new_height) {
  if (width == new_width && height == new_height) return rgb;
  std::vector<uint8_t> out(static_cast<size_t>(new_width) * new_height * 3);
  for (int y = 0; y < new_height; ++y) {
    const float sy = (y + 0.5f) * height / new_height - 0.5f;
    const int y0 = std::max(0, std::min(height - 1, static_cast<int>(std::floor(sy))));
    const int y1 = std::min(height - 1, y0 + 1);
    const float fy = std::min(1.f, std::max(0.f, sy - y0));
    for (int x = 0; x < new_width; ++x) {
      const float sx = (x + 0.5f) * width / new_width - 0.5f;
      const int x0 = std::max(0, std::min(width - 1, static_cast<int>(std::floor(sx))));
      const int x1 = std::min(width - 1, x0 + 1);
      const float fx = std::min(1.f, std::max(0.f, sx - x0));
      for (int c = 0; c < 3; ++c) {
        auto at = [&](int yy, int xx) {
          return static_cast<float>(rgb[(static_cast<size_t>(yy) * width + xx) * 3 + c]);
        };
        const float top = at(y0, x0) * (1 - fx) + at(y0, x1) * fx;
        const float bottom = at(y1, x0) * (1 - fx) + at(y1, x1) * fx;
        out[(static_cast<size_t>(y) * new_width + x) * 3 + c] =
            static_cast<uint8_t>(std::lround(top * (1 - fy) + bottom * fy));
      }
    }
  }
  return out;
}

void save_image(const std::string& path, const LabeledImage& image) {
  write_png_rgb(path, image.side, image.side, quantize_image(image.pixels, image.side));
}

LabeledImage load_image(const std::string& path, int target_side, int label,
                        Domain domain) {
  int w = 0, h = 0;
  std::vector<uint8_t> rgb = read_png_rgb(path, w, h);
  if (w != target_side || h != target_side) {
    rgb = resize_rgb(rgb, w, h, target_side, target_side);
  }
  LabeledImage out;
  out.pixels = dequantize_image(rgb, target_side, target_side);
  out.label = label;
  out.domain = domain;
  out.side = target_side;
  return out;
}

}  // namespace acnet
