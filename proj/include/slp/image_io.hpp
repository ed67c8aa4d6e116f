#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "slp/binary_mask.hpp"
#include "slp/error.hpp"

namespace slp {

/// Per-pixel instance labels: value = instance id + 1, 0 = no instance.
struct LabelImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> values;

  [[nodiscard]] std::uint16_t at(int x, int y) const noexcept {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  [[nodiscard]] std::uint16_t at(Pixel p) const noexcept { return at(p.x, p.y); }

  [[nodiscard]] BinaryMask mask_of(std::uint16_t value) const {
    BinaryMask m(width, height);
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i] == value) m.set_index(i);
    return m;
  }

  friend bool operator==(const LabelImage&, const LabelImage&) = default;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // 3 bytes per pixel
};

namespace png_detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using File = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void on_error(png_structp, png_const_charp msg) { throw IoError(std::string("libpng: ") + msg); }
inline void on_warning(png_structp, png_const_charp) {}

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : file_(std::fopen(path.c_str(), "wb")), path_(path) {
    if (!file_) throw IoError("cannot write " + path.string());
    png_ = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
    info_ = png_ ? png_create_info_struct(png_) : nullptr;
    if (!png_ || !info_) throw IoError("libpng: cannot allocate write structs");
    png_init_io(png_, file_.get());
  }
  ~Writer() { png_destroy_write_struct(&png_, &info_); }
  Writer(const Writer&) = delete;
  Writer& operator=(const Writer&) = delete;

  void write(int width, int height, int bit_depth, int color_type, std::vector<png_bytep>& rows) {
    png_set_IHDR(png_, info_, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth,
                 color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png_, info_);
    png_write_image(png_, rows.data());
    png_write_end(png_, nullptr);
  }

 private:
  File file_;
  std::filesystem::path path_;
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : file_(std::fopen(path.c_str(), "rb")) {
    if (!file_) throw IoError("cannot read " + path.string());
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file_.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
      throw IoError(path.string() + ": not a PNG file");
    png_ = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
    info_ = png_ ? png_create_info_struct(png_) : nullptr;
    if (!png_ || !info_) throw IoError("libpng: cannot allocate read structs");
    png_init_io(png_, file_.get());
    png_set_sig_bytes(png_, 8);
    png_read_info(png_, info_);
  }
  ~Reader() { png_destroy_read_struct(&png_, &info_, nullptr); }
  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;

  [[nodiscard]] int width() const { return static_cast<int>(png_get_image_width(png_, info_)); }
  [[nodiscard]] int height() const { return static_cast<int>(png_get_image_height(png_, info_)); }
  [[nodiscard]] int bit_depth() const { return png_get_bit_depth(png_, info_); }
  [[nodiscard]] int color_type() const { return png_get_color_type(png_, info_); }
  png_structp png() { return png_; }
  png_infop info() { return info_; }

 private:
  File file_;
  png_structp png_ = nullptr;
  png_infop info_ = nullptr;
};

}  // namespace png_detail

/// 16-bit grayscale PNG.
inline void write_label_png(const std::filesystem::path& path, const LabelImage& img) {
  require(img.values.size() == static_cast<std::size_t>(img.width) * img.height, "LabelImage: size mismatch");
  std::vector<std::uint8_t> bytes(img.values.size() * 2);
  for (std::size_t i = 0; i < img.values.size(); ++i) {
    bytes[2 * i] = static_cast<std::uint8_t>(img.values[i] >> 8);  // PNG is big-endian
    bytes[2 * i + 1] = static_cast<std::uint8_t>(img.values[i] & 0xFF);
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = bytes.data() + static_cast<std::size_t>(y) * img.width * 2;
  png_detail::Writer(path).write(img.width, img.height, 16, PNG_COLOR_TYPE_GRAY, rows);
}

/// Reads a grayscale label PNG (8- or 16-bit).
inline LabelImage read_label_png(const std::filesystem::path& path) {
  png_detail::Reader r(path);
  if (r.color_type() != PNG_COLOR_TYPE_GRAY) throw IoError(path.string() + ": label image must be grayscale");
  const int depth = r.bit_depth();
  if (depth != 8 && depth != 16) throw IoError(path.string() + ": label image must be 8- or 16-bit");
  LabelImage img{r.width(), r.height(), {}};
  const std::size_t stride = static_cast<std::size_t>(img.width) * (depth / 8);
  std::vector<std::uint8_t> bytes(stride * static_cast<std::size_t>(img.height));
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = bytes.data() + y * stride;
  png_read_image(r.png(), rows.data());
  img.values.resize(static_cast<std::size_t>(img.width) * img.height);
  for (std::size_t i = 0; i < img.values.size(); ++i)
    img.values[i] = depth == 16 ? static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]) : bytes[i];
  return img;
}

inline void write_rgb_png(const std::filesystem::path& path, const RgbImage& img) {
  require(img.rgb.size() == static_cast<std::size_t>(img.width) * img.height * 3, "RgbImage: size mismatch");
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height));
  auto* base = const_cast<std::uint8_t*>(img.rgb.data());
  for (int y = 0; y < img.height; ++y) rows[static_cast<std::size_t>(y)] = base + static_cast<std::size_t>(y) * img.width * 3;
  png_detail::Writer(path).write(img.width, img.height, 8, PNG_COLOR_TYPE_RGB, rows);
}

struct ImageSize {
  int width = 0;
  int height = 0;
};

inline ImageSize read_png_size(const std::filesystem::path& path) {
  png_detail::Reader r(path);
  return {r.width(), r.height()};
}

}  // namespace slp
