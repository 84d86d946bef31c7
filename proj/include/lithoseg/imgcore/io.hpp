#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lithoseg/imgcore/image.hpp"

namespace lithoseg::img {

namespace detail {

inline constexpr long kMaxPixels = 1L << 28;

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

inline void check_dims(long w, long h, const std::string& where) {
  if (w <= 0 || h <= 0 || w > (1L << 20) || h > (1L << 20) || w * h > kMaxPixels)
    throw IoError(where + ": image dimensions out of range (" + std::to_string(w) + "x" +
                  std::to_string(h) + ")");
}

// 8-bit grayscale (color type 0, depth 8) only.
inline Grid<std::uint8_t> decode_png(const std::vector<std::uint8_t>& bytes, const std::string& where) {
  static constexpr std::array<std::uint8_t, 8> sig{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() < 33 || !std::equal(sig.begin(), sig.end(), bytes.begin()) ||
      std::memcmp(bytes.data() + 12, "IHDR", 4) != 0)
    throw IoError(where + ": not a PNG file");
  const long w = be32(bytes.data() + 16);
  const long h = be32(bytes.data() + 20);
  const int depth = bytes[24];
  const int color = bytes[25];
  check_dims(w, h, where);
  if (color != 0) throw IoError(where + ": unsupported PNG color type " + std::to_string(color) + " (need grayscale)");
  if (depth != 8) throw IoError(where + ": unsupported PNG bit depth " + std::to_string(depth) + " (need 8)");

  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw IoError(where + ": " + image.message);
  image.format = PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError(where + ": " + image.message);
  }
  return {static_cast<int>(w), static_cast<int>(h), std::move(pixels)};
}

inline Grid<std::uint8_t> decode_pgm(const std::vector<std::uint8_t>& bytes, const std::string& where) {
  std::size_t pos = 2;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos])) tok.push_back(static_cast<char>(bytes[pos++]));
    return tok;
  };
  auto to_long = [&](const std::string& s) -> long {
    if (s.empty() || s.size() > 9 || !std::all_of(s.begin(), s.end(), ::isdigit))
      throw IoError(where + ": malformed PGM header");
    return std::stol(s);
  };
  const long w = to_long(next_token());
  const long h = to_long(next_token());
  const long maxval = to_long(next_token());
  check_dims(w, h, where);
  if (maxval != 255) throw IoError(where + ": unsupported PGM maxval " + std::to_string(maxval) + " (need 255)");
  ++pos;  // single whitespace before raster
  const auto n = static_cast<std::size_t>(w * h);
  if (bytes.size() < pos + n) throw IoError(where + ": truncated PGM raster");
  return {static_cast<int>(w), static_cast<int>(h),
          std::vector<std::uint8_t>(bytes.begin() + static_cast<long>(pos), bytes.begin() + static_cast<long>(pos + n))};
}

inline Grid<std::uint8_t> read_gray8(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("file not found: " + path.string());
  const auto bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes, path.string());
  if (bytes.size() >= 2 && bytes[0] == 'P') throw IoError(path.string() + ": only binary PGM (P5) is supported");
  return decode_png(bytes, path.string());
}

inline bool is_pgm_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".pgm";
}

inline void write_gray8(const std::filesystem::path& path, const Grid<std::uint8_t>& raw) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (is_pgm_path(path)) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "P5\n" << raw.width() << " " << raw.height() << "\n255\n";
    out.write(reinterpret_cast<const char*>(raw.data().data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw IoError("write failed: " + path.string());
    return;
  }
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raw.width());
  image.height = static_cast<png_uint_32>(raw.height());
  image.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&image, path.c_str(), 0, raw.data().data(), 0, nullptr))
    throw IoError("cannot write " + path.string() + ": " + image.message);
}

}  // namespace detail

inline std::uint8_t to_byte(float v) {
  const double scaled = std::floor(static_cast<double>(v) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

inline GrayImage from_bytes(const Grid<std::uint8_t>& raw) {
  GrayImage img(raw.width(), raw.height());
  std::transform(raw.data().begin(), raw.data().end(), img.data().begin(),
                 [](std::uint8_t b) { return static_cast<float>(b) / 255.0f; });
  return img;
}

inline Grid<std::uint8_t> to_bytes(const GrayImage& img) {
  Grid<std::uint8_t> raw(img.width(), img.height());
  std::transform(img.data().begin(), img.data().end(), raw.data().begin(), to_byte);
  return raw;
}

// Rounds every value onto the 8-bit lattice; the result equals a save/load
// round trip.
inline GrayImage quantize8(const GrayImage& img) { return from_bytes(to_bytes(img)); }

inline GrayImage load_image(const std::filesystem::path& path) { return from_bytes(detail::read_gray8(path)); }

inline void save_image(const std::filesystem::path& path, const GrayImage& img) {
  detail::write_gray8(path, to_bytes(img));
}

inline BinaryMask load_mask(const std::filesystem::path& path) {
  const auto raw = detail::read_gray8(path);
  BinaryMask m(raw.width(), raw.height());
  std::transform(raw.data().begin(), raw.data().end(), m.data().begin(),
                 [](std::uint8_t b) { return static_cast<std::uint8_t>(b >= 128); });
  return m;
}

inline void save_mask(const std::filesystem::path& path, const BinaryMask& mask) {
  Grid<std::uint8_t> raw(mask.width(), mask.height());
  std::transform(mask.data().begin(), mask.data().end(), raw.data().begin(),
                 [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
  detail::write_gray8(path, raw);
}

// PNG bytes of an interleaved 8-bit RGB buffer (channels = 3) or gray (1).
inline std::vector<std::uint8_t> encode_png(int width, int height, int channels,
                                            const std::vector<std::uint8_t>& pixels) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr))
    throw IoError(std::string("PNG encode failed: ") + image.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr))
    throw IoError(std::string("PNG encode failed: ") + image.message);
  out.resize(size);
  return out;
}

// Mask alpha-blended in red over the SEM image.
inline std::vector<std::uint8_t> overlay_rgb(const GrayImage& sem, const BinaryMask& mask, double alpha = 0.4) {
  require_same_shape(sem, mask, "overlay");
  std::vector<std::uint8_t> rgb(sem.size() * 3);
  for (std::size_t i = 0; i < sem.size(); ++i) {
    const double g = sem.data()[i] * 255.0;
    const bool fg = mask.data()[i] != 0;
    const double r = fg ? (1.0 - alpha) * g + alpha * 255.0 : g;
    const double gb = fg ? (1.0 - alpha) * g : g;
    rgb[3 * i + 0] = static_cast<std::uint8_t>(std::lround(r));
    rgb[3 * i + 1] = static_cast<std::uint8_t>(std::lround(gb));
    rgb[3 * i + 2] = static_cast<std::uint8_t>(std::lround(gb));
  }
  return rgb;
}

}  // namespace lithoseg::img
