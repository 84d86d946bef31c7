#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lithoseg/error.hpp"

namespace lithoseg::img {

struct PointF {
  double x = 0.0;
  double y = 0.0;

  friend PointF operator+(PointF a, PointF b) { return {a.x + b.x, a.y + b.y}; }
  friend PointF operator-(PointF a, PointF b) { return {a.x - b.x, a.y - b.y}; }
  friend PointF operator*(double s, PointF a) { return {s * a.x, s * a.y}; }
  friend PointF operator*(PointF a, double s) { return {s * a.x, s * a.y}; }
  friend bool operator==(PointF, PointF) = default;
};

inline double dot(PointF a, PointF b) { return a.x * b.x + a.y * b.y; }
inline double cross(PointF a, PointF b) { return a.x * b.y - a.y * b.x; }
inline double norm(PointF a) { return std::hypot(a.x, a.y); }

// Rotation by -90 degrees: (x, y) -> (y, -x).
inline PointF rotate_cw(PointF a) { return {a.y, -a.x}; }

inline PointF rotate(PointF a, double radians) {
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  return {c * a.x - s * a.y, s * a.x + c * a.y};
}

// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  long area() const { return static_cast<long>(width()) * height(); }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

// Row-major raster. Used for intensities (float), masks (uint8 0/1) and
// component labels (int).
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
    if (width < 0 || height < 0) throw DomainError("negative raster dimensions");
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }
  Grid(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 0 || height < 0 ||
        data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
      throw ShapeError("raster data length does not match width x height");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  // Out-of-range reads return `fallback`.
  T get_or(int x, int y, T fallback) const { return in_bounds(x, y) ? (*this)(x, y) : fallback; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(const auto& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// Intensities in [0, 1].
using GrayImage = Grid<float>;
// 0 = background, 1 = foreground (groove interior).
using BinaryMask = Grid<std::uint8_t>;
// 0 = background, 1..K = component id.
using LabelMap = Grid<int>;

template <typename A, typename B>
void require_same_shape(const A& a, const B& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height())
    throw ShapeError(std::string(what) + ": dimension mismatch (" + std::to_string(a.width()) + "x" +
                     std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                     std::to_string(b.height()) + ")");
}

inline long count_foreground(const BinaryMask& m) {
  long n = 0;
  for (auto v : m.data()) n += v != 0;
  return n;
}

// Checks the GrayImage invariant: finite values in [0, 1].
inline bool valid_intensities(const GrayImage& img) {
  for (float v : img.data())
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) return false;
  return true;
}

}  // namespace lithoseg::img
