#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "lithoseg/imgcore/contour.hpp"
#include "lithoseg/imgcore/image.hpp"

namespace lithoseg::fine {

using img::BinaryMask;

// Even-odd scanline fill sampled at pixel centers (integer coordinates).
inline void fill_polygon(BinaryMask& mask, std::span<const PointF> poly) {
  const std::size_t n = poly.size();
  if (n < 3) return;
  double ymin = poly[0].y, ymax = poly[0].y;
  for (auto p : poly) {
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const int y0 = std::max(0, static_cast<int>(std::ceil(ymin)));
  const int y1 = std::min(mask.height() - 1, static_cast<int>(std::floor(ymax)));
  std::vector<double> xs;
  for (int y = y0; y <= y1; ++y) {
    xs.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const PointF a = poly[i];
      const PointF b = poly[(i + 1) % n];
      if ((a.y <= y) != (b.y <= y)) xs.push_back(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int xa = std::max(0, static_cast<int>(std::ceil(xs[k])));
      const int xb = std::min(mask.width(), static_cast<int>(std::ceil(xs[k + 1])));
      for (int x = xa; x < xb; ++x) mask(x, y) ^= 1;
    }
  }
}

inline BinaryMask rasterize_mask(const std::vector<img::Contour>& contours, int width, int height) {
  BinaryMask out(width, height);
  for (const auto& c : contours) {
    BinaryMask one(width, height);
    fill_polygon(one, c.points);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] |= one.data()[i];
  }
  return out;
}

namespace detail {

inline bool segments_cross(PointF a, PointF b, PointF c, PointF d) {
  const double d1 = img::cross(b - a, c - a);
  const double d2 = img::cross(b - a, d - a);
  const double d3 = img::cross(d - c, a - c);
  const double d4 = img::cross(d - c, b - c);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0;
}

}  // namespace detail

// True when two non-adjacent edges of the closed polygon properly cross.
inline bool self_intersects(std::span<const PointF> poly) {
  const std::size_t n = poly.size();
  if (n < 4) return false;
  struct Edge {
    double xmin, xmax;
    std::size_t i;
  };
  std::vector<Edge> edges(n);
  for (std::size_t i = 0; i < n; ++i) {
    const PointF a = poly[i], b = poly[(i + 1) % n];
    edges[i] = {std::min(a.x, b.x), std::max(a.x, b.x), i};
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& l, const Edge& r) { return l.xmin < r.xmin; });
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = p + 1; q < n && edges[q].xmin <= edges[p].xmax; ++q) {
      const std::size_t i = edges[p].i, j = edges[q].i;
      const std::size_t gap = i > j ? i - j : j - i;
      if (gap <= 1 || gap == n - 1) continue;
      if (detail::segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n])) return true;
    }
  }
  return false;
}

}  // namespace lithoseg::fine
