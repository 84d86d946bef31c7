#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "lithoseg/imgcore/image.hpp"

namespace lithoseg::img {

struct Line {
  PointF point;      // centroid of the fitted points
  PointF direction;  // unit vector

  // Signed perpendicular offset; positive on the left of `direction`.
  double residual(PointF p) const { return cross(direction, p - point); }
  double project(PointF p) const { return dot(direction, p - point); }
  PointF normal() const { return {-direction.y, direction.x}; }
  PointF at(double t, double offset = 0.0) const { return point + t * direction + offset * normal(); }
};

// Total-least-squares line: first principal component of the centred cloud.
inline Line fit_line_ls(std::span<const PointF> pts) {
  if (pts.size() < 2) throw DomainError("fit_line_ls: need at least 2 points");
  PointF c{};
  for (auto p : pts) c = c + p;
  c = (1.0 / static_cast<double>(pts.size())) * c;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (auto p : pts) {
    const PointF d = p - c;
    sxx += d.x * d.x;
    syy += d.y * d.y;
    sxy += d.x * d.y;
  }
  if (sxx + syy <= 0.0) throw DomainError("fit_line_ls: degenerate point set");
  const double theta = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  return {c, {std::cos(theta), std::sin(theta)}};
}

inline double max_abs_residual(const Line& line, std::span<const PointF> pts) {
  double m = 0.0;
  for (auto p : pts) m = std::max(m, std::abs(line.residual(p)));
  return m;
}

// Shoelace area of a closed polygon; positive when the interior is on the
// left of travel.
inline double signed_area(std::span<const PointF> poly) {
  double a = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const PointF p = poly[i];
    const PointF q = poly[(i + 1) % n];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

inline double perimeter(std::span<const PointF> poly) {
  double len = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) len += norm(poly[(i + 1) % poly.size()] - poly[i]);
  return len;
}

}  // namespace lithoseg::img
