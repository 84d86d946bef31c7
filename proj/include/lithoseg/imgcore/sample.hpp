#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "lithoseg/imgcore/image.hpp"

namespace lithoseg::img {

// True when bilinear_sample(img, p) is defined.
template <typename T>
bool in_sample_domain(const Grid<T>& img, PointF p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0.0 && p.y >= 0.0 &&
         p.x <= img.width() - 1 && p.y <= img.height() - 1;
}

// Bilinear interpolation of the four pixels around p; exact at lattice points.
// Masks sample as 0/1 indicators.
template <typename T>
double bilinear_sample(const Grid<T>& img, PointF p) {
  if (!in_sample_domain(img, p))
    throw DomainError("bilinear_sample: point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                      ") outside image");
  const int x0 = static_cast<int>(std::floor(p.x));
  const int y0 = static_cast<int>(std::floor(p.y));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = p.x - x0;
  const double fy = p.y - y0;
  auto v = [&](int x, int y) { return static_cast<double>(img(x, y)); };
  const double top = v(x0, y0) + fx * (v(x1, y0) - v(x0, y0));
  const double bottom = v(x0, y1) + fx * (v(x1, y1) - v(x0, y1));
  return top + fy * (bottom - top);
}

// Same as bilinear_sample but clamps p into the image first.
template <typename T>
double bilinear_sample_clamped(const Grid<T>& img, PointF p) {
  p.x = std::clamp(p.x, 0.0, static_cast<double>(img.width() - 1));
  p.y = std::clamp(p.y, 0.0, static_cast<double>(img.height() - 1));
  return bilinear_sample(img, p);
}

}  // namespace lithoseg::img
