#pragma once

#include <array>
#include <optional>

#include "lithoseg/imgcore/image.hpp"
#include "lithoseg/imgcore/io.hpp"

namespace lithoseg::img {

// Otsu threshold over a 256-bin histogram (bins on the 8-bit lattice).
// Returns t such that `v > t` selects the upper class. When several splits
// tie for the maximum between-class variance, the middle one is used.
inline double otsu_threshold(const GrayImage& img, std::optional<Rect> roi = std::nullopt) {
  const Rect r = roi.value_or(Rect{0, 0, img.width(), img.height()});
  if (r.empty() || r.x0 < 0 || r.y0 < 0 || r.x1 > img.width() || r.y1 > img.height())
    throw DomainError("otsu_threshold: roi outside image");

  std::array<double, 256> hist{};
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x) hist[to_byte(img(x, y))] += 1.0;

  double total = 0.0;
  double sum = 0.0;
  int distinct = 0;
  for (int i = 0; i < 256; ++i) {
    total += hist[i];
    sum += i * hist[i];
    distinct += hist[i] > 0;
  }
  if (distinct < 2) throw DomainError("otsu_threshold: degenerate histogram (constant roi)");

  std::array<double, 256> between{};
  double w0 = 0.0;
  double sum0 = 0.0;
  double best = -1.0;
  for (int k = 0; k < 255; ++k) {
    w0 += hist[k];
    sum0 += k * hist[k];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) {
      between[k] = -1.0;
      continue;
    }
    const double m0 = sum0 / w0;
    const double m1 = (sum - sum0) / w1;
    between[k] = w0 * w1 * (m0 - m1) * (m0 - m1);
    best = std::max(best, between[k]);
  }
  const double tol = best * 1e-12;
  int first = -1;
  int last = -1;
  for (int k = 0; k < 255; ++k)
    if (between[k] >= best - tol) {
      if (first < 0) first = k;
      last = k;
    }
  const int k = (first + last) / 2;
  return (k + 0.5) / 255.0;
}

inline BinaryMask threshold_above(const GrayImage& img, double t) {
  BinaryMask m(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) m.data()[i] = img.data()[i] > t;
  return m;
}

}  // namespace lithoseg::img
