#pragma once

#include <algorithm>
#include <vector>

#include "lithoseg/imgcore/image.hpp"

namespace lithoseg::img {

// Mean over a (2r+1)x(2r+1) window, separable, with replicated borders.
inline GrayImage box_filter(const GrayImage& in, int radius) {
  if (radius <= 0) return in;
  const int w = in.width(), h = in.height();
  const float norm = 1.0f / static_cast<float>(2 * radius + 1);
  GrayImage tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int d = -radius; d <= radius; ++d) s += in(std::clamp(x + d, 0, w - 1), y);
      tmp(x, y) = static_cast<float>(s) * norm;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int d = -radius; d <= radius; ++d) s += tmp(x, std::clamp(y + d, 0, h - 1));
      out(x, y) = static_cast<float>(s) * norm;
    }
  return out;
}

}  // namespace lithoseg::img
