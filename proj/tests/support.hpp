#pragma once

#include <filesystem>
#include <string>

#include "lithoseg/imgcore/image.hpp"
#include "lithoseg/rng.hpp"

namespace testing_support {

using lithoseg::img::BinaryMask;
using lithoseg::img::GrayImage;

inline BinaryMask random_mask(lithoseg::Rng& rng, int w, int h, double p = 0.5) {
  BinaryMask m(w, h);
  for (auto& v : m.data()) v = rng.uniform() < p;
  return m;
}

inline BinaryMask rect_mask(int w, int h, int x0, int y0, int x1, int y1) {
  BinaryMask m(w, h);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) m(x, y) = 1;
  return m;
}

inline BinaryMask disk_mask(int w, int h, double cx, double cy, double r) {
  BinaryMask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m(x, y) = (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r;
  return m;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("lithoseg_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testing_support
