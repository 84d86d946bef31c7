#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "lithoseg/imgcore/image.hpp"
#include "lithoseg/imgcore/sample.hpp"

namespace lithoseg::fine {

using img::GrayImage;
using img::PointF;

struct Profile {
  std::vector<double> values;
  int point_index = -1;
  PointF base_point;
  PointF normal;
  double center_shift = 0.0;
  std::optional<double> label;
  bool dropped = false;

  int center() const { return static_cast<int>(values.size() - 1) / 2; }
};

// Samples base + (j - c) * normal for j in [0, s_scan). Out-of-image samples
// either mark the profile dropped or are clamped to the border.
inline Profile sample_profile(const GrayImage& image, PointF base, PointF normal, int s_scan,
                              bool drop_out_of_bounds = true, int point_index = -1) {
  if (s_scan < 1) throw DomainError("sample_profile: s_scan must be >= 1");
  Profile p;
  p.point_index = point_index;
  p.base_point = base;
  p.normal = normal;
  p.values.resize(static_cast<std::size_t>(s_scan));
  const int c = (s_scan - 1) / 2;
  for (int j = 0; j < s_scan; ++j) {
    const PointF q = base + static_cast<double>(j - c) * normal;
    if (img::in_sample_domain(image, q)) {
      p.values[j] = img::bilinear_sample(image, q);
    } else if (drop_out_of_bounds) {
      p.dropped = true;
      p.values[j] = 0.0;
    } else {
      p.values[j] = img::bilinear_sample_clamped(image, q);
    }
  }
  return p;
}

// Index of the maximum within +-window of the center; ties go to the index
// nearest the center, then to the smaller index.
inline int windowed_argmax(const std::vector<double>& v, int window) {
  const int c = static_cast<int>(v.size() - 1) / 2;
  const int lo = std::max(0, c - window);
  const int hi = std::min(static_cast<int>(v.size()) - 1, c + window);
  int best = c;
  for (int j = lo; j <= hi; ++j) {
    const double bv = v[best];
    if (v[j] > bv || (v[j] == bv && (std::abs(j - c) < std::abs(best - c) ||
                                     (std::abs(j - c) == std::abs(best - c) && j < best))))
      best = j;
  }
  return best;
}

inline constexpr int kMaxAlignIterations = 16;

// Gaussian smoothing of a 1-D profile with replicated ends; sigma <= 0 copies.
inline std::vector<double> smooth_profile(const std::vector<double>& v, double sigma) {
  if (sigma <= 0.0 || v.empty()) return v;
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double ks = 0.0;
  for (int i = -r; i <= r; ++i) ks += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  const int n = static_cast<int>(v.size());
  std::vector<double> out(v.size());
  for (int j = 0; j < n; ++j) {
    double a = 0.0;
    for (int i = -r; i <= r; ++i) a += k[i + r] * v[std::clamp(j + i, 0, n - 1)];
    out[j] = a / ks;
  }
  return out;
}

// Moves the base point along the normal until the windowed maximum of the
// smoothed profile sits at the center index, re-sampling the image at every
// move. Profiles that do not settle, or settle farther than center_window
// from the start, are dropped.
inline Profile align_brightest(const GrayImage& image, Profile p, int center_window, bool drop_out_of_bounds = true,
                               double smooth_sigma = 0.0) {
  const int s = static_cast<int>(p.values.size());
  if (center_window < 0 || center_window >= s) throw DomainError("align_brightest: center_window must be in [0, s_scan)");
  if (p.dropped) return p;
  for (int it = 0; it < kMaxAlignIterations; ++it) {
    const int shift = windowed_argmax(smooth_profile(p.values, smooth_sigma), center_window) - p.center();
    if (shift == 0) return p;
    Profile moved = sample_profile(image, p.base_point + static_cast<double>(shift) * p.normal, p.normal, s,
                                   drop_out_of_bounds, p.point_index);
    moved.center_shift = p.center_shift + shift;
    moved.label = p.label;
    p = std::move(moved);
    if (p.dropped) return p;
    if (std::abs(p.center_shift) > center_window) {
      p.dropped = true;
      return p;
    }
  }
  if (windowed_argmax(smooth_profile(p.values, smooth_sigma), center_window) != p.center()) p.dropped = true;
  return p;
}

// Zero-mean, unit-variance copy; empty when the profile is constant.
inline std::optional<std::vector<double>> z_normalize(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  if (var < 1e-12) return std::nullopt;
  const double inv = 1.0 / std::sqrt(var);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) * inv;
  return out;
}

}  // namespace lithoseg::fine
