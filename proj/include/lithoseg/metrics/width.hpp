#pragma once

#include <cmath>
#include <deque>
#include <vector>

#include "lithoseg/imgcore/components.hpp"
#include "lithoseg/imgcore/geometry.hpp"
#include "lithoseg/imgcore/image.hpp"
#include "lithoseg/imgcore/sample.hpp"
#include "lithoseg/imgcore/skeleton.hpp"

namespace lithoseg::metrics {

using img::PointF;

struct WidthOptions {
  int tangent_radius = 2;  // Chebyshev radius of the skeleton neighbourhood
  // Skeleton spurs up to this length are removed; a negative value uses the
  // mask's typical width (2 * area / boundary pixels).
  int prune_len = -1;
  double step = 0.25;
};

// Distance from p along dir to the first 0.5 crossing of the bilinear mask
// indicator, or to the image edge.
inline double run_length(const img::BinaryMask& mask, PointF p, PointF dir, double step) {
  double prev_t = 0.0;
  double prev_v = img::bilinear_sample_clamped(mask, p) - 0.5;
  const double limit = mask.width() + mask.height();
  for (double t = step; t < limit; t += step) {
    const PointF q = p + t * dir;
    if (!img::in_sample_domain(mask, q)) return prev_t + 0.5;
    const double v = img::bilinear_sample(mask, q) - 0.5;
    if (v < 0.0) return prev_t + step * prev_v / (prev_v - v);
    prev_t = t;
    prev_v = v;
  }
  return limit;
}

// Unit tangent of the skeleton around (x, y) from a TLS fit of nearby
// skeleton pixels; (1, 0) when the neighbourhood is a single pixel.
inline PointF skeleton_tangent(const img::BinaryMask& skel, int x, int y, int radius) {
  std::vector<PointF> pts;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (skel.get_or(x + dx, y + dy, 0)) pts.push_back({static_cast<double>(x + dx), static_cast<double>(y + dy)});
  if (pts.size() < 2) return {1.0, 0.0};
  return img::fit_line_ls(pts).direction;
}

// Width of `mask` through pixel (x, y) perpendicular to `tangent`; 0 when the
// pixel itself is background.
inline double local_width(const img::BinaryMask& mask, int x, int y, PointF tangent, double step = 0.25) {
  if (!mask.get_or(x, y, 0)) return 0.0;
  const PointF p{static_cast<double>(x), static_cast<double>(y)};
  const PointF n{-tangent.y, tangent.x};
  return run_length(mask, p, n, step) + run_length(mask, p, -1.0 * n, step);
}

struct SkeletonSite {
  int x, y;
  PointF tangent;
};

inline double typical_width(const img::BinaryMask& mask) {
  long area = 0, boundary = 0;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask(x, y)) continue;
      ++area;
      if (!mask.get_or(x - 1, y, 0) || !mask.get_or(x + 1, y, 0) || !mask.get_or(x, y - 1, 0) ||
          !mask.get_or(x, y + 1, 0))
        ++boundary;
    }
  return boundary == 0 ? 0.0 : 2.0 * static_cast<double>(area) / static_cast<double>(boundary);
}

// Pruned skeleton. Components that pruning would erase keep their unpruned
// skeleton.
inline img::BinaryMask width_skeleton(const img::BinaryMask& mask, const WidthOptions& opt) {
  const auto skel = img::skeletonize(mask);
  const int len = opt.prune_len >= 0 ? opt.prune_len : static_cast<int>(std::ceil(typical_width(mask)));
  if (len <= 0) return skel;
  auto pruned = img::prune_spurs(skel, len);
  const auto cc = img::connected_components(skel, img::Connectivity::Eight);
  std::vector<bool> survives(cc.count + 1, false);
  for (std::size_t i = 0; i < pruned.size(); ++i)
    if (pruned.data()[i]) survives[cc.labels.data()[i]] = true;
  for (std::size_t i = 0; i < pruned.size(); ++i)
    if (int l = cc.labels.data()[i]; l && !survives[l]) pruned.data()[i] = 1;
  return pruned;
}

inline std::vector<SkeletonSite> skeleton_sites(const img::BinaryMask& skel, const WidthOptions& opt) {
  std::vector<SkeletonSite> out;
  for (int y = 0; y < skel.height(); ++y)
    for (int x = 0; x < skel.width(); ++x)
      if (skel(x, y)) out.push_back({x, y, skeleton_tangent(skel, x, y, opt.tangent_radius)});
  return out;
}

// Geodesic distance (8-connected steps) from the nearest skeleton endpoint;
// -1 off the skeleton or in components without endpoints.
inline img::LabelMap endpoint_distance(const img::BinaryMask& skel) {
  img::LabelMap d(skel.width(), skel.height(), -1);
  std::deque<std::pair<int, int>> q;
  for (int y = 0; y < skel.height(); ++y)
    for (int x = 0; x < skel.width(); ++x)
      if (skel(x, y) && img::skeleton_neighbours(skel, x, y) <= 1) {
        d(x, y) = 0;
        q.emplace_back(x, y);
      }
  while (!q.empty()) {
    const auto [x, y] = q.front();
    q.pop_front();
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int qx = x + dx, qy = y + dy;
        if (skel.get_or(qx, qy, 0) && d(qx, qy) < 0) {
          d(qx, qy) = d(x, y) + 1;
          q.emplace_back(qx, qy);
        }
      }
  }
  return d;
}

}  // namespace lithoseg::metrics
