#pragma once

#include <array>
#include <cstdlib>
#include <vector>

#include "lithoseg/imgcore/image.hpp"

namespace lithoseg::img {

namespace detail {

// Neighbours in clockwise order starting north: N NE E SE S SW W NW.
inline constexpr std::array<int, 8> kDx{0, 1, 1, 1, 0, -1, -1, -1};
inline constexpr std::array<int, 8> kDy{-1, -1, 0, 1, 1, 1, 0, -1};

inline std::array<bool, 8> ring(const BinaryMask& m, int x, int y) {
  std::array<bool, 8> r{};
  for (int k = 0; k < 8; ++k) r[k] = m.get_or(x + kDx[k], y + kDy[k], 0) != 0;
  return r;
}

inline int neighbour_count(const std::array<bool, 8>& r) {
  int n = 0;
  for (bool b : r) n += b;
  return n;
}

// Simple point for (8, 4) topology: the foreground neighbours form exactly
// one 8-component and the background neighbours form exactly one
// 4-component that is 4-adjacent to p. Components are counted inside the
// 3x3 window with p itself excluded.
inline bool is_simple(const std::array<bool, 8>& r) {
  auto count = [&](bool want_fg) {
    std::array<int, 8> seen{};
    int comps = 0;
    for (int s = 0; s < 8; ++s) {
      if (r[s] != want_fg || seen[s]) continue;
      bool touches_edge = false;
      std::vector<int> stack{s};
      seen[s] = 1;
      while (!stack.empty()) {
        const int k = stack.back();
        stack.pop_back();
        touches_edge |= k % 2 == 0;
        for (int j = 0; j < 8; ++j) {
          if (seen[j] || r[j] != want_fg) continue;
          const int ddx = std::abs(kDx[j] - kDx[k]);
          const int ddy = std::abs(kDy[j] - kDy[k]);
          const bool adjacent = want_fg ? (ddx <= 1 && ddy <= 1) : (ddx + ddy == 1);
          if (!adjacent) continue;
          seen[j] = 1;
          stack.push_back(j);
        }
      }
      if (want_fg || touches_edge) ++comps;
    }
    return comps;
  };
  return count(true) == 1 && count(false) == 1;
}

}  // namespace detail

inline int skeleton_neighbours(const BinaryMask& m, int x, int y) {
  return detail::neighbour_count(detail::ring(m, x, y));
}

// Sequential topology-preserving thinning in four directional passes
// (N, S, E, W borders). Endpoints (exactly one neighbour) are kept, so the
// result is an 8-connected one-pixel-wide skeleton with the same number of
// 8-components as the input.
inline BinaryMask skeletonize(const BinaryMask& mask) {
  BinaryMask s = mask;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int dir = 0; dir < 4; ++dir) {
      static constexpr int kSides[4] = {0, 4, 2, 6};  // N, S, E, W
      const int side = kSides[dir];
      // one border layer per pass: candidates come from the state before
      // the pass, then each deletion is re-checked against the current state
      std::vector<std::pair<int, int>> candidates;
      for (int y = 0; y < s.height(); ++y)
        for (int x = 0; x < s.width(); ++x) {
          if (!s(x, y)) continue;
          const auto r = detail::ring(s, x, y);
          if (!r[side] && detail::neighbour_count(r) > 1 && detail::is_simple(r)) candidates.emplace_back(x, y);
        }
      for (auto [x, y] : candidates) {
        const auto r = detail::ring(s, x, y);
        if (detail::neighbour_count(r) <= 1 || !detail::is_simple(r)) continue;
        s(x, y) = 0;
        changed = true;
      }
    }
  }
  return s;
}

// Removes side branches shorter than `max_len` pixels: endpoints are peeled
// max_len times, then the surviving ends regrow along the original skeleton.
inline BinaryMask prune_spurs(const BinaryMask& skel, int max_len) {
  BinaryMask core = skel;
  for (int it = 0; it < max_len; ++it) {
    std::vector<std::pair<int, int>> ends;
    for (int y = 0; y < core.height(); ++y)
      for (int x = 0; x < core.width(); ++x)
        if (core(x, y) && skeleton_neighbours(core, x, y) == 1) ends.emplace_back(x, y);
    if (ends.empty()) break;
    for (auto [x, y] : ends) core(x, y) = 0;
  }
  BinaryMask grown(skel.width(), skel.height());
  for (int y = 0; y < core.height(); ++y)
    for (int x = 0; x < core.width(); ++x)
      if (core(x, y) && skeleton_neighbours(core, x, y) == 1) grown(x, y) = 1;
  for (int it = 0; it < max_len; ++it) {
    BinaryMask next = grown;
    for (int y = 0; y < skel.height(); ++y)
      for (int x = 0; x < skel.width(); ++x) {
        if (!grown(x, y)) continue;
        for (int k = 0; k < 8; ++k) {
          const int qx = x + detail::kDx[k];
          const int qy = y + detail::kDy[k];
          if (skel.get_or(qx, qy, 0) && !core(qx, qy)) next(qx, qy) = 1;
        }
      }
    grown = std::move(next);
  }
  BinaryMask out = core;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = core.data()[i] || grown.data()[i];
  return out;
}

inline std::vector<PointF> foreground_points(const BinaryMask& m) {
  std::vector<PointF> pts;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m(x, y)) pts.push_back({static_cast<double>(x), static_cast<double>(y)});
  return pts;
}

}  // namespace lithoseg::img
