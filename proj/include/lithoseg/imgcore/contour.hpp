#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "lithoseg/imgcore/components.hpp"
#include "lithoseg/imgcore/geometry.hpp"
#include "lithoseg/imgcore/image.hpp"

namespace lithoseg::img {

// Closed sub-pixel boundary with one outward unit normal per point. Points run
// with the foreground on the left (positive shoelace area), so normals, the
// tangent rotated by -90 degrees, point from groove interior to background.
struct Contour {
  std::vector<PointF> points;
  std::vector<PointF> normals;
  bool closed = true;
  int component = 0;  // source label in the traced mask, 0 if unknown

  std::size_t size() const { return points.size(); }
};

struct TraceOptions {
  double spacing = 1.0;   // arc-length spacing after resampling
  int normal_window = 3;  // +-points used for the central-difference tangent
};

// Central-difference tangents over +-window neighbours, rotated -90 degrees.
inline Contour estimate_normals(Contour c, int window = 3) {
  const int n = static_cast<int>(c.points.size());
  if (window < 1) throw DomainError("estimate_normals: window must be >= 1");
  if (!c.closed || n < 2 * window + 1)
    throw DomainError("estimate_normals: contour too short (" + std::to_string(n) + " points, window " +
                      std::to_string(window) + ")");
  c.normals.resize(n);
  for (int i = 0; i < n; ++i) {
    PointF t{};
    for (int w = window; w >= 1 && norm(t) == 0.0; --w)
      t = c.points[(i + w) % n] - c.points[(i - w + n) % n];
    const double len = norm(t);
    if (len == 0.0) throw DomainError("estimate_normals: coincident contour points");
    c.normals[i] = rotate_cw((1.0 / len) * t);
  }
  return c;
}

// Uniform arc-length resampling of a closed polyline; n = round(P / spacing).
inline std::vector<PointF> resample_closed(const std::vector<PointF>& poly, double spacing) {
  const double total = perimeter(poly);
  if (poly.size() < 2 || total <= 0.0) return poly;
  const int n = std::max(3, static_cast<int>(std::lround(total / spacing)));
  const double step = total / n;
  std::vector<PointF> out;
  out.reserve(n);
  std::size_t seg = 0;
  double seg_start = 0.0;
  double seg_len = norm(poly[1 % poly.size()] - poly[0]);
  for (int k = 0; k < n; ++k) {
    const double s = k * step;
    while (seg_start + seg_len < s && seg + 1 < poly.size()) {
      seg_start += seg_len;
      ++seg;
      seg_len = norm(poly[(seg + 1) % poly.size()] - poly[seg]);
    }
    const PointF a = poly[seg];
    const PointF b = poly[(seg + 1) % poly.size()];
    const double f = seg_len > 0.0 ? std::clamp((s - seg_start) / seg_len, 0.0, 1.0) : 0.0;
    out.push_back(a + f * (b - a));
  }
  return out;
}

namespace detail {

// Crossing points live on half-integer coordinates; key them on the doubled
// lattice.
inline std::int64_t crossing_key(int x2, int y2) {
  return (static_cast<std::int64_t>(y2) << 32) ^ static_cast<std::uint32_t>(x2);
}

// Oriented marching squares on one component (padded by background). Saddles
// join the diagonal foreground pixels. Returns closed loops in doubled
// coordinates, foreground on the left.
inline std::vector<std::vector<std::pair<int, int>>> march_loops(const BinaryMask& m) {
  struct Seg {
    int ax, ay, bx, by;
  };
  std::vector<Seg> segs;
  const int w = m.width();
  const int h = m.height();
  auto fg = [&](int x, int y) { return m.get_or(x, y, 0) != 0; };

  for (int y = -1; y < h; ++y) {
    for (int x = -1; x < w; ++x) {
      // corners: 0 TL, 1 TR, 2 BR, 3 BL (doubled coords)
      const int cx[4] = {2 * x, 2 * x + 2, 2 * x + 2, 2 * x};
      const int cy[4] = {2 * y, 2 * y, 2 * y + 2, 2 * y + 2};
      const bool v[4] = {fg(x, y), fg(x + 1, y), fg(x + 1, y + 1), fg(x, y + 1)};
      const int nfg = v[0] + v[1] + v[2] + v[3];
      if (nfg == 0 || nfg == 4) continue;
      // edge e joins corner e and e+1; crossing at its midpoint
      auto mid = [&](int e) { return std::pair<int, int>{(cx[e] + cx[(e + 1) % 4]) / 2, (cy[e] + cy[(e + 1) % 4]) / 2}; };
      auto emit = [&](int e0, int e1, int ref_corner, bool ref_is_fg) {
        auto [ax, ay] = mid(e0);
        auto [bx, by] = mid(e1);
        const long crs = static_cast<long>(bx - ax) * (cy[ref_corner] - ay) -
                         static_cast<long>(by - ay) * (cx[ref_corner] - ax);
        const bool left = crs > 0;
        if (left == ref_is_fg)
          segs.push_back({ax, ay, bx, by});
        else
          segs.push_back({bx, by, ax, ay});
      };
      const bool saddle = nfg == 2 && v[0] == v[2];
      if (saddle) {
        // cut off each background corner; foreground stays connected
        for (int c = 0; c < 4; ++c)
          if (!v[c]) emit((c + 3) % 4, c, c, false);
        continue;
      }
      int edges[2];
      int k = 0;
      for (int e = 0; e < 4; ++e)
        if (v[e] != v[(e + 1) % 4]) edges[k++] = e;
      int ref = 0;
      while (!v[ref]) ++ref;
      emit(edges[0], edges[1], ref, true);
    }
  }

  std::unordered_map<std::int64_t, std::size_t> by_start;
  by_start.reserve(segs.size() * 2);
  for (std::size_t i = 0; i < segs.size(); ++i) by_start[crossing_key(segs[i].ax, segs[i].ay)] = i;

  std::vector<char> used(segs.size(), 0);
  std::vector<std::vector<std::pair<int, int>>> loops;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    if (used[s]) continue;
    std::vector<std::pair<int, int>> loop;
    std::size_t cur = s;
    while (!used[cur]) {
      used[cur] = 1;
      loop.emplace_back(segs[cur].ax, segs[cur].ay);
      auto it = by_start.find(crossing_key(segs[cur].bx, segs[cur].by));
      if (it == by_start.end()) break;
      cur = it->second;
    }
    loops.push_back(std::move(loop));
  }
  return loops;
}

// Drops vertices that are collinear with their neighbours.
inline std::vector<PointF> simplify_collinear(const std::vector<PointF>& poly) {
  if (poly.size() < 4) return poly;
  std::vector<PointF> out;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const PointF a = poly[(i + n - 1) % n];
    const PointF b = poly[i];
    const PointF c = poly[(i + 1) % n];
    if (std::abs(cross(b - a, c - b)) > 1e-12) out.push_back(b);
  }
  return out.size() >= 3 ? out : poly;
}

}  // namespace detail

// Outer boundary of one component as a raw (unresampled) polygon.
inline std::vector<PointF> outer_boundary(const BinaryMask& component_only, int offset_x = 0, int offset_y = 0) {
  const auto loops = detail::march_loops(component_only);
  std::vector<PointF> best;
  double best_area = 0.0;
  for (const auto& loop : loops) {
    std::vector<PointF> poly;
    poly.reserve(loop.size());
    for (auto [x2, y2] : loop) poly.push_back({x2 * 0.5 + offset_x, y2 * 0.5 + offset_y});
    const double a = signed_area(poly);
    if (a > best_area) {
      best_area = a;
      best = std::move(poly);
    }
  }
  return detail::simplify_collinear(best);
}

// One closed contour per 8-connected component (outer boundary only), on the
// 0.5 isoline, resampled to uniform spacing, with normals filled.
inline std::vector<Contour> trace_contours(const BinaryMask& mask, const TraceOptions& opt = {}) {
  const auto cc = connected_components(mask, Connectivity::Eight);
  const auto boxes = component_boxes(cc);
  std::vector<Contour> out;
  out.reserve(cc.count);
  for (int label = 1; label <= cc.count; ++label) {
    const Rect b = boxes[label];
    BinaryMask local(b.width(), b.height());
    for (int y = b.y0; y < b.y1; ++y)
      for (int x = b.x0; x < b.x1; ++x) local(x - b.x0, y - b.y0) = cc.labels(x, y) == label;
    Contour c;
    c.component = label;
    c.points = resample_closed(outer_boundary(local, b.x0, b.y0), opt.spacing);
    const int n = static_cast<int>(c.points.size());
    c = estimate_normals(std::move(c), std::max(1, std::min(opt.normal_window, (n - 1) / 2)));
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace lithoseg::img
