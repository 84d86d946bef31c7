#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lithoseg/imgcore/components.hpp"
#include "lithoseg/imgcore/contour.hpp"
#include "lithoseg/imgcore/geometry.hpp"
#include "lithoseg/metrics/width.hpp"

namespace lithoseg::metrics {

// Range, mean absolute and mean square of a residual array taken about its
// own mean.
struct EdgeStats {
  double range = 0.0;
  double mean_abs = 0.0;
  double mean_sq = 0.0;
  long n = 0;
};

inline EdgeStats edge_stats(std::span<const double> values) {
  EdgeStats s;
  s.n = static_cast<long>(values.size());
  if (values.empty()) return s;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : values) {
    const double e = v - mean;
    lo = std::min(lo, e);
    hi = std::max(hi, e);
    s.mean_abs += std::abs(e);
    s.mean_sq += e * e;
  }
  s.range = hi - lo;
  s.mean_abs /= static_cast<double>(s.n);
  s.mean_sq /= static_cast<double>(s.n);
  return s;
}

struct RoughReport {
  double r_e = 0.0, r_ea = 0.0, r_eq2 = 0.0;
  double r_w = 0.0, r_wa = 0.0, r_wq2 = 0.0;
  long edge_samples = 0;
  long width_samples = 0;
  int runs = 0;
};

// Sample-count weighted average of per-edge and per-run width statistics.
inline RoughReport combine(const std::vector<EdgeStats>& edges, const std::vector<EdgeStats>& widths) {
  RoughReport r;
  for (const auto& e : edges) {
    r.r_e += e.range * e.n;
    r.r_ea += e.mean_abs * e.n;
    r.r_eq2 += e.mean_sq * e.n;
    r.edge_samples += e.n;
  }
  for (const auto& w : widths) {
    r.r_w += w.range * w.n;
    r.r_wa += w.mean_abs * w.n;
    r.r_wq2 += w.mean_sq * w.n;
    r.width_samples += w.n;
  }
  if (r.edge_samples > 0) {
    r.r_e /= r.edge_samples;
    r.r_ea /= r.edge_samples;
    r.r_eq2 /= r.edge_samples;
  }
  if (r.width_samples > 0) {
    r.r_w /= r.width_samples;
    r.r_wa /= r.width_samples;
    r.r_wq2 /= r.width_samples;
  }
  r.runs = static_cast<int>(widths.size());
  return r;
}

// Roughness straight from edge-position arrays: each pair (left, right) is
// one line; widths are right - left.
inline RoughReport roughness_from_edges(const std::vector<std::vector<double>>& left,
                                        const std::vector<std::vector<double>>& right) {
  if (left.size() != right.size()) throw ShapeError("roughness_from_edges: edge lists differ in length");
  std::vector<EdgeStats> edges, widths;
  for (std::size_t i = 0; i < left.size(); ++i) {
    if (left[i].size() != right[i].size()) throw ShapeError("roughness_from_edges: edge arrays differ in length");
    edges.push_back(edge_stats(left[i]));
    edges.push_back(edge_stats(right[i]));
    std::vector<double> w(left[i].size());
    for (std::size_t k = 0; k < w.size(); ++k) w[k] = right[i][k] - left[i][k];
    widths.push_back(edge_stats(w));
  }
  return combine(edges, widths);
}

struct RoughOptions {
  int min_run = 32;          // shortest straight run that is measured
  double split_tol = 10.0;   // max deviation of a run from its chord
  WidthOptions width{};
};

// One straight run: reference line and, per unit step along it, the signed
// offsets of the edge on each side (left offset < 0 < right offset).
struct EdgeRun {
  img::Line line;
  std::vector<double> u;
  std::vector<double> left;
  std::vector<double> right;
};

class RoughnessError : public DomainError {
 public:
  using DomainError::DomainError;
};

namespace detail {

// Longest geodesic path (8-connected) through a skeleton component, found by
// a double breadth-first search; side branches are left out.
inline std::vector<PointF> longest_path(const std::vector<std::pair<int, int>>& pix, int w, int h) {
  std::vector<int> idx(static_cast<std::size_t>(w) * h, -1);
  for (std::size_t i = 0; i < pix.size(); ++i) idx[pix[i].second * w + pix[i].first] = static_cast<int>(i);
  std::vector<int> parent(pix.size());
  auto bfs = [&](int start) {
    std::vector<int> dist(pix.size(), -1);
    std::deque<int> q{start};
    dist[start] = 0;
    parent[start] = -1;
    int last = start;
    while (!q.empty()) {
      const int c = q.front();
      q.pop_front();
      last = c;
      for (int k = 0; k < 8; ++k) {
        const int x = pix[c].first + img::detail::kDx[k], y = pix[c].second + img::detail::kDy[k];
        if (x < 0 || y < 0 || x >= w || y >= h) continue;
        const int n = idx[y * w + x];
        if (n >= 0 && dist[n] < 0) {
          dist[n] = dist[c] + 1;
          parent[n] = c;
          q.push_back(n);
        }
      }
    }
    return last;
  };
  const int end = bfs(bfs(0));
  std::vector<PointF> out;
  for (int c = end; c >= 0; c = parent[c])
    out.push_back({static_cast<double>(pix[c].first), static_cast<double>(pix[c].second)});
  return out;
}

inline void split_straight(std::span<const PointF> pts, const RoughOptions& opt, std::vector<std::vector<PointF>>& out) {
  if (static_cast<int>(pts.size()) < opt.min_run) return;
  const PointF a = pts.front(), b = pts.back();
  const PointF d = b - a;
  const double len = img::norm(d);
  std::size_t worst = 0;
  double dev = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double e = len > 0 ? std::abs(img::cross(d, pts[i] - a)) / len : img::norm(pts[i] - a);
    if (e > dev) {
      dev = e;
      worst = i;
    }
  }
  if (dev <= opt.split_tol || worst == 0 || worst + 1 == pts.size()) {
    out.emplace_back(pts.begin(), pts.end());
    return;
  }
  split_straight(pts.subspan(0, worst + 1), opt, out);
  split_straight(pts.subspan(worst), opt, out);
}

// Nearest crossings of the line p + t n with the polygon on either side.
inline std::pair<double, double> nearest_crossings(std::span<const PointF> poly, PointF p, PointF n) {
  double pos = std::numeric_limits<double>::infinity(), neg = -pos;
  const std::size_t m = poly.size();
  for (std::size_t i = 0; i < m; ++i) {
    const PointF a = poly[i] - p, b = poly[(i + 1) % m] - p;
    // side of each vertex relative to the line through p along n
    const double sa = img::cross(n, a), sb = img::cross(n, b);
    if ((sa > 0) == (sb > 0) || sa == sb) continue;
    const double f = sa / (sa - sb);
    const double t = img::dot(n, a + f * (b - a));
    if (t >= 0 && t < pos) pos = t;
    if (t < 0 && t > neg) neg = t;
  }
  return {neg, pos};
}

}  // namespace detail

// Straight skeleton runs of every component with edge offsets measured
// against the component's traced sub-pixel boundary.
inline std::vector<EdgeRun> edge_runs(const img::BinaryMask& mask, const RoughOptions& opt = {}) {
  const int w = mask.width(), h = mask.height();
  const auto cc = img::connected_components(mask, img::Connectivity::Eight);
  const auto boxes = img::component_boxes(cc);
  const auto skel = width_skeleton(mask, opt.width);

  const auto sc = img::connected_components(skel, img::Connectivity::Eight);
  std::vector<std::vector<std::pair<int, int>>> skel_pixels(sc.count + 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (int l = sc.labels(x, y)) skel_pixels[l].emplace_back(x, y);

  std::vector<std::vector<PointF>> boundary(cc.count + 1);
  auto boundary_of = [&](int label) -> const std::vector<PointF>& {
    auto& poly = boundary[label];
    if (poly.empty()) {
      const auto b = boxes[label];
      img::BinaryMask local(b.width(), b.height());
      for (int y = b.y0; y < b.y1; ++y)
        for (int x = b.x0; x < b.x1; ++x) local(x - b.x0, y - b.y0) = cc.labels(x, y) == label;
      poly = img::outer_boundary(local, b.x0, b.y0);
    }
    return poly;
  };

  std::vector<EdgeRun> runs;
  for (int a = 1; a <= sc.count; ++a) {
    const auto& pix = skel_pixels[a];
    if (static_cast<int>(pix.size()) < opt.min_run) continue;
    const int comp = cc.labels(pix[0].first, pix[0].second);
    const auto ordered = detail::longest_path(pix, w, h);
    std::vector<std::vector<PointF>> pieces;
    detail::split_straight(ordered, opt, pieces);
    for (const auto& piece : pieces) {
      EdgeRun run;
      run.line = img::fit_line_ls(piece);
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (auto p : piece) {
        lo = std::min(lo, run.line.project(p));
        hi = std::max(hi, run.line.project(p));
      }
      const auto& poly = boundary_of(comp);
      const PointF n = run.line.normal();
      std::vector<double> widths;
      for (double u = std::ceil(lo); u <= hi; u += 1.0) {
        const auto [neg, pos] = detail::nearest_crossings(poly, run.line.at(u), n);
        if (!std::isfinite(neg) || !std::isfinite(pos)) continue;
        run.u.push_back(u);
        run.left.push_back(neg);
        run.right.push_back(pos);
        widths.push_back(pos - neg);
      }
      if (widths.empty()) continue;
      // Drop samples within half a typical width of either end of the run.
      std::nth_element(widths.begin(), widths.begin() + widths.size() / 2, widths.end());
      const double trim = 0.5 * widths[widths.size() / 2];
      EdgeRun kept{run.line, {}, {}, {}};
      for (std::size_t i = 0; i < run.u.size(); ++i)
        if (run.u[i] >= lo + trim && run.u[i] <= hi - trim) {
          kept.u.push_back(run.u[i]);
          kept.left.push_back(run.left[i]);
          kept.right.push_back(run.right[i]);
        }
      if (static_cast<int>(kept.u.size()) >= 2) runs.push_back(std::move(kept));
    }
  }
  return runs;
}

inline RoughReport roughness(const img::BinaryMask& mask, const RoughOptions& opt = {},
                             const std::string& image_name = "") {
  const auto runs = edge_runs(mask, opt);
  if (runs.empty())
    throw RoughnessError("roughness: no line-like component of at least " + std::to_string(opt.min_run) + " px" +
                         (image_name.empty() ? std::string{} : " in " + image_name));
  std::vector<std::vector<double>> left, right;
  for (const auto& r : runs) {
    left.push_back(r.left);
    right.push_back(r.right);
  }
  return roughness_from_edges(left, right);
}

}  // namespace lithoseg::metrics
