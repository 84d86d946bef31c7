#pragma once

#include <map>
#include <utility>
#include <vector>

#include "lithoseg/imgcore/components.hpp"
#include "lithoseg/metrics/width.hpp"

namespace lithoseg::metrics {

struct OsccReport {
  int opens = 0;
  int shorts = 0;
  int total() const { return opens + shorts; }
};

// Opens and shorts from the bipartite overlap graph between gt and pred
// components (8-connected); an edge needs at least min_overlap shared pixels.
inline OsccReport oscc(const img::BinaryMask& pred, const img::BinaryMask& gt, int min_overlap = 5) {
  require_same_shape(pred, gt, "oscc");
  const auto cg = img::connected_components(gt, img::Connectivity::Eight);
  const auto cp = img::connected_components(pred, img::Connectivity::Eight);
  std::map<std::pair<int, int>, int> shared;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const int g = cg.labels.data()[i], p = cp.labels.data()[i];
    if (g && p) ++shared[{g, p}];
  }
  std::vector<int> deg_g(cg.count + 1, 0), deg_p(cp.count + 1, 0);
  for (const auto& [key, n] : shared)
    if (n >= min_overlap) {
      ++deg_g[key.first];
      ++deg_p[key.second];
    }
  OsccReport r;
  for (int g = 1; g <= cg.count; ++g) r.opens += deg_g[g] == 0 ? 1 : deg_g[g] - 1;
  for (int p = 1; p <= cp.count; ++p) r.shorts += deg_p[p] == 0 ? 1 : deg_p[p] - 1;
  return r;
}

struct EsdOptions {
  double tau_rel = 0.5;
  int min_run = 3;
  WidthOptions width{};
};

// Runs of at least min_run 8-connected gt-skeleton pixels where the pred
// width differs from the gt width by more than tau_rel relative.
inline int esd(const img::BinaryMask& pred, const img::BinaryMask& gt, const EsdOptions& opt = {}) {
  require_same_shape(pred, gt, "esd");
  const auto skel = width_skeleton(gt, opt.width);
  img::BinaryMask significant(gt.width(), gt.height());
  for (const auto& s : skeleton_sites(skel, opt.width)) {
    const double wg = local_width(gt, s.x, s.y, s.tangent, opt.width.step);
    const double wp = local_width(pred, s.x, s.y, s.tangent, opt.width.step);
    if (wg > 0.0 && std::abs(wp - wg) > opt.tau_rel * wg) significant(s.x, s.y) = 1;
  }
  const auto cc = img::connected_components(significant, img::Connectivity::Eight);
  int runs = 0;
  const auto sizes = img::component_sizes(cc);
  for (int l = 1; l <= cc.count; ++l)
    if (sizes[l] >= opt.min_run) ++runs;
  return runs;
}

struct CdOptions {
  WidthOptions width{};
  // Skeleton pixels closer than this (geodesically) to a skeleton end are
  // left out.
  double end_trim = 0.0;
};

inline double cd(const img::BinaryMask& mask, const CdOptions& opt = {}) {
  if (img::count_foreground(mask) == 0) throw DomainError("cd: empty mask");
  const auto skel = width_skeleton(mask, opt.width);
  const auto dist = opt.end_trim > 0.0 ? endpoint_distance(skel) : img::LabelMap{};
  double sum = 0.0;
  long n = 0;
  for (const auto& s : skeleton_sites(skel, opt.width)) {
    if (opt.end_trim > 0.0) {
      const int d = dist(s.x, s.y);
      if (d >= 0 && d < opt.end_trim) continue;
    }
    sum += local_width(mask, s.x, s.y, s.tangent, opt.width.step);
    ++n;
  }
  if (n == 0) throw DomainError("cd: no skeleton sites left after trimming");
  return sum / static_cast<double>(n);
}

}  // namespace lithoseg::metrics
