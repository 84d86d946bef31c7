#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <vector>

#include "lithoseg/imgcore/image.hpp"

namespace lithoseg::img {

enum class Connectivity { Four = 4, Eight = 8 };

struct Components {
  LabelMap labels;  // 0 = background, 1..count in first-touch raster order
  int count = 0;
};

namespace detail {

class DisjointSet {
 public:
  int make() {
    parent_.push_back(static_cast<int>(parent_.size()));
    return parent_.back();
  }
  int find(int a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<int> parent_;
};

}  // namespace detail

// Two-pass union-find labelling; final ids follow first-touch raster order.
inline Components connected_components(const BinaryMask& mask, Connectivity conn = Connectivity::Eight) {
  const int w = mask.width();
  const int h = mask.height();
  LabelMap provisional(w, h, -1);
  detail::DisjointSet sets;
  const bool eight = conn == Connectivity::Eight;

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask(x, y)) continue;
      int label = -1;
      auto visit = [&](int nx, int ny) {
        if (!provisional.in_bounds(nx, ny)) return;
        const int other = provisional(nx, ny);
        if (other < 0) return;
        if (label < 0)
          label = other;
        else
          sets.unite(label, other);
      };
      visit(x - 1, y);
      visit(x, y - 1);
      if (eight) {
        visit(x - 1, y - 1);
        visit(x + 1, y - 1);
      }
      provisional(x, y) = label < 0 ? sets.make() : label;
    }
  }

  Components out{LabelMap(w, h, 0), 0};
  std::vector<int> final_id;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int p = provisional(x, y);
      if (p < 0) continue;
      const int root = sets.find(p);
      if (static_cast<int>(final_id.size()) <= root) final_id.resize(root + 1, 0);
      if (final_id[root] == 0) final_id[root] = ++out.count;
      out.labels(x, y) = final_id[root];
    }
  }
  return out;
}

inline int count_components(const BinaryMask& mask, Connectivity conn = Connectivity::Eight) {
  return connected_components(mask, conn).count;
}

// Pixel count per label; index 0 is background.
inline std::vector<long> component_sizes(const Components& cc) {
  std::vector<long> sizes(cc.count + 1, 0);
  for (int v : cc.labels.data()) ++sizes[v];
  return sizes;
}

// Tight bounding box per label (index 0 unused).
inline std::vector<Rect> component_boxes(const Components& cc) {
  std::vector<Rect> boxes(cc.count + 1, Rect{INT32_MAX, INT32_MAX, INT32_MIN, INT32_MIN});
  for (int y = 0; y < cc.labels.height(); ++y)
    for (int x = 0; x < cc.labels.width(); ++x)
      if (const int l = cc.labels(x, y)) {
        auto& b = boxes[l];
        b.x0 = std::min(b.x0, x);
        b.y0 = std::min(b.y0, y);
        b.x1 = std::max(b.x1, x + 1);
        b.y1 = std::max(b.y1, y + 1);
      }
  return boxes;
}

inline BinaryMask component_mask(const Components& cc, int label) {
  BinaryMask m(cc.labels.width(), cc.labels.height());
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = cc.labels.data()[i] == label;
  return m;
}

// Keeps only the largest component (ties: lowest label).
inline BinaryMask largest_component(const BinaryMask& mask, Connectivity conn = Connectivity::Eight) {
  const auto cc = connected_components(mask, conn);
  if (cc.count == 0) return mask;
  const auto sizes = component_sizes(cc);
  int best = 1;
  for (int l = 2; l <= cc.count; ++l)
    if (sizes[l] > sizes[best]) best = l;
  return component_mask(cc, best);
}

}  // namespace lithoseg::img
