#pragma once

#include <algorithm>
#include <vector>

#include "lithoseg/imgcore/components.hpp"
#include "lithoseg/imgcore/image.hpp"
#include "lithoseg/imgcore/threshold.hpp"

namespace lithoseg::coarse {

using img::BinaryMask;
using img::GrayImage;
using img::Rect;

// Half-open pixel box [x0, x1) x [y0, y1).
using BBox = Rect;

struct BoxOptions {
  long min_area = 25;
  int margin = 3;
};

inline std::vector<BBox> bboxes_from_layout(const BinaryMask& layout, const BoxOptions& opt = {}) {
  const auto cc = img::connected_components(layout, img::Connectivity::Eight);
  const auto sizes = img::component_sizes(cc);
  const auto boxes = img::component_boxes(cc);
  std::vector<BBox> out;
  for (int l = 1; l <= cc.count; ++l) {
    if (sizes[l] < opt.min_area) continue;
    const Rect b = boxes[l];
    out.push_back({std::max(0, b.x0 - opt.margin), std::max(0, b.y0 - opt.margin),
                   std::min(layout.width(), b.x1 + opt.margin), std::min(layout.height(), b.y1 + opt.margin)});
  }
  return out;
}

// Gray layouts are binarized with Otsu first; a constant layout has no boxes.
inline std::vector<BBox> bboxes_from_layout(const GrayImage& layout, const BoxOptions& opt = {}) {
  double t = 0.0;
  try {
    t = img::otsu_threshold(layout);
  } catch (const DomainError&) {
    return {};
  }
  return bboxes_from_layout(img::threshold_above(layout, t), opt);
}

}  // namespace lithoseg::coarse
