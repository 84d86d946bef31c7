#pragma once

#include "lithoseg/imgcore/image.hpp"

namespace lithoseg::metrics {

using img::BinaryMask;

struct SegReport {
  double iou = 1.0;
  double pa = 1.0;
  double f1 = 1.0;
};

struct OverlapCounts {
  long intersection = 0;
  long pred = 0;
  long gt = 0;
  long total = 0;

  long union_size() const { return pred + gt - intersection; }
  long agree() const { return total - (pred + gt - 2 * intersection); }
};

inline OverlapCounts overlap_counts(const BinaryMask& pred, const BinaryMask& gt) {
  require_same_shape(pred, gt, "segmentation metrics");
  OverlapCounts c;
  c.total = static_cast<long>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred.data()[i] != 0;
    const bool g = gt.data()[i] != 0;
    c.pred += p;
    c.gt += g;
    c.intersection += p && g;
  }
  return c;
}

// IoU and F1 are 1 when both masks are empty.
inline SegReport seg_metrics(const BinaryMask& pred, const BinaryMask& gt) {
  const auto c = overlap_counts(pred, gt);
  SegReport r;
  const long u = c.union_size();
  r.iou = u == 0 ? 1.0 : static_cast<double>(c.intersection) / static_cast<double>(u);
  r.f1 = c.pred + c.gt == 0 ? 1.0 : 2.0 * static_cast<double>(c.intersection) / static_cast<double>(c.pred + c.gt);
  r.pa = c.total == 0 ? 1.0 : static_cast<double>(c.agree()) / static_cast<double>(c.total);
  return r;
}

inline double iou(const BinaryMask& pred, const BinaryMask& gt) { return seg_metrics(pred, gt).iou; }

}  // namespace lithoseg::metrics
