#pragma once

#include "lithoseg/imgcore/image.hpp"

namespace lithoseg::img {

enum class MorphOp { Erode, Dilate, Open, Close };

namespace detail {

// Square structuring element of side 2r+1, applied separably. Pixels outside
// the image count as background, so erosion removes an r-wide border ring.
inline BinaryMask morph_pass(const BinaryMask& in, int radius, bool dilate) {
  const int w = in.width();
  const int h = in.height();
  BinaryMask rows(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool acc = !dilate;
      for (int dx = -radius; dx <= radius; ++dx) {
        const bool v = in.get_or(x + dx, y, 0) != 0;
        acc = dilate ? (acc || v) : (acc && v);
      }
      rows(x, y) = acc;
    }
  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool acc = !dilate;
      for (int dy = -radius; dy <= radius; ++dy) {
        const bool v = rows.get_or(x, y + dy, 0) != 0;
        acc = dilate ? (acc || v) : (acc && v);
      }
      out(x, y) = acc;
    }
  return out;
}

}  // namespace detail

inline BinaryMask morphology(const BinaryMask& mask, MorphOp op, int radius) {
  if (radius < 1) throw DomainError("morphology: radius must be >= 1");
  switch (op) {
    case MorphOp::Erode:
      return detail::morph_pass(mask, radius, false);
    case MorphOp::Dilate:
      return detail::morph_pass(mask, radius, true);
    case MorphOp::Open:
      return detail::morph_pass(detail::morph_pass(mask, radius, false), radius, true);
    case MorphOp::Close:
      return detail::morph_pass(detail::morph_pass(mask, radius, true), radius, false);
  }
  return mask;
}

inline BinaryMask erode(const BinaryMask& m, int r) { return morphology(m, MorphOp::Erode, r); }
inline BinaryMask dilate(const BinaryMask& m, int r) { return morphology(m, MorphOp::Dilate, r); }
inline BinaryMask open(const BinaryMask& m, int r) { return morphology(m, MorphOp::Open, r); }
inline BinaryMask close(const BinaryMask& m, int r) { return morphology(m, MorphOp::Close, r); }

}  // namespace lithoseg::img
