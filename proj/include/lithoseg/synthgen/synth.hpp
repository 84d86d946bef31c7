#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "lithoseg/error.hpp"
#include "lithoseg/imgcore/image.hpp"
#include "lithoseg/imgcore/io.hpp"
#include "lithoseg/rng.hpp"

namespace lithoseg::synth {

using img::BinaryMask;
using img::GrayImage;
using img::PointF;

enum class Pattern { ParallelLines, Elbows, Serpentine };

inline std::string to_string(Pattern p) {
  switch (p) {
    case Pattern::ParallelLines:
      return "parallel_lines";
    case Pattern::Elbows:
      return "elbows";
    case Pattern::Serpentine:
      return "serpentine";
  }
  return "?";
}

// A spec value is invalid; `field` names the offending key.
class SpecError : public DomainError {
 public:
  SpecError(std::string field, const std::string& what)
      : DomainError(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

inline Pattern pattern_from_string(const std::string& s) {
  if (s == "parallel_lines") return Pattern::ParallelLines;
  if (s == "elbows") return Pattern::Elbows;
  if (s == "serpentine") return Pattern::Serpentine;
  throw SpecError("pattern", "unknown pattern '" + s + "'");
}

struct SynthSpec {
  int image_size = 256;
  Pattern pattern = Pattern::ParallelLines;
  double pitch = 80.0;
  double line_width = 40.0;
  double orientation = 90.0;  // degrees, line direction from the +x axis
  double roughness_sigma = 1.5;
  double roughness_corr_len = 10.0;
  double bloom_width = 3.0;
  double bloom_gain = 0.35;
  double blur_sigma = 1.0;
  double noise_sigma = 0.03;
  double vertical_contrast = 0.6;
  double process_bias = 0.0;
  double defocus_extra_blur = 0.0;
  std::uint64_t seed = 1;

  double groove_level = 0.25;
  double space_level = 0.45;
  double scan_cone_deg = 20.0;  // edges this close to the scan (x) axis lose contrast
  double margin = 4.0;          // min distance between grooves and the image border

  void validate() const {
    if (image_size < 16 || image_size > 8192) throw SpecError("image_size", "must be in [16, 8192]");
    if (!(line_width > 0.0)) throw SpecError("line_width", "must be > 0");
    if (!(pitch > line_width)) throw SpecError("pitch", "must exceed line_width");
    if (!(roughness_sigma >= 0.0)) throw SpecError("roughness_sigma", "must be >= 0");
    if (!(roughness_corr_len >= 1.0)) throw SpecError("roughness_corr_len", "must be >= 1");
    if (!(vertical_contrast > 0.0 && vertical_contrast <= 1.0))
      throw SpecError("vertical_contrast", "must be in (0, 1]");
    if (!(bloom_width > 0.0)) throw SpecError("bloom_width", "must be > 0");
    if (!(bloom_gain >= 0.0)) throw SpecError("bloom_gain", "must be >= 0");
    if (!(blur_sigma >= 0.0)) throw SpecError("blur_sigma", "must be >= 0");
    if (!(defocus_extra_blur >= 0.0)) throw SpecError("defocus_extra_blur", "must be >= 0");
    if (!(noise_sigma >= 0.0)) throw SpecError("noise_sigma", "must be >= 0");
    if (!(line_width + process_bias > 0.0)) throw SpecError("process_bias", "collapses the line width");
    if (!std::isfinite(orientation)) throw SpecError("orientation", "must be finite");
  }
};

// Stationary Gaussian AR(1) sequence with standard deviation sigma and
// autocorrelation exp(-d / xi).
inline std::vector<double> gen_rough_edge(int n, double sigma, double xi, std::uint64_t seed) {
  if (n < 2) throw DomainError("gen_rough_edge: n must be >= 2");
  if (sigma < 0.0 || xi < 1.0) throw DomainError("gen_rough_edge: need sigma >= 0 and xi >= 1");
  std::vector<double> x(n, 0.0);
  if (sigma == 0.0) return x;
  Rng rng(seed);
  const double rho = std::exp(-1.0 / xi);
  const double innovation = std::sqrt(1.0 - rho * rho) * sigma;
  x[0] = sigma * rng.normal();
  for (int t = 0; t + 1 < n; ++t) x[t + 1] = rho * x[t] + innovation * rng.normal();
  return x;
}

// One displaced groove edge. displacement[k] is the signed outward offset of
// the edge at arc position k (unit spacing) from `origin` along `direction`.
struct EdgeTrack {
  int segment = 0;
  int side = +1;  // +1: left of the centreline direction, -1: right
  PointF origin;
  PointF direction;
  PointF outward;
  std::vector<double> displacement;

  double at(double u) const {
    if (displacement.empty()) return 0.0;
    const double c = std::clamp(u, 0.0, static_cast<double>(displacement.size() - 1));
    const auto k = static_cast<std::size_t>(std::floor(c));
    if (k + 1 >= displacement.size()) return displacement.back();
    const double f = c - static_cast<double>(k);
    return displacement[k] + f * (displacement[k + 1] - displacement[k]);
  }
};

// Straight groove piece: centreline a->b, flat ends at a and b.
struct Segment {
  PointF a;
  PointF b;
  double half_width = 0.0;

  PointF direction() const { return (1.0 / img::norm(b - a)) * (b - a); }
  PointF left() const {
    const PointF d = direction();
    return {-d.y, d.x};
  }
  double length() const { return img::norm(b - a); }
};

struct Pattern2D {
  std::vector<Segment> segments;
  int components = 0;
};

namespace detail {

inline PointF rotate_about(PointF p, PointF c, double deg) {
  return c + img::rotate(p - c, deg * std::numbers::pi / 180.0);
}

inline Pattern2D build_pattern(const SynthSpec& s) {
  Pattern2D out;
  const double size = s.image_size;
  const PointF centre{(size - 1) / 2.0, (size - 1) / 2.0};
  const double hw = s.line_width / 2.0;
  const double reach = size * 1.5;  // long enough to leave the image
  const double usable = size / 2.0 - s.margin - hw - std::max(0.0, s.process_bias / 2.0) -
                        3.0 * s.roughness_sigma;

  auto rotated = [&](PointF a, PointF b, double half) {
    return Segment{rotate_about(a, centre, s.orientation), rotate_about(b, centre, s.orientation), half};
  };

  switch (s.pattern) {
    case Pattern::ParallelLines: {
      // lines along +x before rotation, offsets symmetric about the centre
      const int k_max = static_cast<int>(std::floor(usable / s.pitch + 1e-9));
      if (usable < 0.0) throw SpecError("line_width", "pattern does not fit in image");
      for (int k = -k_max; k <= k_max; ++k) {
        const double off = k * s.pitch;
        out.segments.push_back(rotated({centre.x - reach, centre.y + off}, {centre.x + reach, centre.y + off}, hw));
        ++out.components;
      }
      break;
    }
    case Pattern::Elbows: {
      // nested L shapes: corner near the upper-left, arms run right and down
      const double lo = centre.y - usable;
      int placed = 0;
      for (int k = 0;; ++k) {
        const double c = lo + k * s.pitch;
        if (c > centre.y + usable) break;
        const PointF corner{c, c};
        out.segments.push_back(rotated({corner.x - hw, corner.y}, {centre.x + reach, corner.y}, hw));
        out.segments.push_back(rotated({corner.x, corner.y - hw}, {corner.x, centre.y + reach}, hw));
        ++placed;
      }
      if (placed == 0) throw SpecError("pitch", "pattern does not fit in image");
      out.components = placed;
      break;
    }
    case Pattern::Serpentine: {
      // single meander of horizontal runs joined at alternating ends
      const double x0 = centre.x - usable;
      const double x1 = centre.x + usable;
      std::vector<double> rows;
      for (double y = centre.y - usable; y <= centre.y + usable + 1e-9; y += s.pitch) rows.push_back(y);
      if (rows.size() < 2 || x1 - x0 < 2 * s.line_width) throw SpecError("pitch", "pattern does not fit in image");
      for (std::size_t r = 0; r < rows.size(); ++r) {
        out.segments.push_back(rotated({x0 - hw, rows[r]}, {x1 + hw, rows[r]}, hw));
        if (r + 1 < rows.size()) {
          const double xc = r % 2 == 0 ? x1 : x0;
          out.segments.push_back(rotated({xc, rows[r] - hw}, {xc, rows[r + 1] + hw}, hw));
        }
      }
      out.components = 1;
      break;
    }
  }
  return out;
}

inline double segment_sdf(const Segment& seg, const EdgeTrack* left, const EdgeTrack* right, double bias_half,
                          PointF p) {
  const PointF d = seg.direction();
  const PointF n = seg.left();
  const double u = img::dot(p - seg.a, d);
  const double v = img::dot(p - seg.a, n);
  const double vl = seg.half_width + bias_half + (left ? left->at(u) : 0.0);
  const double vr = -(seg.half_width + bias_half + (right ? right->at(u) : 0.0));
  const double dv = std::max(v - vl, vr - v);
  const double du = std::max(-u, u - seg.length());
  if (du > 0.0 || dv > 0.0) return std::hypot(std::max(du, 0.0), std::max(dv, 0.0));
  return std::max(du, dv);
}

inline void gaussian_blur(GrayImage& img, double sigma) {
  if (sigma <= 0.0) return;
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= sum;
  const int w = img.width();
  const int h = img.height();
  GrayImage tmp(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * img(std::clamp(x + i, 0, w - 1), y);
      tmp(x, y) = static_cast<float>(acc);
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp(x, std::clamp(y + i, 0, h - 1));
      img(x, y) = static_cast<float>(acc);
    }
}

}  // namespace detail

struct SynthSample {
  SynthSpec spec;
  BinaryMask layout;  // ideal pattern
  BinaryMask gt_mask;  // rough, biased pattern
  GrayImage sem;      // rendered SEM-like image, on the 8-bit lattice
  std::vector<EdgeTrack> edges;
  std::vector<Segment> segments;
  int components = 0;
};

// Bright band of unit height and full width `width` at half maximum,
// centred on the edge (signed distance d = 0).
inline double bloom_profile(double d, double width) {
  const double q = d / (0.5 * width);
  return std::exp(-std::numbers::ln2 * q * q);
}

// Inward offset of the bloom centre that puts the maximum of the blurred
// straight-edge profile, groove/space step plus bloom, on the edge itself.
// Solves d/dd [step * G + gain * bloom * G](0) = 0 for the offset.
inline double bloom_inset(const SynthSpec& spec) {
  const double sigma = spec.blur_sigma + spec.defocus_extra_blur;
  const double step = spec.space_level - spec.groove_level;
  if (sigma <= 0.0 || step <= 0.0 || spec.bloom_gain <= 0.0) return 0.0;
  const double sb = spec.bloom_width / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  const double st = std::hypot(sb, sigma);
  const double amp = spec.bloom_gain * sb / st;
  const double slope = step / (std::sqrt(2.0 * std::numbers::pi) * sigma);
  auto pull = [&](double off) { return amp * off / (st * st) * std::exp(-0.5 * off * off / (st * st)); };
  if (pull(st) <= slope) return st;
  double lo = 0.0, hi = st;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (pull(mid) < slope ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

inline SynthSample gen_sample(const SynthSpec& spec) {
  spec.validate();
  const auto pattern = detail::build_pattern(spec);
  SynthSample out;
  out.spec = spec;
  out.segments = pattern.segments;
  out.components = pattern.components;

  // two rough edges per segment, each with its own stream
  for (std::size_t i = 0; i < pattern.segments.size(); ++i) {
    const auto& seg = pattern.segments[i];
    const int n = static_cast<int>(std::ceil(seg.length())) + 1;
    for (int side : {+1, -1}) {
      EdgeTrack e;
      e.segment = static_cast<int>(i);
      e.side = side;
      e.direction = seg.direction();
      e.outward = side * seg.left();
      e.origin = seg.a + seg.half_width * e.outward;
      const std::uint64_t stream = 1000 + 2 * i + (side > 0 ? 0 : 1);
      e.displacement = gen_rough_edge(n, spec.roughness_sigma, spec.roughness_corr_len,
                                      Rng::stream(spec.seed, stream).next());
      out.edges.push_back(std::move(e));
    }
  }

  const int size = spec.image_size;
  out.layout = BinaryMask(size, size);
  out.gt_mask = BinaryMask(size, size);
  GrayImage sdf(size, size);
  std::vector<int> nearest(static_cast<std::size_t>(size) * size, 0);
  const double bias_half = spec.process_bias / 2.0;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const PointF p{static_cast<double>(x), static_cast<double>(y)};
      double ideal = 1e30;
      double rough = 1e30;
      double best_abs = 1e30;
      int best = 0;
      for (std::size_t i = 0; i < pattern.segments.size(); ++i) {
        const auto& seg = pattern.segments[i];
        ideal = std::min(ideal, detail::segment_sdf(seg, nullptr, nullptr, 0.0, p));
        const double r = detail::segment_sdf(seg, &out.edges[2 * i], &out.edges[2 * i + 1], bias_half, p);
        rough = std::min(rough, r);
        if (std::abs(r) < best_abs) {
          best_abs = std::abs(r);
          best = static_cast<int>(i);
        }
      }
      out.layout(x, y) = ideal < 0.0;
      out.gt_mask(x, y) = rough < 0.0;
      sdf(x, y) = static_cast<float>(rough);
      nearest[static_cast<std::size_t>(y) * size + x] = best;
    }

  GrayImage sem(size, size);
  const double inset = bloom_inset(spec);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double d = sdf(x, y);
      const double base = d < 0.0 ? spec.groove_level : spec.space_level;
      sem(x, y) = static_cast<float>(base + spec.bloom_gain * bloom_profile(d + inset, spec.bloom_width));
    }
  detail::gaussian_blur(sem, spec.blur_sigma + spec.defocus_extra_blur);

  // contrast loss for edges running along the scan axis
  const double mid = 0.5 * (spec.groove_level + spec.space_level);
  std::vector<double> seg_contrast(pattern.segments.size(), 1.0);
  for (std::size_t i = 0; i < pattern.segments.size(); ++i) {
    const PointF d = pattern.segments[i].direction();
    double ang = std::abs(std::atan2(d.y, d.x)) * 180.0 / std::numbers::pi;
    ang = std::min(ang, 180.0 - ang);
    if (ang <= spec.scan_cone_deg) seg_contrast[i] = spec.vertical_contrast;
  }
  Rng noise = Rng::stream(spec.seed, 1);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double c = seg_contrast[nearest[static_cast<std::size_t>(y) * size + x]];
      double v = mid + (sem(x, y) - mid) * c;
      if (spec.noise_sigma > 0.0) v += spec.noise_sigma * noise.normal();
      sem(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  out.sem = img::quantize8(sem);
  return out;
}

}  // namespace lithoseg::synth
