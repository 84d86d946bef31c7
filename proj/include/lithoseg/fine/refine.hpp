#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <bit>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lithoseg/fine/profile.hpp"
#include "lithoseg/fine/raster.hpp"
#include "lithoseg/fine/scan.hpp"
#include "lithoseg/imgcore/components.hpp"
#include "lithoseg/imgcore/contour.hpp"
#include "lithoseg/nnet/mlp.hpp"
#include "lithoseg/nnet/train.hpp"

namespace lithoseg::fine {

using img::Contour;

struct RefineConfig {
  int s_scan = 31;
  double t_max = 31 / 4.0;
  int center_window = 31 / 3;
  bool drop_out_of_bounds = true;
  double arc_spacing = 1.0;
  int normal_window = 3;
  bool align = true;
  // Gaussian sigma (samples) of the profile smoothing used only to locate
  // the brightest sample.
  double align_smooth_sigma = 1.0;
  bool orientation_feature = true;
  // Fixed rotation applied to every normal before refinement.
  double normal_perturbation_deg = 0.0;
  double label_step = 0.25;
  // Odd window of the running median applied to total point offsets along
  // each closed contour; 1 disables it.
  int offset_median_window = 5;
  // A refined fill that splits into pieces keeps its largest piece when the
  // rest is at most this fraction of the fill; otherwise the component
  // falls back to its coarse pixels.
  double max_fragment_fraction = 0.02;

  // Derives the odd scan size and the default clamp and window from it.
  static RefineConfig from_scan_size(int requested) {
    RefineConfig c;
    c.s_scan = make_odd(requested);
    c.t_max = c.s_scan / 4.0;
    c.center_window = c.s_scan / 3;
    return c;
  }

  int input_dim() const { return s_scan + (orientation_feature ? 2 : 0); }

  void validate() const {
    if (s_scan < 3 || s_scan % 2 == 0) throw DomainError("refine config: s_scan must be odd and >= 3");
    if (!(t_max > 0.0 && t_max < s_scan / 2.0)) throw DomainError("refine config: t_max must be in (0, s_scan/2)");
    if (center_window < 0 || center_window >= s_scan) throw DomainError("refine config: center_window out of range");
    if (!(arc_spacing > 0.0)) throw DomainError("refine config: arc_spacing must be > 0");
    if (!(align_smooth_sigma >= 0.0)) throw DomainError("refine config: align_smooth_sigma must be >= 0");
    if (offset_median_window < 1 || offset_median_window % 2 == 0)
      throw DomainError("refine config: offset_median_window must be odd and >= 1");
    if (!(max_fragment_fraction >= 0.0 && max_fragment_fraction < 1.0))
      throw DomainError("refine config: max_fragment_fraction must be in [0, 1)");
    if (normal_window < 1) throw DomainError("refine config: normal_window must be >= 1");
  }
};

inline std::vector<int> default_fine_layers(const RefineConfig& cfg) { return {cfg.input_dim(), 256, 192, 1}; }

// Profile at a contour point, aligned when enabled.
inline Profile extract_profile(const GrayImage& image, PointF point, PointF normal, int index, const RefineConfig& cfg) {
  Profile p = sample_profile(image, point, normal, cfg.s_scan, cfg.drop_out_of_bounds, index);
  if (cfg.align) p = align_brightest(image, std::move(p), cfg.center_window, cfg.drop_out_of_bounds, cfg.align_smooth_sigma);
  return p;
}

// Normalized profile plus optional sin/cos of the normal angle. Returns false
// for constant profiles.
inline bool profile_features(const Profile& p, const RefineConfig& cfg, float* out) {
  const auto z = z_normalize(p.values);
  if (!z) return false;
  for (std::size_t i = 0; i < z->size(); ++i) out[i] = static_cast<float>((*z)[i]);
  if (cfg.orientation_feature) {
    const double a = std::atan2(p.normal.y, p.normal.x);
    out[z->size()] = static_cast<float>(std::sin(a));
    out[z->size() + 1] = static_cast<float>(std::cos(a));
  }
  return true;
}

// Signed offset along the normal from base to the nearest 0.5 crossing of the
// bilinear gt indicator within +-t_max; positive is outward.
inline std::optional<double> edge_label(const BinaryMask& gt, PointF base, PointF normal, double t_max, double step) {
  const int k = static_cast<int>(std::floor(t_max / step));
  std::optional<double> best;
  double prev_t = 0.0, prev_v = 0.0;
  bool have_prev = false;
  for (int i = -k; i <= k; ++i) {
    const double t = i * step;
    const PointF q = base + t * normal;
    if (!img::in_sample_domain(gt, q)) {
      have_prev = false;
      continue;
    }
    const double v = img::bilinear_sample(gt, q) - 0.5;
    if (have_prev && ((prev_v < 0) != (v < 0))) {
      const double tc = prev_t + (t - prev_t) * prev_v / (prev_v - v);
      if (!best || std::abs(tc) < std::abs(*best)) best = tc;
    }
    prev_t = t;
    prev_v = v;
    have_prev = true;
  }
  return best;
}

inline std::vector<Contour> contours_for(const BinaryMask& mask, const RefineConfig& cfg) {
  img::TraceOptions opt;
  opt.spacing = cfg.arc_spacing;
  opt.normal_window = cfg.normal_window;
  return img::trace_contours(mask, opt);
}

struct TrainingTriple {
  const BinaryMask* coarse;
  const GrayImage* sem;
  const BinaryMask* gt;
};

struct ProfileSet {
  std::vector<Profile> profiles;
  nn::Dataset data;
  int candidates = 0;  // contour points visited
};

// Labeled, aligned profiles for every coarse-contour point. When more than
// max_profiles survive, a seeded subset is kept.
inline ProfileSet build_training_set(const std::vector<TrainingTriple>& triples, const RefineConfig& cfg,
                                     std::size_t max_profiles = 40000, std::uint64_t seed = 0) {
  cfg.validate();
  ProfileSet set;
  std::vector<std::vector<float>> feats;
  std::vector<float> f(static_cast<std::size_t>(cfg.input_dim()));
  for (const auto& t : triples) {
    require_same_shape(*t.coarse, *t.sem, "build_training_set");
    require_same_shape(*t.coarse, *t.gt, "build_training_set");
    for (const auto& c : contours_for(*t.coarse, cfg)) {
      for (std::size_t i = 0; i < c.size(); ++i) {
        ++set.candidates;
        Profile p = extract_profile(*t.sem, c.points[i], c.normals[i], static_cast<int>(i), cfg);
        if (p.dropped) continue;
        p.label = edge_label(*t.gt, p.base_point, p.normal, cfg.t_max, cfg.label_step);
        if (!p.label) continue;
        if (!profile_features(p, cfg, f.data())) continue;
        set.profiles.push_back(std::move(p));
        feats.push_back(f);
      }
    }
  }
  if (set.profiles.empty()) throw DomainError("build_training_set: no labeled profiles (all dropped or unlabeled)");
  std::vector<std::size_t> keep(set.profiles.size());
  std::iota(keep.begin(), keep.end(), std::size_t{0});
  if (keep.size() > max_profiles) {
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(keep));
    keep.resize(max_profiles);
    std::sort(keep.begin(), keep.end());
  }
  const auto n = static_cast<Eigen::Index>(keep.size());
  set.data.x.resize(cfg.input_dim(), n);
  set.data.y.resize(1, n);
  std::vector<Profile> kept;
  kept.reserve(keep.size());
  for (Eigen::Index j = 0; j < n; ++j) {
    const std::size_t k = keep[static_cast<std::size_t>(j)];
    for (int r = 0; r < cfg.input_dim(); ++r) set.data.x(r, j) = feats[k][r];
    set.data.y(0, j) = static_cast<float>(*set.profiles[k].label);
    kept.push_back(std::move(set.profiles[k]));
  }
  set.profiles = std::move(kept);
  return set;
}

struct RefinedPoint {
  PointF original;
  PointF normal;        // normal actually used (after any perturbation)
  double center_shift;
  double displacement;  // applied, after clamping
  bool dropped;
};

struct RefinedContour {
  Contour contour;
  std::vector<RefinedPoint> points;
};

// Moves every point by its alignment shift plus the clamped predicted
// displacement along its (possibly perturbed) normal.
inline RefinedContour refine_contour(const Contour& c, const GrayImage& image, const nn::MlpParams& params,
                                     const RefineConfig& cfg) {
  if (params.input_dim() != cfg.input_dim() || params.output_dim() != 1)
    throw ShapeError("refine_contour: network expects " + std::to_string(params.input_dim()) + " inputs, config gives " +
                     std::to_string(cfg.input_dim()));
  const double rad = cfg.normal_perturbation_deg * std::numbers::pi / 180.0;
  const std::size_t n = c.size();
  RefinedContour out;
  out.contour = c;
  out.points.resize(n);
  std::vector<Profile> profiles(n);
  std::vector<Eigen::Index> column(n, -1);
  nn::Matrix<float> x(cfg.input_dim(), static_cast<Eigen::Index>(n));
  Eigen::Index cols = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const PointF normal = rad == 0.0 ? c.normals[i] : img::rotate(c.normals[i], rad);
    profiles[i] = extract_profile(image, c.points[i], normal, static_cast<int>(i), cfg);
    if (!profiles[i].dropped && profile_features(profiles[i], cfg, x.col(cols).data())) column[i] = cols++;
  }
  nn::Matrix<float> pred;
  if (cols > 0) pred = nn::forward_batch(params, nn::Matrix<float>(x.leftCols(cols))).output();
  std::vector<double> total(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Profile& p = profiles[i];
    RefinedPoint rp{c.points[i], p.normal, 0.0, 0.0, true};
    if (!p.dropped) {
      rp.center_shift = p.center_shift;
      if (column[i] >= 0) {
        rp.displacement = std::clamp(static_cast<double>(pred(0, column[i])), -cfg.t_max, cfg.t_max);
        rp.dropped = false;
      }
    }
    total[i] = rp.center_shift + rp.displacement;
    out.points[i] = rp;
  }
  const int half = cfg.offset_median_window / 2;
  std::vector<double> window;
  for (std::size_t i = 0; i < n; ++i) {
    RefinedPoint& rp = out.points[i];
    if (rp.dropped) {
      // Nothing usable was sampled; the point stays where it was.
      out.contour.points[i] = c.points[i];
      continue;
    }
    double offset = total[i];
    if (half > 0) {
      window.clear();
      for (int d = -half; d <= half; ++d) {
        const std::size_t j = (i + n + static_cast<std::size_t>(d + static_cast<int>(n))) % n;
        if (!out.points[j].dropped) window.push_back(total[j]);
      }
      std::nth_element(window.begin(), window.begin() + static_cast<long>(window.size() / 2), window.end());
      offset = std::clamp(window[window.size() / 2], rp.center_shift - cfg.t_max, rp.center_shift + cfg.t_max);
      rp.displacement = offset - rp.center_shift;
    }
    out.contour.points[i] = c.points[i] + offset * rp.normal;
  }
  return out;
}

struct RefineReport {
  int contours = 0;
  int points = 0;
  int dropped_points = 0;
  int fallback_components = 0;
  int self_intersecting = 0;
};

// trace -> refine each contour -> rasterize each contour on its own. A
// component whose refined fill is not a single 8-connected region, or that
// touches another component's fill, keeps its coarse pixels.
inline BinaryMask refine_mask(const BinaryMask& coarse, const GrayImage& image, const nn::MlpParams& params,
                              const RefineConfig& cfg, RefineReport* report = nullptr) {
  cfg.validate();
  require_same_shape(coarse, image, "refine_mask");
  const int w = coarse.width(), h = coarse.height();
  const auto cc = img::connected_components(coarse, img::Connectivity::Eight);
  const auto contours = contours_for(coarse, cfg);
  RefineReport rep;
  rep.contours = static_cast<int>(contours.size());

  const int k = cc.count;
  std::vector<std::vector<int>> refined_pixels(k + 1), coarse_pixels(k + 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (int l = cc.labels(x, y)) coarse_pixels[l].push_back(y * w + x);
  std::vector<bool> use_refined(k + 1, false);

  for (const auto& c : contours) {
    const int label = c.component;
    if (static_cast<int>(c.size()) < 2 * cfg.normal_window + 1) continue;
    const auto rc = refine_contour(c, image, params, cfg);
    rep.points += static_cast<int>(c.size());
    for (const auto& p : rc.points) rep.dropped_points += p.dropped;
    if (self_intersects(rc.contour.points)) ++rep.self_intersecting;
    BinaryMask one(w, h);
    fill_polygon(one, rc.contour.points);
    const auto pieces = img::connected_components(one, img::Connectivity::Eight);
    if (pieces.count == 0) continue;
    if (pieces.count > 1) {
      const auto sizes = img::component_sizes(pieces);
      long total = 0;
      int largest = 1;
      for (int l = 1; l <= pieces.count; ++l) {
        total += sizes[l];
        if (sizes[l] > sizes[largest]) largest = l;
      }
      if (static_cast<double>(total - sizes[largest]) > cfg.max_fragment_fraction * static_cast<double>(total)) continue;
      one = img::component_mask(pieces, largest);
    }
    for (std::size_t i = 0; i < one.size(); ++i)
      if (one.data()[i]) refined_pixels[label].push_back(static_cast<int>(i));
    use_refined[label] = true;
  }

  // Revert components whose fill meets another component until stable.
  img::LabelMap owner(w, h);
  auto pixels_of = [&](int l) -> const std::vector<int>& { return use_refined[l] ? refined_pixels[l] : coarse_pixels[l]; };
  for (bool changed = true; changed;) {
    changed = false;
    std::fill(owner.data().begin(), owner.data().end(), 0);
    for (int l = 1; l <= k; ++l)
      for (int i : pixels_of(l)) owner.data()[i] = owner.data()[i] == 0 ? l : -1;
    for (int l = 1; l <= k && !changed; ++l) {
      if (!use_refined[l]) continue;
      bool clash = false;
      for (int i : refined_pixels[l]) {
        const int x = i % w, y = i / w;
        for (int dy = -1; dy <= 1 && !clash; ++dy)
          for (int dx = -1; dx <= 1 && !clash; ++dx) {
            const int o = owner.get_or(x + dx, y + dy, 0);
            clash = o != 0 && o != l;
          }
        if (clash) break;
      }
      if (clash) {
        use_refined[l] = false;
        changed = true;
      }
    }
  }

  BinaryMask out(w, h);
  for (int l = 1; l <= k; ++l) {
    if (!use_refined[l]) ++rep.fallback_components;
    for (int i : pixels_of(l)) out.data()[i] = 1;
  }
  if (report) *report = rep;
  return out;
}

// Fine-stage regressor with the default layer sizes.
inline nn::TrainResult train_fine(const ProfileSet& set, const RefineConfig& cfg, const nn::TrainConfig& tc,
                                  std::uint64_t init_seed) {
  auto init = nn::init_mlp(default_fine_layers(cfg), nn::Activation::Relu, init_seed);
  return nn::train(init, set.data, tc);
}

inline constexpr char kProfileMagic[5] = {'L', 'S', 'P', 'F', '1'};

// Binary dump: magic, u32 count, u32 s_scan, then per profile: i32 point
// index, f32 base x/y, normal x/y, center shift, label, then s_scan values.
inline void save_profiles(const std::filesystem::path& path, const ProfileSet& set) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) f.put(static_cast<char>(v >> (8 * i)));
  };
  auto f32 = [&](double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); };
  f.write(kProfileMagic, sizeof(kProfileMagic));
  u32(static_cast<std::uint32_t>(set.profiles.size()));
  u32(set.profiles.empty() ? 0u : static_cast<std::uint32_t>(set.profiles.front().values.size()));
  for (const auto& p : set.profiles) {
    u32(static_cast<std::uint32_t>(p.point_index));
    f32(p.base_point.x);
    f32(p.base_point.y);
    f32(p.normal.x);
    f32(p.normal.y);
    f32(p.center_shift);
    f32(p.label.value_or(std::nan("")));
    for (double v : p.values) f32(v);
  }
  if (!f) throw IoError("short write to " + path.string());
}

}  // namespace lithoseg::fine
