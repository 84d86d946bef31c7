#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "lithoseg/coarse/bbox.hpp"
#include "lithoseg/imgcore/components.hpp"
#include "lithoseg/imgcore/filter.hpp"
#include "lithoseg/imgcore/morphology.hpp"
#include "lithoseg/imgcore/threshold.hpp"
#include "lithoseg/nnet/mlp.hpp"
#include "lithoseg/nnet/serialize.hpp"
#include "lithoseg/nnet/train.hpp"

namespace lithoseg::coarse {

struct TrainPair {
  const GrayImage* image;
  const BinaryMask* mask;
};

// Promptable, prompt-free and retrainable segmentation model.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual std::string name() const = 0;
  virtual BinaryMask generate_prompted(const GrayImage& image, const std::vector<BBox>& boxes) const = 0;
  virtual BinaryMask predict(const GrayImage& image) const = 0;
  // Trains on the pairs, starting from the stored initial state when
  // from_initial is set and from the current state otherwise.
  virtual void retrain(const std::vector<TrainPair>& data, int epochs, bool from_initial) = 0;
  // Persisted trainable state; stateless segmenters write nothing.
  virtual bool has_state() const { return false; }
  virtual void save_state(const std::filesystem::path&) const {}
  virtual void load_state(const std::filesystem::path&) {}
};

struct ClassicalOptions {
  int open_radius = 1;
  // Boxes whose two Otsu classes differ by less than this in mean intensity
  // are treated as featureless.
  double min_class_contrast = 0.08;
};

namespace detail {

inline bool touches(const Rect& r, const img::Components& cc, int label) {
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x)
      if (cc.labels(x, y) == label) return true;
  return false;
}

}  // namespace detail

// Dark Otsu class inside one box, opened, reduced to the largest component
// meeting the middle third of the box. Empty when the box is featureless.
inline BinaryMask segment_box(const GrayImage& image, const BBox& box, const ClassicalOptions& opt = {}) {
  BinaryMask out(image.width(), image.height());
  if (box.empty()) return out;
  double t = 0.0;
  try {
    t = img::otsu_threshold(image, box);
  } catch (const DomainError&) {
    return out;
  }
  double sum_dark = 0.0, sum_bright = 0.0;
  long n_dark = 0, n_bright = 0;
  BinaryMask local(box.width(), box.height());
  for (int y = box.y0; y < box.y1; ++y)
    for (int x = box.x0; x < box.x1; ++x) {
      const double v = image(x, y);
      if (v > t) {
        sum_bright += v;
        ++n_bright;
      } else {
        sum_dark += v;
        ++n_dark;
        local(x - box.x0, y - box.y0) = 1;
      }
    }
  if (n_dark == 0 || n_bright == 0 || sum_bright / n_bright - sum_dark / n_dark < opt.min_class_contrast) return out;
  if (opt.open_radius > 0) local = img::open(local, opt.open_radius);
  const auto cc = img::connected_components(local, img::Connectivity::Eight);
  const auto sizes = img::component_sizes(cc);
  const Rect middle{box.width() / 3, box.height() / 3, box.width() - box.width() / 3, box.height() - box.height() / 3};
  int best = 0;
  for (int l = 1; l <= cc.count; ++l)
    if ((best == 0 || sizes[l] > sizes[best]) && detail::touches(middle, cc, l)) best = l;
  if (best == 0) return out;
  for (int y = 0; y < box.height(); ++y)
    for (int x = 0; x < box.width(); ++x)
      if (cc.labels(x, y) == best) out(x + box.x0, y + box.y0) = 1;
  return out;
}

inline BinaryMask prompt_segment_classical(const GrayImage& image, const std::vector<BBox>& boxes,
                                           const ClassicalOptions& opt = {}) {
  BinaryMask out(image.width(), image.height());
  for (const auto& b : boxes) {
    const auto m = segment_box(image, b, opt);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] |= m.data()[i];
  }
  return out;
}

// Prompt-free variant: the whole image is a single box.
class ClassicalSegmenter : public Segmenter {
 public:
  explicit ClassicalSegmenter(ClassicalOptions opt = {}) : opt_(opt) {}
  std::string name() const override { return "classical"; }
  BinaryMask generate_prompted(const GrayImage& image, const std::vector<BBox>& boxes) const override {
    return prompt_segment_classical(image, boxes, opt_);
  }
  BinaryMask predict(const GrayImage& image) const override {
    return prompt_segment_classical(image, {BBox{0, 0, image.width(), image.height()}}, opt_);
  }
  void retrain(const std::vector<TrainPair>&, int, bool) override {}

 private:
  ClassicalOptions opt_;
};

struct PatchMlpOptions {
  int radius = 5;
  std::vector<int> hidden = {64, 32};
  std::uint64_t init_seed = 7;
  int pixels_per_image = 2048;
  std::uint64_t sample_seed = 11;
  nn::TrainConfig train = [] {
    nn::TrainConfig c;
    c.loss = nn::LossKind::DiceCe;
    c.lambda_mix = 0.5;
    c.learning_rate = 2e-3;
    c.batch_size = 128;
    c.optimizer.kind = nn::OptimizerKind::AdamW;
    c.optimizer.weight_decay = 1e-4;
    return c;
  }();
  int open_radius = 1;
  // Box filter radius applied to the logit map before thresholding.
  int smooth_radius = 0;

  int patch_side() const { return 2 * radius + 1; }
  int input_dim() const { return patch_side() * patch_side() + 2; }
  std::vector<int> layers() const {
    std::vector<int> d{input_dim()};
    d.insert(d.end(), hidden.begin(), hidden.end());
    d.push_back(1);
    return d;
  }
};

// Per-image standardized intensity patches plus coordinates in [-1, 1].
class PatchFeatures {
 public:
  PatchFeatures(const GrayImage& image, int radius) : image_(image), radius_(radius) {
    double mean = 0.0;
    for (float v : image.data()) mean += v;
    mean /= static_cast<double>(image.size());
    double var = 0.0;
    for (float v : image.data()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(image.size());
    mean_ = mean;
    inv_std_ = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
  }

  int dim() const { return (2 * radius_ + 1) * (2 * radius_ + 1) + 2; }

  void fill(int x, int y, float* out) const {
    const int w = image_.width(), h = image_.height();
    int k = 0;
    for (int dy = -radius_; dy <= radius_; ++dy) {
      const int yy = std::clamp(y + dy, 0, h - 1);
      for (int dx = -radius_; dx <= radius_; ++dx) {
        const int xx = std::clamp(x + dx, 0, w - 1);
        out[k++] = static_cast<float>((image_(xx, yy) - mean_) * inv_std_);
      }
    }
    out[k++] = w > 1 ? static_cast<float>(2.0 * x / (w - 1) - 1.0) : 0.0f;
    out[k] = h > 1 ? static_cast<float>(2.0 * y / (h - 1) - 1.0) : 0.0f;
  }

 private:
  const GrayImage& image_;
  int radius_;
  double mean_ = 0.0;
  double inv_std_ = 1.0;
};

// Per-pixel sigmoid MLP over intensity patches.
class PatchMlpSegmenter : public Segmenter {
 public:
  explicit PatchMlpSegmenter(PatchMlpOptions opt = {})
      : opt_(std::move(opt)), initial_(nn::init_mlp(opt_.layers(), nn::Activation::Relu, opt_.init_seed)),
        params_(initial_) {}

  std::string name() const override { return "patch_mlp"; }

  BinaryMask generate_prompted(const GrayImage& image, const std::vector<BBox>& boxes) const override {
    BinaryMask m = predict(image);
    BinaryMask out(image.width(), image.height());
    for (const auto& b : boxes)
      for (int y = b.y0; y < b.y1; ++y)
        for (int x = b.x0; x < b.x1; ++x) out(x, y) = m(x, y);
    return out;
  }

  BinaryMask predict(const GrayImage& image) const override {
    const PatchFeatures pf(image, opt_.radius);
    const int w = image.width(), h = image.height();
    GrayImage logit(w, h);
    nn::Matrix<float> x(pf.dim(), w);
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) pf.fill(xx, y, x.col(xx).data());
      const auto logits = nn::forward_batch(params_, x).output();
      for (int xx = 0; xx < w; ++xx) logit(xx, y) = logits(0, xx);
    }
    if (opt_.smooth_radius > 0) logit = img::box_filter(logit, opt_.smooth_radius);
    BinaryMask out(w, h);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = logit.data()[i] > 0.0f;
    return opt_.open_radius > 0 ? img::open(out, opt_.open_radius) : out;
  }

  // Builds the pixel dataset: a seeded draw of pixels_per_image pixels per
  // pair, or every pixel when the image is smaller.
  nn::Dataset make_dataset(const std::vector<TrainPair>& data) const {
    std::vector<std::pair<std::size_t, int>> picks;
    Rng rng(opt_.sample_seed);
    for (std::size_t p = 0; p < data.size(); ++p) {
      require_same_shape(*data[p].image, *data[p].mask, "patch_mlp dataset");
      const int n = static_cast<int>(data[p].image->size());
      if (n <= opt_.pixels_per_image) {
        for (int i = 0; i < n; ++i) picks.emplace_back(p, i);
      } else {
        for (int i = 0; i < opt_.pixels_per_image; ++i)
          picks.emplace_back(p, static_cast<int>(rng.below(static_cast<std::uint64_t>(n))));
      }
    }
    nn::Dataset ds;
    ds.x.resize(opt_.input_dim(), static_cast<Eigen::Index>(picks.size()));
    ds.y.resize(1, static_cast<Eigen::Index>(picks.size()));
    std::size_t current = static_cast<std::size_t>(-1);
    std::unique_ptr<PatchFeatures> pf;
    for (std::size_t j = 0; j < picks.size(); ++j) {
      const auto [p, i] = picks[j];
      if (p != current) {
        pf = std::make_unique<PatchFeatures>(*data[p].image, opt_.radius);
        current = p;
      }
      const int w = data[p].image->width();
      pf->fill(i % w, i / w, ds.x.col(static_cast<Eigen::Index>(j)).data());
      ds.y(0, static_cast<Eigen::Index>(j)) = data[p].mask->data()[static_cast<std::size_t>(i)] ? 1.0f : 0.0f;
    }
    return ds;
  }

  void retrain(const std::vector<TrainPair>& data, int epochs, bool from_initial) override {
    if (data.empty()) throw DomainError("patch_mlp retrain: empty curated set");
    nn::TrainConfig tc = opt_.train;
    tc.epochs = epochs;
    last_ = nn::train(from_initial ? initial_ : params_, make_dataset(data), tc);
    params_ = last_.params;
  }

  bool has_state() const override { return true; }
  void save_state(const std::filesystem::path& path) const override { nn::save_params(path, params_); }
  void load_state(const std::filesystem::path& path) override { set_params(nn::load_params(path)); }

  const nn::MlpParams& params() const { return params_; }
  const nn::MlpParams& initial_params() const { return initial_; }
  void set_params(nn::MlpParams p) {
    if (p.dims != opt_.layers()) throw ShapeError("patch_mlp: parameter dims do not match the configured layers");
    params_ = std::move(p);
  }
  const nn::TrainResult& last_training() const { return last_; }
  const PatchMlpOptions& options() const { return opt_; }

 private:
  PatchMlpOptions opt_;
  nn::MlpParams initial_;
  nn::MlpParams params_;
  nn::TrainResult last_;
};

// Box prompts go to the classical segmenter; prompt-free prediction and
// retraining use the patch MLP.
class BootstrapSegmenter : public Segmenter {
 public:
  BootstrapSegmenter(ClassicalOptions c = {}, PatchMlpOptions p = {}) : classical_(c), learned_(std::move(p)) {}
  std::string name() const override { return "classical+patch_mlp"; }
  BinaryMask generate_prompted(const GrayImage& image, const std::vector<BBox>& boxes) const override {
    return classical_.generate_prompted(image, boxes);
  }
  BinaryMask predict(const GrayImage& image) const override { return learned_.predict(image); }
  void retrain(const std::vector<TrainPair>& data, int epochs, bool from_initial) override {
    learned_.retrain(data, epochs, from_initial);
  }
  bool has_state() const override { return true; }
  void save_state(const std::filesystem::path& path) const override { learned_.save_state(path); }
  void load_state(const std::filesystem::path& path) override { learned_.load_state(path); }
  PatchMlpSegmenter& learned() { return learned_; }
  const PatchMlpSegmenter& learned() const { return learned_; }

 private:
  ClassicalSegmenter classical_;
  PatchMlpSegmenter learned_;
};

}  // namespace lithoseg::coarse
