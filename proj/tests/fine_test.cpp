#include <gtest/gtest.h>

#include <cmath>

#include "lithoseg/coarse/bbox.hpp"
#include "lithoseg/coarse/segmenter.hpp"
#include "lithoseg/fine/refine.hpp"
#include "lithoseg/fine/scan.hpp"
#include "lithoseg/imgcore/morphology.hpp"
#include "lithoseg/metrics/seg.hpp"
#include "lithoseg/synthgen/corpus.hpp"
#include "support.hpp"

using namespace lithoseg;
using namespace lithoseg::fine;
using img::BinaryMask;
using testing_support::disk_mask;
using testing_support::rect_mask;

namespace {

nn::MlpParams constant_net(const RefineConfig& cfg, float bias) {
  auto p = nn::init_mlp(default_fine_layers(cfg), nn::Activation::Relu, 1);
  p.set_zero();
  p.biases.back()(0) = bias;
  return p;
}

GrayImage bright_column(int w, int h, int column) {
  GrayImage img(w, h, 0.2f);
  for (int y = 0; y < h; ++y) img(column, y) = 0.9f;
  return img;
}

}  // namespace

TEST(ScanSize, UnitCase) {
  ScanGeometry g;
  g.delta_offset = 0.0;
  // R_px = 1 nm/px and k1 * lambda / na = 1 nm.
  g.k1 = 1.0;
  g.lambda = 1.35;
  g.na = 1.35;
  EXPECT_EQ(compute_scan_size(g), 1);
}

TEST(ScanSize, ImmersionArithmetic) {
  ScanGeometry g;
  EXPECT_DOUBLE_EQ(g.pixel_size(), 1.0);
  EXPECT_NEAR(g.resolution_limit(), 87.207, 1e-3);
  EXPECT_EQ(compute_scan_size(g), 113);
}

TEST(ScanSize, ConfiguredThirtyBecomesOdd) {
  EXPECT_EQ(make_odd(30), 31);
  EXPECT_EQ(RefineConfig::from_scan_size(30).s_scan, 31);
  EXPECT_EQ(RefineConfig{}.s_scan, 31);
}

TEST(ScanSize, InvalidGeometryRejected) {
  ScanGeometry g;
  g.na = 0.0;
  EXPECT_THROW(compute_scan_size(g), DomainError);
}

TEST(Profile, ConstantImageConstantProfile) {
  const GrayImage img(40, 40, 0.37f);
  const auto p = sample_profile(img, {20, 20}, {0.6, 0.8}, 31);
  EXPECT_FALSE(p.dropped);
  for (double v : p.values) EXPECT_NEAR(v, 0.37, 1e-6);
}

TEST(Profile, StepEdgeReproduced) {
  GrayImage img(40, 10, 0.0f);
  for (int y = 0; y < 10; ++y)
    for (int x = 20; x < 40; ++x) img(x, y) = 1.0f;
  const auto p = sample_profile(img, {19.5, 5}, {1, 0}, 11);
  for (int j = 0; j < 11; ++j) {
    const double x = 19.5 + (j - 5);
    const double expect = x <= 19 ? 0.0 : (x >= 20 ? 1.0 : x - 19);
    EXPECT_NEAR(p.values[j], expect, 1e-6);
  }
}

TEST(Profile, NearBorderDropped) {
  const GrayImage img(64, 64, 0.5f);
  EXPECT_TRUE(sample_profile(img, {1, 30}, {1, 0}, 31, true).dropped);
  EXPECT_FALSE(sample_profile(img, {1, 30}, {1, 0}, 31, false).dropped);
}

TEST(Align, CenteredPeakNoShift) {
  const auto img = bright_column(64, 8, 30);
  const auto p = align_brightest(img, sample_profile(img, {30, 4}, {1, 0}, 31), 10);
  EXPECT_EQ(p.center_shift, 0.0);
}

TEST(Align, PeakLeftOfCenter) {
  const auto img = bright_column(64, 8, 29);
  const auto p = align_brightest(img, sample_profile(img, {30, 4}, {1, 0}, 31), 10);
  EXPECT_EQ(p.center_shift, -1.0);
  EXPECT_EQ(windowed_argmax(p.values, 10), p.center());
}

TEST(Align, TieGoesToSmallerIndex) {
  std::vector<double> v(11, 0.0);
  v[3] = v[7] = 1.0;
  EXPECT_EQ(windowed_argmax(v, 5) - 5, -2);
}

TEST(Label, PerfectCoarseGivesZeroLabels) {
  const auto gt = disk_mask(64, 64, 32, 32, 14);
  RefineConfig cfg;
  for (const auto& c : contours_for(gt, cfg))
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto l = edge_label(gt, c.points[i], c.normals[i], cfg.t_max, cfg.label_step);
      ASSERT_TRUE(l);
      EXPECT_LE(std::abs(*l), 0.51);
    }
}

TEST(Label, ErodedCoarsePointsOutward) {
  const auto gt = rect_mask(80, 80, 20, 20, 60, 60);
  const auto coarse = img::erode(gt, 2);
  RefineConfig cfg;
  double sum = 0.0;
  int n = 0, near_two = 0;
  for (const auto& c : contours_for(coarse, cfg))
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto l = edge_label(gt, c.points[i], c.normals[i], cfg.t_max, cfg.label_step);
      ASSERT_TRUE(l);
      sum += *l;
      ++n;
      near_two += std::abs(*l - 2.0) <= 0.5;
      const auto flipped = edge_label(gt, c.points[i], -1.0 * c.normals[i], cfg.t_max, cfg.label_step);
      ASSERT_TRUE(flipped);
      EXPECT_NEAR(*flipped, -*l, 1e-9);
    }
  EXPECT_NEAR(sum / n, 2.0, 0.3);
  EXPECT_GT(near_two, n * 8 / 10);
}

TEST(RefineContour, ZeroNetGivesAlignedContour) {
  const auto s = synth::gen_sample(synth::SynthSpec{});
  RefineConfig cfg;
  cfg.offset_median_window = 1;
  const auto net = constant_net(cfg, 0.0f);
  const auto coarse = coarse::prompt_segment_classical(s.sem, coarse::bboxes_from_layout(s.layout));
  for (const auto& c : contours_for(coarse, cfg)) {
    const auto rc = refine_contour(c, s.sem, net, cfg);
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto& rp = rc.points[i];
      if (rp.dropped) continue;
      EXPECT_EQ(rp.displacement, 0.0);
      const PointF expect = c.points[i] + rp.center_shift * rp.normal;
      EXPECT_NEAR(rc.contour.points[i].x, expect.x, 1e-12);
      EXPECT_NEAR(rc.contour.points[i].y, expect.y, 1e-12);
    }
  }
}

TEST(RefineContour, LargePredictionClampedToTmax) {
  const auto s = synth::gen_sample(synth::SynthSpec{});
  for (int window : {1, 5}) {
    RefineConfig cfg;
    cfg.offset_median_window = window;
    const auto net = constant_net(cfg, static_cast<float>(10 * cfg.t_max));
    const auto coarse = coarse::prompt_segment_classical(s.sem, coarse::bboxes_from_layout(s.layout));
    int checked = 0;
    for (const auto& c : contours_for(coarse, cfg))
      for (const auto& rp : refine_contour(c, s.sem, net, cfg).points) {
        if (rp.dropped) continue;
        if (window == 1)
          EXPECT_DOUBLE_EQ(rp.displacement, cfg.t_max);
        else
          EXPECT_LE(std::abs(rp.displacement), cfg.t_max);
        ++checked;
      }
    EXPECT_GT(checked, 100);
  }
}

TEST(Raster, RectangleContourGivesRectanglePixels) {
  const auto m = rect_mask(40, 30, 5, 7, 25, 21);
  EXPECT_EQ(rasterize_mask(img::trace_contours(m), 40, 30), m);
}

TEST(Raster, EmptyContourList) { EXPECT_EQ(img::count_foreground(rasterize_mask({}, 10, 10)), 0); }

TEST(Raster, TraceRasterizeRoundTrip) {
  Rng rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    BinaryMask m(64, 64);
    const int blobs = 1 + static_cast<int>(rng.below(3));
    for (int b = 0; b < blobs; ++b) {
      const auto d = disk_mask(64, 64, rng.uniform(12, 52), rng.uniform(12, 52), rng.uniform(6, 12));
      for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] |= d.data()[i];
    }
    EXPECT_GE(metrics::iou(rasterize_mask(img::trace_contours(m), 64, 64), m), 0.98);
  }
}

TEST(RefineMask, PerfectCoarseZeroNet) {
  RefineConfig cfg;
  const auto net = constant_net(cfg, 0.0f);
  for (std::uint64_t seed : {1, 2, 3}) {
    synth::SynthSpec spec;
    spec.seed = seed;
    const auto s = synth::gen_sample(spec);
    EXPECT_GE(metrics::iou(refine_mask(s.gt_mask, s.sem, net, cfg), s.gt_mask), 0.98);
  }
}

TEST(RefineMask, ComponentCountPreserved) {
  synth::CorpusSpec cs;
  cs.train = cs.val = 0;
  cs.test_easy = cs.test_medium = cs.test_hard = cs.test_extreme = 4;
  RefineConfig cfg;
  const auto net = constant_net(cfg, 1.5f);
  for (const auto& e : synth::plan_corpus(cs)) {
    const auto s = synth::gen_sample(e.spec);
    const auto coarse = coarse::prompt_segment_classical(s.sem, coarse::bboxes_from_layout(s.layout));
    EXPECT_EQ(img::count_components(refine_mask(coarse, s.sem, net, cfg)), img::count_components(coarse)) << e.id;
  }
}

TEST(RefineMask, TrainedRegressorMovesContoursTowardTruth) {
  synth::CorpusSpec cs;
  cs.train = 8;
  cs.val = 0;
  cs.test_easy = 4;
  cs.test_medium = cs.test_hard = cs.test_extreme = 0;
  std::vector<synth::SynthSample> samples;
  std::vector<BinaryMask> coarse;
  for (const auto& e : synth::plan_corpus(cs)) {
    samples.push_back(synth::gen_sample(e.spec));
    coarse.push_back(coarse::prompt_segment_classical(samples.back().sem, coarse::bboxes_from_layout(samples.back().layout)));
  }
  RefineConfig cfg;
  std::vector<TrainingTriple> triples;
  for (int i = 0; i < 8; ++i) triples.push_back({&coarse[i], &samples[i].sem, &samples[i].gt_mask});
  const auto set = build_training_set(triples, cfg, 8000, 1);
  nn::TrainConfig tc;
  tc.epochs = 8;
  const auto net = train_fine(set, cfg, tc, 3).params;

  double before = 0.0, after = 0.0;
  int n_before = 0, n_after = 0;
  for (int i = 8; i < 12; ++i) {
    for (const auto& c : contours_for(coarse[i], cfg)) {
      const auto rc = refine_contour(c, samples[i].sem, net, cfg);
      for (std::size_t k = 0; k < c.size(); ++k) {
        const auto& g = samples[i].gt_mask;
        if (auto l = edge_label(g, c.points[k], c.normals[k], cfg.t_max, cfg.label_step)) {
          before += std::abs(*l);
          ++n_before;
        }
        if (auto l = edge_label(g, rc.contour.points[k], c.normals[k], cfg.t_max, cfg.label_step)) {
          after += std::abs(*l);
          ++n_after;
        }
      }
    }
  }
  ASSERT_GT(n_before, 0);
  ASSERT_GT(n_after, 0);
  EXPECT_LT(after / n_after, before / n_before);
}
