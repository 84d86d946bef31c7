#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>

#include "lithoseg/coarse/bbox.hpp"
#include "lithoseg/coarse/segmenter.hpp"
#include "lithoseg/metrics/roughness.hpp"
#include "lithoseg/metrics/seg.hpp"
#include "lithoseg/synthgen/corpus.hpp"
#include "support.hpp"

using namespace lithoseg;
using namespace lithoseg::synth;
using testing_support::scratch_dir;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(RoughEdge, ZeroSigmaIsFlat) {
  for (double v : gen_rough_edge(100, 0.0, 10.0, 4)) EXPECT_EQ(v, 0.0);
}

TEST(RoughEdge, MonteCarloMomentsMatchAr1) {
  const int n = 100000;
  const double sigma = 2.0, xi = 10.0;
  const auto x = gen_rough_edge(n, sigma, xi, 12345);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0, lag = 0.0;
  for (int i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
  for (int i = 0; i + 1 < n; ++i) lag += (x[i] - mean) * (x[i + 1] - mean);
  const double sd = std::sqrt(var / n);
  EXPECT_NEAR(sd, sigma, 0.05 * sigma);
  EXPECT_NEAR(lag / var, std::exp(-1.0 / xi), 0.05);
}

TEST(RoughEdge, SameSeedSameSequence) {
  EXPECT_EQ(gen_rough_edge(500, 1.5, 8.0, 99), gen_rough_edge(500, 1.5, 8.0, 99));
  EXPECT_NE(gen_rough_edge(500, 1.5, 8.0, 99), gen_rough_edge(500, 1.5, 8.0, 100));
}

TEST(Generator, UnperturbedGroundTruthEqualsLayout) {
  for (auto pattern : {Pattern::ParallelLines, Pattern::Elbows, Pattern::Serpentine}) {
    SynthSpec s;
    s.pattern = pattern;
    s.roughness_sigma = 0.0;
    s.noise_sigma = 0.0;
    s.process_bias = 0.0;
    const auto smp = gen_sample(s);
    EXPECT_EQ(smp.gt_mask, smp.layout) << to_string(pattern);
    EXPECT_GT(img::count_foreground(smp.layout), 0);
  }
}

TEST(Generator, BrightestSampleSitsOnTheEdge) {
  for (double orientation : {90.0, 0.0}) {
    SynthSpec s;
    s.orientation = orientation;
    s.roughness_sigma = 0.0;
    s.noise_sigma = 0.0;
    const auto smp = gen_sample(s);
    const bool vertical = orientation == 90.0;
    const int n = s.image_size;
    int checked = 0;
    // Slices along the edge normal: rows for vertical lines, columns for
    // horizontal ones. Each foreground/background transition of the ground
    // truth is an edge crossing at the pixel boundary.
    for (int k = 8; k < n - 8; k += 16) {
      auto gt = [&](int i) { return vertical ? smp.gt_mask(i, k) : smp.gt_mask(k, i); };
      auto sem = [&](int i) { return vertical ? smp.sem(i, k) : smp.sem(k, i); };
      for (int i = 1; i < n; ++i) {
        if (gt(i) == gt(i - 1)) continue;
        const double edge = i - 0.5;
        int best = i;
        for (int j = std::max(0, i - 8); j <= std::min(n - 1, i + 8); ++j)
          if (sem(j) > sem(best)) best = j;
        EXPECT_LE(std::abs(best - edge), s.blur_sigma + 1.0) << "slice " << k << " edge " << edge;
        ++checked;
      }
    }
    EXPECT_GT(checked, 20);
  }
}

TEST(Generator, RasterizedRoughnessMatchesSigma) {
  SynthSpec s;
  s.image_size = 512;
  s.roughness_sigma = 2.0;
  s.roughness_corr_len = 10.0;
  s.noise_sigma = 0.0;
  s.seed = 31;
  const auto smp = gen_sample(s);
  const auto r = metrics::roughness(smp.gt_mask);
  EXPECT_GE(r.edge_samples, 512);
  EXPECT_NEAR(r.r_eq2, 4.0, 0.4);
}

TEST(Generator, InvalidSpecNamesField) {
  SynthSpec s;
  s.pitch = 30;
  s.line_width = 40;
  try {
    gen_sample(s);
    FAIL() << "expected SpecError";
  } catch (const SpecError& e) {
    EXPECT_NE(std::string(e.what()).find("pitch"), std::string::npos);
  }
}

TEST(Generator, SameSpecSameBytes) {
  SynthSpec s;
  s.seed = 77;
  const auto a = gen_sample(s);
  const auto b = gen_sample(s);
  EXPECT_EQ(a.sem, b.sem);
  EXPECT_EQ(a.gt_mask, b.gt_mask);
  s.seed = 78;
  EXPECT_NE(gen_sample(s).sem, a.sem);
}

namespace {

CorpusSpec one_per_stratum() {
  CorpusSpec cs;
  cs.base.image_size = 128;
  cs.train = 0;
  cs.val = 0;
  cs.test_easy = cs.test_medium = cs.test_hard = cs.test_extreme = 1;
  return cs;
}

}  // namespace

TEST(Corpus, OneSamplePerStratum) {
  const auto root = scratch_dir("corpus4");
  const auto entries = gen_corpus(root, one_per_stratum());
  ASSERT_EQ(entries.size(), 4u);
  std::set<std::string> strata;
  for (const auto& e : read_manifest(root)) {
    strata.insert(to_string(e.difficulty));
    EXPECT_TRUE(fs::exists(sample_dir(root, e) / "sem.png"));
    EXPECT_TRUE(fs::exists(sample_dir(root, e) / "gt.png"));
    EXPECT_TRUE(fs::exists(sample_dir(root, e) / "layout.png"));
    EXPECT_TRUE(fs::exists(sample_dir(root, e) / "edges.json"));
  }
  EXPECT_EQ(strata, (std::set<std::string>{"easy", "medium", "hard", "extreme"}));
}

TEST(Corpus, RegenerationIsBitIdentical) {
  const auto a = scratch_dir("corpus_a");
  const auto b = scratch_dir("corpus_b");
  const auto entries = gen_corpus(a, one_per_stratum());
  gen_corpus(b, one_per_stratum());
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  for (const auto& e : entries)
    for (const char* f : {"sem.png", "gt.png", "layout.png", "edges.json"})
      EXPECT_EQ(slurp(sample_dir(a, e) / f), slurp(sample_dir(b, e) / f)) << e.id << "/" << f;
}

TEST(Corpus, ExtremeIsHarderForClassicalSegmenter) {
  CorpusSpec cs;
  cs.train = cs.val = cs.test_medium = cs.test_hard = 0;
  cs.test_easy = 8;
  cs.test_extreme = 8;
  double easy = 0.0, extreme = 0.0;
  for (const auto& e : plan_corpus(cs)) {
    const auto smp = gen_sample(e.spec);
    const auto boxes = coarse::bboxes_from_layout(smp.layout);
    const double v = metrics::iou(coarse::prompt_segment_classical(smp.sem, boxes), smp.gt_mask);
    (e.difficulty == Difficulty::Easy ? easy : extreme) += v / 8.0;
  }
  EXPECT_LT(extreme, easy);
}
