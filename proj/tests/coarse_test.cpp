#include <gtest/gtest.h>

#include "lithoseg/coarse/bbox.hpp"
#include "lithoseg/coarse/bootstrap.hpp"
#include "lithoseg/coarse/curation.hpp"
#include "lithoseg/coarse/segmenter.hpp"
#include "lithoseg/metrics/seg.hpp"
#include "lithoseg/synthgen/corpus.hpp"
#include "support.hpp"

using namespace lithoseg;
using namespace lithoseg::coarse;
using testing_support::rect_mask;
using testing_support::scratch_dir;

namespace {

struct SampleSet {
  std::vector<synth::SynthSample> samples;
  std::vector<CoarseItem> items;

  explicit SampleSet(std::vector<synth::SynthSample> s) : samples(std::move(s)) {
    for (std::size_t i = 0; i < samples.size(); ++i)
      items.push_back({"s" + std::to_string(i), &samples[i].sem, &samples[i].layout, &samples[i].gt_mask});
  }
};

std::vector<synth::SynthSample> easy_samples(int n, std::uint64_t seed_base) {
  synth::CorpusSpec cs;
  cs.train = n;
  cs.val = cs.test_easy = cs.test_medium = cs.test_hard = cs.test_extreme = 0;
  cs.seed_base = seed_base;
  std::vector<synth::SynthSample> out;
  for (const auto& e : synth::plan_corpus(cs)) out.push_back(synth::gen_sample(e.spec));
  return out;
}

}  // namespace

TEST(BBoxes, EmptyLayout) { EXPECT_TRUE(bboxes_from_layout(BinaryMask(30, 30)).empty()); }

TEST(BBoxes, SingleBarWithMargin) {
  const auto layout = rect_mask(64, 64, 5, 5, 15, 45);
  const auto b = bboxes_from_layout(layout);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0], (BBox{2, 2, 18, 48}));
}

TEST(BBoxes, TwoBarsTwoDisjointBoxes) {
  auto layout = rect_mask(64, 64, 5, 5, 15, 45);
  for (int y = 5; y < 45; ++y)
    for (int x = 40; x < 50; ++x) layout(x, y) = 1;
  const auto b = bboxes_from_layout(layout);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_TRUE(b[0].x1 <= b[1].x0 || b[1].x1 <= b[0].x0);
}

TEST(Classical, DefaultSpecSampleAboveGate) {
  for (double orientation : {90.0, 0.0})
    for (std::uint64_t seed : {1, 2, 3}) {
      synth::SynthSpec spec;
      spec.orientation = orientation;
      spec.seed = seed;
      const auto s = synth::gen_sample(spec);
      const auto m = prompt_segment_classical(s.sem, bboxes_from_layout(s.layout));
      EXPECT_GE(metrics::iou(m, s.gt_mask), 0.7) << "orientation " << orientation << " seed " << seed;
    }
}

// Mean over a mixed easy split, noisier samples included.
TEST(Classical, EasySplitMeanAboveGate) {
  double mean = 0.0;
  const auto samples = easy_samples(12, 500);
  for (const auto& s : samples)
    mean += metrics::iou(prompt_segment_classical(s.sem, bboxes_from_layout(s.layout)), s.gt_mask) / samples.size();
  EXPECT_GE(mean, 0.7);
}

TEST(Classical, NoBoxesEmptyMask) {
  const auto s = easy_samples(1, 600)[0];
  EXPECT_EQ(img::count_foreground(prompt_segment_classical(s.sem, {})), 0);
}

TEST(Classical, BackgroundBoxContributesNothing) {
  GrayImage flat(64, 64, 0.45f);
  Rng rng(3);
  for (auto& v : flat.data()) v = static_cast<float>(0.45 + 0.01 * rng.normal());
  EXPECT_EQ(img::count_foreground(prompt_segment_classical(flat, {BBox{10, 10, 40, 40}})), 0);
}

TEST(PatchMlp, BeatsClassicalAfterTrainingOnCuratedMasks) {
  const auto train = easy_samples(24, 2000);
  const auto held = easy_samples(8, 9000);
  std::vector<BinaryMask> masks;
  for (const auto& s : train) masks.push_back(prompt_segment_classical(s.sem, bboxes_from_layout(s.layout)));
  std::vector<TrainPair> curated;
  for (std::size_t i = 0; i < train.size(); ++i)
    if (metrics::iou(masks[i], train[i].gt_mask) >= 0.8) curated.push_back({&train[i].sem, &masks[i]});
  ASSERT_GE(curated.size(), 20u);
  PatchMlpSegmenter seg;
  seg.retrain(curated, 3, true);
  double learned = 0.0, classical = 0.0;
  for (const auto& s : held) {
    learned += metrics::iou(seg.predict(s.sem), s.gt_mask);
    classical += metrics::iou(prompt_segment_classical(s.sem, bboxes_from_layout(s.layout)), s.gt_mask);
  }
  EXPECT_GT(learned, classical);
}

TEST(PatchMlp, PredictAndRetrainAreDeterministic) {
  const auto train = easy_samples(3, 3000);
  std::vector<TrainPair> pairs;
  for (const auto& s : train) pairs.push_back({&s.sem, &s.gt_mask});
  PatchMlpSegmenter a, b;
  a.retrain(pairs, 1, true);
  b.retrain(pairs, 1, true);
  EXPECT_EQ(a.params(), b.params());
  EXPECT_EQ(a.predict(train[0].sem), a.predict(train[0].sem));
  // From-initial retraining ignores the current state.
  a.retrain(pairs, 1, true);
  EXPECT_EQ(a.params(), b.params());
}

TEST(Curation, PerfectMasksAllAccepted) {
  const auto m = rect_mask(10, 10, 2, 2, 8, 8);
  const std::vector<std::string> ids{"a", "b", "c"};
  const auto d = curate_oracle(ids, {&m, &m, &m}, {&m, &m, &m}, 0.8);
  for (const auto& x : d) EXPECT_TRUE(x.accepted);
}

TEST(Curation, NoiseFlipsExactCount) {
  std::vector<CurationDecision> d(100);
  for (int i = 0; i < 100; ++i) d[i] = {"s" + std::to_string(i), i % 2 == 0, DecisionSource::Oracle, ""};
  const auto before = d;
  EXPECT_EQ(inject_noise(d, 0.3, 5), 30);
  int flipped = 0;
  for (int i = 0; i < 100; ++i) flipped += d[i].accepted != before[i].accepted;
  EXPECT_EQ(flipped, 30);
  auto again = before;
  inject_noise(again, 0.3, 5);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(again[i].accepted, d[i].accepted);
}

TEST(Curation, IouAtThresholdAccepted) {
  BinaryMask gt(5, 1), pred(5, 1);
  for (int x = 0; x < 5; ++x) gt(x, 0) = 1;
  for (int x = 0; x < 4; ++x) pred(x, 0) = 1;
  ASSERT_EQ(metrics::iou(pred, gt), 0.8);
  EXPECT_TRUE(curate_oracle({"x"}, {&pred}, {&gt}, 0.8)[0].accepted);
}

TEST(Curation, DecisionsFileLaterLineWins) {
  const auto dir = scratch_dir("decisions");
  const auto path = dir / "decisions.jsonl";
  append_decision(path, {"a", true, DecisionSource::Human, "t0"});
  append_decision(path, {"b", false, DecisionSource::Human, "t1"});
  append_decision(path, {"a", false, DecisionSource::Human, "t2"});
  const auto d = read_decisions(path);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_FALSE(d.at("a").accepted);
  EXPECT_EQ(d.at("a").ts, "t2");
  EXPECT_TRUE(read_decisions(dir / "missing.jsonl").empty());
}

TEST(Bootstrap, SingleIterationIsPromptThenTrain) {
  SampleSet set(easy_samples(6, 4000));
  BootstrapSegmenter seg;
  BootstrapConfig cfg;
  cfg.iterations = 1;
  cfg.epochs_per_iter = 1;
  const auto r = bootstrap_run(set.items, seg, cfg);
  EXPECT_EQ(r.status, BootstrapStatus::Done);
  ASSERT_EQ(r.iterations.size(), 1u);
  EXPECT_EQ(r.iterations[0].generator, "prompted");
  EXPECT_GT(r.iterations[0].accepted, 0);
}

TEST(Bootstrap, HumanModeParksAndResumes) {
  SampleSet set(easy_samples(4, 4100));
  const auto run = scratch_dir("bootstrap_human");
  BootstrapConfig cfg;
  cfg.iterations = 1;
  cfg.epochs_per_iter = 1;
  cfg.curation = CurationMode::Human;
  BootstrapSegmenter seg;
  auto r = bootstrap_run(set.items, seg, cfg, run);
  EXPECT_EQ(r.status, BootstrapStatus::AwaitingCuration);
  EXPECT_EQ(r.awaiting_iteration, 1);
  EXPECT_TRUE(fs::exists(iteration_dir(run, 1) / "masks" / "s0.png"));

  const auto decisions = iteration_dir(run, 1) / "decisions.jsonl";
  append_decision(decisions, {"s0", true, DecisionSource::Human, now_iso8601()});
  r = bootstrap_run(set.items, seg, cfg, run);
  EXPECT_EQ(r.status, BootstrapStatus::AwaitingCuration);

  for (const char* id : {"s1", "s2", "s3"}) append_decision(decisions, {id, id[1] != '3', DecisionSource::Human, ""});
  BootstrapSegmenter fresh;
  r = bootstrap_run(set.items, fresh, cfg, run);
  ASSERT_EQ(r.status, BootstrapStatus::Done);
  EXPECT_EQ(r.iterations[0].accepted, 3);
  EXPECT_TRUE(fs::exists(iteration_dir(run, 1) / "weights.lsnn"));
}

TEST(Bootstrap, AllRejectedAborts) {
  SampleSet set(easy_samples(2, 4200));
  BootstrapSegmenter seg;
  BootstrapConfig cfg;
  cfg.iterations = 1;
  cfg.iou_threshold = 0.999;
  EXPECT_THROW(bootstrap_run(set.items, seg, cfg), BootstrapAbort);
}
