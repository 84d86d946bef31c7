#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lithoseg/cli/run.hpp"
#include "lithoseg/coarse/bootstrap.hpp"
#include "lithoseg/fine/refine.hpp"
#include "lithoseg/imgcore/io.hpp"
#include "lithoseg/metrics/evaluate.hpp"
#include "lithoseg/nnet/serialize.hpp"
#include "lithoseg/synthgen/corpus.hpp"

namespace lithoseg::cli {

using img::BinaryMask;

// Corpus samples read back from a run directory, in manifest order.
struct CorpusData {
  fs::path root;
  std::vector<synth::LoadedSample> samples;

  std::vector<const synth::LoadedSample*> select(const std::string& split,
                                                 std::optional<synth::Difficulty> d = std::nullopt) const {
    std::vector<const synth::LoadedSample*> out;
    for (const auto& s : samples)
      if (s.entry.split == split && (!d || s.entry.difficulty == *d)) out.push_back(&s);
    return out;
  }
};

inline CorpusData load_corpus(const Run& run) {
  CorpusData c;
  c.root = run.corpus_dir();
  require_file(c.root / "manifest.json");
  for (const auto& e : synth::read_manifest(c.root)) {
    const auto dir = synth::sample_dir(c.root, e);
    for (const char* f : {"sem.png", "layout.png", "gt.png"}) require_file(dir / f);
    c.samples.push_back(synth::load_sample(c.root, e));
  }
  return c;
}

inline fs::path coarse_mask_path(const Run& run, const std::string& id) {
  return run.coarse_dir() / "masks" / (id + ".png");
}
inline fs::path refined_mask_path(const Run& run, const std::string& id) {
  return run.refine_dir() / "masks" / (id + ".png");
}

inline std::vector<BinaryMask> load_masks(const std::vector<fs::path>& paths) {
  for (const auto& p : paths) require_file(p);
  std::vector<BinaryMask> out;
  for (const auto& p : paths) out.push_back(img::load_mask(p));
  return out;
}

inline std::vector<BinaryMask> load_coarse_masks(const Run& run, const std::vector<const synth::LoadedSample*>& s) {
  std::vector<fs::path> paths;
  for (const auto* x : s) paths.push_back(coarse_mask_path(run, x->entry.id));
  return load_masks(paths);
}

inline void remove_dir(const fs::path& p) {
  std::error_code ec;
  fs::remove_all(p, ec);
  if (ec) throw IoError("cannot remove " + p.string() + ": " + ec.message());
}

// ---- synth ---------------------------------------------------------------

inline StageOutcome stage_synth(Run& run) {
  remove_dir(run.corpus_dir());
  const auto entries = synth::gen_corpus(run.corpus_dir(), run.config().corpus);
  std::map<std::string, int> strata;
  for (const auto& e : entries) ++strata[e.split == "test" ? "test/" + synth::to_string(e.difficulty) : e.split];
  std::string msg = std::to_string(entries.size()) + " samples";
  for (const auto& [k, n] : strata) msg += ", " + k + " " + std::to_string(n);
  log_info("synth: " + msg);
  return {StageStatus::Done, {run.corpus_dir() / "manifest.json"}, msg};
}

// ---- bootstrap -------------------------------------------------------------

inline std::vector<coarse::CoarseItem> coarse_items(const std::vector<const synth::LoadedSample*>& s) {
  std::vector<coarse::CoarseItem> items;
  for (const auto* x : s) items.push_back({x->entry.id, &x->sem, &x->layout, &x->gt});
  return items;
}

inline coarse::BootstrapSegmenter make_segmenter(const Config& cfg) {
  return coarse::BootstrapSegmenter(cfg.classical, cfg.patch);
}

inline nlohmann::json bootstrap_report_json(const coarse::BootstrapResult& r) {
  nlohmann::json it = nlohmann::json::array();
  std::vector<int> counts;
  for (const auto& rep : r.iterations) {
    it.push_back(coarse::to_json(rep));
    counts.push_back(rep.accepted);
  }
  return {{"iterations", it}, {"accepted_counts", counts}};
}

inline StageOutcome stage_bootstrap(Run& run, bool force) {
  const auto corpus = load_corpus(run);
  const auto train = corpus.select("train");
  if (train.empty()) throw ConfigError("synth.train", "the corpus has no training samples");
  // A forced rerun starts from scratch; otherwise finished iterations and
  // recorded human decisions are picked up again.
  if (force) remove_dir(run.coarse_dir());
  fs::create_directories(run.coarse_dir());
  auto seg = make_segmenter(run.config());
  const auto items = coarse_items(train);
  coarse::BootstrapResult result;
  try {
    result = coarse::bootstrap_run(items, seg, run.config().bootstrap, run.coarse_dir());
  } catch (const coarse::BootstrapAbort& e) {
    write_json_file(run.coarse_dir() / "abort.json",
                    {{"message", e.what()}, {"iteration", coarse::to_json(e.report())}});
    throw;
  }
  const auto awaiting = run.coarse_dir() / "awaiting.json";
  if (result.status == coarse::BootstrapStatus::AwaitingCuration) {
    const auto dir = coarse::iteration_dir(run.coarse_dir(), result.awaiting_iteration);
    write_json_file(awaiting, {{"iteration", result.awaiting_iteration},
                               {"masks", fs::relative(dir / "masks", run.dir()).generic_string()},
                               {"decisions", fs::relative(dir / "decisions.jsonl", run.dir()).generic_string()},
                               {"items", items.size()}});
    const std::string msg = "iteration " + std::to_string(result.awaiting_iteration) +
                            " awaits human curation (lithoseg review-serve --run-dir " + run.dir().string() + ")";
    log_info("bootstrap: " + msg);
    return {StageStatus::AwaitingCuration, {awaiting}, msg};
  }
  std::error_code ec;
  fs::remove(awaiting, ec);

  seg.save_state(run.coarse_dir() / "weights.lsnn");
  const auto masks_dir = run.coarse_dir() / "masks";
  remove_dir(masks_dir);
  fs::create_directories(masks_dir);
  for (const auto& s : corpus.samples) img::save_mask(coarse_mask_path(run, s.entry.id), seg.predict(s.sem));
  const auto report = bootstrap_report_json(result);
  write_json_file(run.coarse_dir() / "report.json", report);
  std::string msg = "accepted per iteration:";
  for (int n : report["accepted_counts"]) msg += " " + std::to_string(n);
  log_info("bootstrap: " + msg);
  return {StageStatus::Done, {run.coarse_dir() / "weights.lsnn", masks_dir, run.coarse_dir() / "report.json"}, msg};
}

// ---- fine-train --------------------------------------------------------------

struct FineModel {
  nn::MlpParams params;
  nn::TrainResult training;
  std::size_t profiles = 0;
  std::size_t candidates = 0;
};

inline FineModel train_fine_model(const Run& run, const CorpusData& corpus, const fine::RefineConfig& rc) {
  const auto train = corpus.select("train");
  const auto coarse_masks = load_coarse_masks(run, train);
  std::vector<fine::TrainingTriple> triples;
  for (std::size_t i = 0; i < train.size(); ++i) triples.push_back({&coarse_masks[i], &train[i]->sem, &train[i]->gt});
  const auto set = fine::build_training_set(triples, rc, run.config().fine_train.max_profiles, run.config().profile_seed());
  FineModel m;
  m.profiles = set.profiles.size();
  m.candidates = set.candidates;
  m.training = fine::train_fine(set, rc, run.config().fine_train_config(), run.config().fine_init_seed());
  m.params = m.training.params;
  return m;
}

inline StageOutcome stage_fine_train(Run& run) {
  const auto corpus = load_corpus(run);
  const auto model = train_fine_model(run, corpus, run.config().refine);
  fs::create_directories(run.fine_dir());
  nn::save_params(run.fine_dir() / "weights.lsnn", model.params);
  write_json_file(run.fine_dir() / "report.json", {{"profiles", model.profiles},
                                                   {"candidates", model.candidates},
                                                   {"s_scan", run.config().refine.s_scan},
                                                   {"loss_history", model.training.loss_history}});
  char msg[128];
  std::snprintf(msg, sizeof msg, "%zu profiles, final loss %.4f", model.profiles, model.training.loss_history.back());
  log_info(std::string("fine-train: ") + msg);
  return {StageStatus::Done, {run.fine_dir() / "weights.lsnn", run.fine_dir() / "report.json"}, msg};
}

// ---- refine ------------------------------------------------------------------

inline nn::MlpParams load_fine_params(const Run& run) {
  const auto p = run.fine_dir() / "weights.lsnn";
  require_file(p);
  return nn::load_params(p);
}

inline StageOutcome stage_refine(Run& run) {
  const auto corpus = load_corpus(run);
  const auto params = load_fine_params(run);
  std::vector<const synth::LoadedSample*> targets = corpus.select("val");
  for (const auto* s : corpus.select("test")) targets.push_back(s);
  const auto coarse_masks = load_coarse_masks(run, targets);
  const auto dir = run.refine_dir() / "masks";
  remove_dir(run.refine_dir());
  fs::create_directories(dir);
  nlohmann::json per = nlohmann::json::array();
  int fallbacks = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    fine::RefineReport rep;
    const auto m = fine::refine_mask(coarse_masks[i], targets[i]->sem, params, run.config().refine, &rep);
    img::save_mask(refined_mask_path(run, targets[i]->entry.id), m);
    fallbacks += rep.fallback_components;
    per.push_back({{"id", targets[i]->entry.id},
                   {"contours", rep.contours},
                   {"points", rep.points},
                   {"dropped_points", rep.dropped_points},
                   {"fallback_components", rep.fallback_components},
                   {"self_intersecting", rep.self_intersecting}});
  }
  write_json_file(run.refine_dir() / "report.json", {{"images", per}});
  const std::string msg =
      std::to_string(targets.size()) + " masks refined, " + std::to_string(fallbacks) + " components kept coarse";
  log_info("refine: " + msg);
  return {StageStatus::Done, {dir, run.refine_dir() / "report.json"}, msg};
}

// ---- eval ----------------------------------------------------------------------

inline StageOutcome stage_eval(Run& run) {
  const auto corpus = load_corpus(run);
  const auto test = corpus.select("test");
  require_file(run.refine_dir() / "report.json");
  std::vector<metrics::FilePair> coarse_pairs, refined_pairs;
  std::map<synth::Difficulty, std::pair<std::vector<metrics::FilePair>, std::vector<metrics::FilePair>>> strata;
  for (const auto* s : test) {
    const auto gt = synth::sample_dir(corpus.root, s->entry) / "gt.png";
    metrics::FilePair c{s->entry.id, coarse_mask_path(run, s->entry.id), gt};
    metrics::FilePair r{s->entry.id, refined_mask_path(run, s->entry.id), gt};
    coarse_pairs.push_back(c);
    refined_pairs.push_back(r);
    strata[s->entry.difficulty].first.push_back(c);
    strata[s->entry.difficulty].second.push_back(r);
  }
  const auto& opt = run.config().eval;
  const auto coarse_all = metrics::evaluate_corpus(coarse_pairs, opt);
  const auto refined_all = metrics::evaluate_corpus(refined_pairs, opt);
  fs::create_directories(run.eval_dir() / "coarse");
  fs::create_directories(run.eval_dir() / "refined");
  write_json_file(run.eval_dir() / "coarse" / "report.json", metrics::to_json(coarse_all));
  write_json_file(run.eval_dir() / "refined" / "report.json", metrics::to_json(refined_all));

  std::vector<metrics::EvalSummary> keep;
  keep.reserve(2 * strata.size());
  std::vector<std::pair<std::string, const metrics::EvalSummary*>> rows{{"coarse/all", &coarse_all},
                                                                        {"refined/all", &refined_all}};
  nlohmann::json by_stratum;
  for (const auto& [d, pairs] : strata) {
    keep.push_back(metrics::evaluate_corpus(pairs.first, opt));
    keep.push_back(metrics::evaluate_corpus(pairs.second, opt));
    const auto& c = keep[keep.size() - 2];
    const auto& r = keep.back();
    by_stratum[synth::to_string(d)] = {{"coarse", metrics::to_json(c)["corpus"]},
                                       {"refined", metrics::to_json(r)["corpus"]}};
  }
  std::size_t k = 0;
  for (const auto& [d, pairs] : strata) {
    rows.push_back({"coarse/" + synth::to_string(d), &keep[k]});
    rows.push_back({"refined/" + synth::to_string(d), &keep[k + 1]});
    k += 2;
  }
  write_json_file(run.eval_dir() / "strata.json", by_stratum);
  const std::string table = metrics::format_table(rows);
  coarse::write_text_atomic(run.eval_dir() / "table.txt", table);
  std::cout << table;
  std::vector<std::string> missing = coarse_all.missing;
  missing.insert(missing.end(), refined_all.missing.begin(), refined_all.missing.end());
  std::string msg = "coarse IoU " + std::to_string(coarse_all.iou.mean().value_or(0.0)) + ", refined IoU " +
                    std::to_string(refined_all.iou.mean().value_or(0.0));
  if (!missing.empty()) msg += ", " + std::to_string(missing.size()) + " missing files skipped";
  log_info("eval: " + msg);
  return {StageStatus::Done,
          {run.eval_dir() / "coarse" / "report.json", run.eval_dir() / "refined" / "report.json",
           run.eval_dir() / "table.txt"},
          msg};
}

// ---- ablate --------------------------------------------------------------------

struct AblationRow {
  std::string setting;
  metrics::EvalSummary summary;
};

inline const std::vector<std::string>& ablation_names() {
  static const std::vector<std::string> n{"center", "angle", "scan", "noise"};
  return n;
}

inline metrics::EvalSummary refine_and_score(const std::vector<const synth::LoadedSample*>& samples,
                                             const std::vector<BinaryMask>& coarse_masks, const nn::MlpParams& params,
                                             const fine::RefineConfig& rc, const metrics::EvalOptions& opt) {
  std::vector<BinaryMask> refined;
  refined.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    refined.push_back(fine::refine_mask(coarse_masks[i], samples[i]->sem, params, rc));
  std::vector<metrics::MaskPair> pairs;
  for (std::size_t i = 0; i < samples.size(); ++i) pairs.push_back({samples[i]->entry.id, &refined[i], &samples[i]->gt});
  return metrics::evaluate_masks(pairs, opt);
}

inline std::string fmt_setting(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// Ablation grid on the easy test split. Settings that match the trained
// configuration reuse the stage weights; the others are retrained.
inline std::vector<AblationRow> run_ablation(const Run& run, const CorpusData& corpus, const std::string& which) {
  const auto& cfg = run.config();
  const auto easy = corpus.select("test", synth::Difficulty::Easy);
  if (easy.empty()) throw ConfigError("synth.test_easy", "ablations need easy test samples");
  std::vector<AblationRow> rows;

  if (which == "noise") {
    const auto train = corpus.select("train");
    const auto items = coarse_items(train);
    for (double rate : cfg.ablate.noise_rates) {
      auto bc = cfg.bootstrap;
      bc.curation = coarse::CurationMode::Oracle;
      bc.noise_injection_rate = rate;
      auto seg = make_segmenter(cfg);
      const auto result = coarse::bootstrap_run(items, seg, bc);
      std::vector<BinaryMask> masks;
      for (const auto* s : easy) masks.push_back(seg.predict(s->sem));
      std::vector<metrics::MaskPair> pairs;
      for (std::size_t i = 0; i < easy.size(); ++i) pairs.push_back({easy[i]->entry.id, &masks[i], &easy[i]->gt});
      rows.push_back({fmt_setting("noise %.0f%%", rate * 100.0), metrics::evaluate_masks(pairs, cfg.eval)});
      log_info("ablate noise: rate " + std::to_string(rate) + " done, accepted " +
               std::to_string(result.iterations.back().accepted));
    }
    return rows;
  }

  const auto coarse_masks = load_coarse_masks(run, easy);
  const auto trained = load_fine_params(run);
  auto with = [&](const fine::RefineConfig& rc, bool reuse) {
    const auto params = reuse ? trained : train_fine_model(run, corpus, rc).params;
    return refine_and_score(easy, coarse_masks, params, rc, cfg.eval);
  };

  if (which == "center") {
    for (bool align : {true, false}) {
      auto rc = cfg.refine;
      rc.align = align;
      rows.push_back({align ? "brightest center" : "no brightest center", with(rc, align == cfg.refine.align)});
    }
  } else if (which == "angle") {
    for (double deg : cfg.ablate.angles) {
      auto rc = cfg.refine;
      rc.normal_perturbation_deg = deg;
      rows.push_back({fmt_setting("angle %g deg", deg), with(rc, true)});
    }
  } else if (which == "scan") {
    rows.push_back({"scan " + std::to_string(cfg.refine.s_scan) + " (matched)", with(cfg.refine, true)});
    for (double f : cfg.ablate.scan_factors) {
      auto rc = fine::RefineConfig::from_scan_size(static_cast<int>(std::lround(cfg.refine.s_scan * f)));
      const auto derived = rc;
      rc = cfg.refine;
      rc.s_scan = derived.s_scan;
      rc.t_max = derived.t_max;
      rc.center_window = derived.center_window;
      rows.push_back({"scan " + std::to_string(rc.s_scan) + fmt_setting(" (x%g)", f), with(rc, false)});
    }
  } else {
    throw ConfigError("ablate", "unknown ablation '" + which + "' (expected center, angle, scan, noise or all)");
  }
  return rows;
}

// Expands "all" into every ablation name; throws on unknown names.
inline std::vector<std::string> expand_ablation(const std::string& which) {
  if (which == "all") return ablation_names();
  if (std::find(ablation_names().begin(), ablation_names().end(), which) != ablation_names().end()) return {which};
  throw ConfigError("ablate", "unknown ablation '" + which + "' (expected center, angle, scan, noise or all)");
}

// One ablation; writes ablate/<name>/{report.json, table.txt}.
inline StageOutcome stage_ablate(Run& run, const std::string& name) {
  const auto corpus = load_corpus(run);
  log_info("ablate: running " + name);
  const auto rows = run_ablation(run, corpus, name);
  const auto dir = run.ablate_dir() / name;
  fs::create_directories(dir);
  nlohmann::json j = nlohmann::json::array();
  std::vector<std::pair<std::string, const metrics::EvalSummary*>> table_rows;
  for (const auto& r : rows) {
    auto rj = metrics::to_json(r.summary);
    rj["setting"] = r.setting;
    j.push_back(rj);
    table_rows.push_back({r.setting, &r.summary});
  }
  write_json_file(dir / "report.json", {{"ablation", name}, {"rows", j}});
  const auto table = metrics::format_table(table_rows);
  coarse::write_text_atomic(dir / "table.txt", table);
  std::cout << "== " << name << "\n" << table << "\n";
  std::string msg;
  for (const auto& r : rows) msg += (msg.empty() ? "" : ", ") + r.setting + fmt_setting(" IoU %.4f", r.summary.iou.mean().value_or(0));
  return {StageStatus::Done, {dir / "report.json", dir / "table.txt"}, msg};
}

}  // namespace lithoseg::cli
