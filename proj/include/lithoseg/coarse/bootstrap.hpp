#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lithoseg/coarse/bbox.hpp"
#include "lithoseg/coarse/curation.hpp"
#include "lithoseg/coarse/segmenter.hpp"
#include "lithoseg/imgcore/io.hpp"
#include "lithoseg/json_io.hpp"

namespace lithoseg::coarse {

namespace fs = std::filesystem;

enum class CurationMode { Oracle, Human };

struct BootstrapConfig {
  int iterations = 3;
  int epochs_per_iter = 3;
  CurationMode curation = CurationMode::Oracle;
  double iou_threshold = 0.8;
  double noise_injection_rate = 0.0;
  std::uint64_t noise_seed = 0;
  // Human mode: proceed with the reviewed subset instead of waiting.
  bool allow_partial_review = false;
  BoxOptions boxes{};

  void validate() const {
    if (iterations < 1) throw DomainError("bootstrap: iterations must be >= 1");
    if (epochs_per_iter < 1) throw DomainError("bootstrap: epochs_per_iter must be >= 1");
    if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) throw DomainError("bootstrap: iou_threshold must be in (0, 1)");
    if (noise_injection_rate < 0.0 || noise_injection_rate > 0.3)
      throw DomainError("bootstrap: noise_injection_rate must be in [0, 0.3]");
  }
};

struct CoarseItem {
  std::string id;
  const GrayImage* image = nullptr;
  const BinaryMask* layout = nullptr;
  const BinaryMask* gt = nullptr;  // optional
};

struct IterationReport {
  int iteration = 0;
  std::string generator;  // prompted | predicted
  int total = 0;
  int accepted = 0;
  int flipped = 0;
  std::optional<double> mean_iou;           // generated masks vs gt
  std::optional<double> mean_iou_accepted;  // over accepted masks
  std::vector<nn::TrainResult> training;    // not serialized beyond the loss curve
  std::vector<double> loss_history;
};

inline nlohmann::json to_json(const IterationReport& r) {
  nlohmann::json j{{"iteration", r.iteration}, {"generator", r.generator}, {"total", r.total},
                   {"accepted", r.accepted},   {"flipped", r.flipped},     {"loss_history", r.loss_history}};
  j["mean_iou"] = r.mean_iou ? nlohmann::json(*r.mean_iou) : nlohmann::json(nullptr);
  j["mean_iou_accepted"] = r.mean_iou_accepted ? nlohmann::json(*r.mean_iou_accepted) : nlohmann::json(nullptr);
  return j;
}

inline IterationReport iteration_report_from_json(const nlohmann::json& j) {
  IterationReport r;
  r.iteration = j.at("iteration").get<int>();
  r.generator = j.at("generator").get<std::string>();
  r.total = j.at("total").get<int>();
  r.accepted = j.at("accepted").get<int>();
  r.flipped = j.value("flipped", 0);
  r.loss_history = j.value("loss_history", std::vector<double>{});
  if (j.contains("mean_iou") && !j["mean_iou"].is_null()) r.mean_iou = j["mean_iou"].get<double>();
  if (j.contains("mean_iou_accepted") && !j["mean_iou_accepted"].is_null())
    r.mean_iou_accepted = j["mean_iou_accepted"].get<double>();
  return r;
}

enum class BootstrapStatus { Done, AwaitingCuration };

struct BootstrapResult {
  BootstrapStatus status = BootstrapStatus::Done;
  int awaiting_iteration = 0;  // 1-based, when awaiting
  std::vector<IterationReport> iterations;
  std::vector<std::vector<CurationDecision>> decisions;
};

class BootstrapAbort : public Error {
 public:
  BootstrapAbort(const std::string& msg, IterationReport report) : Error(msg), report_(std::move(report)) {}
  const IterationReport& report() const { return report_; }

 private:
  IterationReport report_;
};

inline fs::path iteration_dir(const fs::path& run, int k) { return run / ("iter" + std::to_string(k)); }

// Mask files of iteration k, or nullopt unless every item has one.
inline std::optional<std::vector<BinaryMask>> load_iteration_masks(const fs::path& dir,
                                                                   const std::vector<CoarseItem>& items) {
  std::vector<BinaryMask> out;
  for (const auto& it : items) {
    const auto p = dir / "masks" / (it.id + ".png");
    if (!fs::exists(p)) return std::nullopt;
    out.push_back(img::load_mask(p));
  }
  return out;
}

// Generate -> curate -> retrain from initial weights -> swap, repeated. With
// a run directory, finished iterations are reloaded rather than recomputed
// and human curation can park the run until decisions arrive.
inline BootstrapResult bootstrap_run(const std::vector<CoarseItem>& items, Segmenter& seg, const BootstrapConfig& cfg,
                                     const std::optional<fs::path>& run_dir = std::nullopt) {
  cfg.validate();
  if (items.empty()) throw DomainError("bootstrap: corpus has no images");
  BootstrapResult result;
  for (int k = 1; k <= cfg.iterations; ++k) {
    const std::optional<fs::path> dir = run_dir ? std::optional(iteration_dir(*run_dir, k)) : std::nullopt;
    if (dir && fs::exists(*dir / "report.json") && (!seg.has_state() || fs::exists(*dir / "weights.lsnn"))) {
      result.iterations.push_back(iteration_report_from_json(read_json_file(*dir / "report.json")));
      if (seg.has_state()) seg.load_state(*dir / "weights.lsnn");
      continue;
    }

    IterationReport rep;
    rep.iteration = k;
    rep.generator = k == 1 ? "prompted" : "predicted";
    rep.total = static_cast<int>(items.size());

    std::vector<BinaryMask> masks;
    if (auto saved = dir ? load_iteration_masks(*dir, items) : std::nullopt) {
      masks = std::move(*saved);
    } else {
      masks.reserve(items.size());
      for (const auto& it : items)
        masks.push_back(k == 1 ? seg.generate_prompted(*it.image, bboxes_from_layout(*it.layout, cfg.boxes))
                               : seg.predict(*it.image));
      if (dir) {
        fs::create_directories(*dir / "masks");
        for (std::size_t i = 0; i < items.size(); ++i) img::save_mask(*dir / "masks" / (items[i].id + ".png"), masks[i]);
      }
    }

    std::vector<std::string> ids;
    std::vector<const BinaryMask*> mptr, gptr;
    bool all_gt = true;
    for (std::size_t i = 0; i < items.size(); ++i) {
      ids.push_back(items[i].id);
      mptr.push_back(&masks[i]);
      gptr.push_back(items[i].gt);
      all_gt = all_gt && items[i].gt;
    }
    std::vector<double> ious;
    if (all_gt) {
      double s = 0.0;
      for (std::size_t i = 0; i < items.size(); ++i) s += metrics::iou(masks[i], *items[i].gt);
      rep.mean_iou = s / static_cast<double>(items.size());
    }

    std::vector<CurationDecision> decisions;
    if (cfg.curation == CurationMode::Oracle) {
      decisions = curate_oracle(ids, mptr, gptr, cfg.iou_threshold, 0.0, 0, &ious);
      if (cfg.noise_injection_rate > 0.0)
        rep.flipped = inject_noise(decisions, cfg.noise_injection_rate, cfg.noise_seed + static_cast<std::uint64_t>(k));
      if (dir) write_decisions(*dir / "decisions.jsonl", decisions);
    } else {
      const auto recorded = dir ? read_decisions(*dir / "decisions.jsonl") : std::map<std::string, CurationDecision>{};
      for (const auto& id : ids)
        if (auto f = recorded.find(id); f != recorded.end()) decisions.push_back(f->second);
      if (decisions.size() < ids.size() && !cfg.allow_partial_review) {
        result.status = BootstrapStatus::AwaitingCuration;
        result.awaiting_iteration = k;
        return result;
      }
    }

    std::vector<TrainPair> accepted;
    double acc_iou = 0.0;
    for (const auto& d : decisions) {
      if (!d.accepted) continue;
      const auto i = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), d.sample_id) - ids.begin());
      accepted.push_back({items[i].image, &masks[i]});
      if (all_gt) acc_iou += metrics::iou(masks[i], *items[i].gt);
    }
    rep.accepted = static_cast<int>(accepted.size());
    if (all_gt && rep.accepted > 0) rep.mean_iou_accepted = acc_iou / rep.accepted;
    if (accepted.empty()) {
      if (dir) write_json_file(*dir / "report.json", to_json(rep));
      throw BootstrapAbort("bootstrap: iteration " + std::to_string(k) + " accepted no masks", rep);
    }

    seg.retrain(accepted, cfg.epochs_per_iter, true);
    if (auto* p = dynamic_cast<BootstrapSegmenter*>(&seg)) rep.loss_history = p->learned().last_training().loss_history;
    if (auto* p = dynamic_cast<PatchMlpSegmenter*>(&seg)) rep.loss_history = p->last_training().loss_history;
    if (dir) {
      if (seg.has_state()) seg.save_state(*dir / "weights.lsnn");
      write_json_file(*dir / "report.json", to_json(rep));
    }
    result.decisions.push_back(std::move(decisions));
    result.iterations.push_back(std::move(rep));
  }
  return result;
}

}  // namespace lithoseg::coarse
