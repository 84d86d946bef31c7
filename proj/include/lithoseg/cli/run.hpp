#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lithoseg/cli/config.hpp"
#include "lithoseg/coarse/curation.hpp"
#include "lithoseg/json_io.hpp"

namespace lithoseg::cli {

namespace fs = std::filesystem;

// A prerequisite file of a stage does not exist.
class MissingArtifact : public Error {
 public:
  explicit MissingArtifact(fs::path p) : Error("missing artifact: " + p.string()), path_(std::move(p)) {}
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

inline void require_file(const fs::path& p) {
  if (!fs::exists(p)) throw MissingArtifact(p);
}

enum class StageStatus { Pending, Running, AwaitingCuration, Done, Failed };

inline std::string to_string(StageStatus s) {
  switch (s) {
    case StageStatus::Pending: return "pending";
    case StageStatus::Running: return "running";
    case StageStatus::AwaitingCuration: return "awaiting_curation";
    case StageStatus::Done: return "done";
    case StageStatus::Failed: return "failed";
  }
  return "pending";
}

inline StageStatus stage_status_from_string(const std::string& s) {
  if (s == "running") return StageStatus::Running;
  if (s == "awaiting_curation") return StageStatus::AwaitingCuration;
  if (s == "done") return StageStatus::Done;
  if (s == "failed") return StageStatus::Failed;
  return StageStatus::Pending;
}

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names{"synth", "bootstrap", "fine-train", "refine", "eval"};
  return names;
}

enum class LogLevel { Quiet, Info, Debug };

inline LogLevel log_level() {
  const char* v = std::getenv("LITHOSEG_LOG_LEVEL");
  const std::string s = v ? v : "info";
  if (s == "quiet" || s == "error") return LogLevel::Quiet;
  if (s == "debug") return LogLevel::Debug;
  return LogLevel::Info;
}

inline void log_info(const std::string& msg) {
  if (log_level() != LogLevel::Quiet) std::cerr << "[lithoseg] " << msg << std::endl;
}

inline void log_debug(const std::string& msg) {
  if (log_level() == LogLevel::Debug) std::cerr << "[lithoseg:debug] " << msg << std::endl;
}

struct StageOutcome {
  StageStatus status = StageStatus::Done;
  std::vector<fs::path> artifacts;
  std::string message;
};

// Run directory with its manifest. The effective config is snapshotted to
// config.toml on open and read back when no --config is given.
class Run {
 public:
  static Run open(const fs::path& dir, const std::optional<fs::path>& config_path,
                  std::optional<std::uint64_t> seed_override, bool force) {
    Run r;
    r.dir_ = dir;
    const auto snapshot = dir / "config.toml";
    if (config_path)
      r.cfg_ = load_config(*config_path, seed_override);
    else if (fs::exists(snapshot))
      r.cfg_ = load_config(snapshot, seed_override);
    else
      r.cfg_ = parse_config("", seed_override);
    const std::string rendered = render_config(r.cfg_);

    if (fs::exists(dir / "manifest.json")) {
      r.manifest_ = read_json_file(dir / "manifest.json");
      if (fs::exists(snapshot)) {
        std::ifstream f(snapshot);
        const std::string old((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        if (old != rendered && !force)
          throw ConfigError("config", "differs from the snapshot in " + snapshot.string() +
                                          "; pass --force to replace it");
        if (old != rendered)
          for (const auto& [key, value] : r.manifest_["stages"].items())
            r.set_status(key, StageStatus::Pending, "config changed");
      }
    } else {
      r.manifest_ = {{"format", "lithoseg-run-1"}, {"stages", nlohmann::json::object()}};
      for (const auto& s : stage_names())
        r.manifest_["stages"][s] = {{"status", "pending"}, {"artifacts", nlohmann::json::array()}};
      for (const char* a : {"center", "angle", "scan", "noise"})
        r.manifest_["stages"][std::string("ablate:") + a] = {{"status", "pending"},
                                                             {"artifacts", nlohmann::json::array()}};
    }
    fs::create_directories(dir);
    coarse::write_text_atomic(snapshot, rendered);
    r.manifest_["run_id"] = fs::absolute(dir).lexically_normal().filename().string();
    r.manifest_["seed"] = r.cfg_.seed;
    r.manifest_["config"] = config_json(r.cfg_);
    r.manifest_["config_snapshot"] = "config.toml";
    r.manifest_["seeds"] = {{"corpus_seed_base", r.cfg_.corpus.seed_base},
                            {"curation_noise", r.cfg_.bootstrap.noise_seed},
                            {"patch_init", r.cfg_.patch.init_seed},
                            {"patch_sample", r.cfg_.patch.sample_seed},
                            {"patch_train", r.cfg_.patch.train.seed},
                            {"fine_init", r.cfg_.fine_init_seed()},
                            {"fine_train", r.cfg_.fine_train_config().seed},
                            {"fine_profiles", r.cfg_.profile_seed()}};
    r.save();
    return r;
  }

  const fs::path& dir() const { return dir_; }
  const Config& config() const { return cfg_; }
  Config& config() { return cfg_; }
  const nlohmann::json& manifest() const { return manifest_; }

  fs::path corpus_dir() const { return dir_ / "corpus"; }
  fs::path coarse_dir() const { return dir_ / "coarse"; }
  fs::path fine_dir() const { return dir_ / "fine"; }
  fs::path refine_dir() const { return dir_ / "refine"; }
  fs::path eval_dir() const { return dir_ / "eval"; }
  fs::path ablate_dir() const { return dir_ / "ablate"; }

  StageStatus status(const std::string& stage) const {
    const auto& st = manifest_.at("stages");
    if (!st.contains(stage)) return StageStatus::Pending;
    return stage_status_from_string(st.at(stage).value("status", "pending"));
  }

  void set_status(const std::string& stage, StageStatus s, const std::string& message = "") {
    auto& st = manifest_["stages"][stage];
    st["status"] = to_string(s);
    if (message.empty())
      st.erase("message");
    else
      st["message"] = message;
  }

  void save() const { write_json_file(dir_ / "manifest.json", manifest_); }

  // Runs one stage with the done / --force rule; later stages that were
  // done become pending.
  StageOutcome run_stage(const std::string& stage, bool force, const std::function<StageOutcome(Run&)>& body) {
    if (status(stage) == StageStatus::Done && !force) {
      log_info(stage + ": already done, nothing to do (pass --force to rerun)");
      return {StageStatus::Done, {}, "already done"};
    }
    set_status(stage, StageStatus::Running);
    save();
    StageOutcome out;
    try {
      out = body(*this);
    } catch (const std::exception& e) {
      set_status(stage, StageStatus::Failed, e.what());
      save();
      throw;
    }
    auto& st = manifest_["stages"][stage];
    st["artifacts"] = nlohmann::json::array();
    for (const auto& a : out.artifacts) st["artifacts"].push_back(fs::relative(a, dir_).generic_string());
    set_status(stage, out.status, out.message);
    // Stages after this one, including the per-ablation "ablate:<name>"
    // entries, lose their done status.
    const auto& names = stage_names();
    const auto it = std::find(names.begin(), names.end(), stage);
    if (it != names.end()) {
      std::vector<std::string> later(it + 1, names.end());
      for (const auto& [key, value] : manifest_["stages"].items())
        if (key.rfind("ablate:", 0) == 0) later.push_back(key);
      for (const auto& l : later)
        if (status(l) == StageStatus::Done) set_status(l, StageStatus::Pending, "upstream stage rerun");
    }
    save();
    return out;
  }

 private:
  fs::path dir_;
  Config cfg_;
  nlohmann::json manifest_;
};

}  // namespace lithoseg::cli
