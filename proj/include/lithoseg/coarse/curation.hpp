#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lithoseg/error.hpp"
#include "lithoseg/imgcore/image.hpp"
#include "lithoseg/metrics/seg.hpp"
#include "lithoseg/rng.hpp"

namespace lithoseg::coarse {

enum class DecisionSource { Oracle, Human };

inline std::string to_string(DecisionSource s) { return s == DecisionSource::Oracle ? "oracle" : "human"; }

inline DecisionSource decision_source_from_string(const std::string& s) {
  if (s == "oracle") return DecisionSource::Oracle;
  if (s == "human") return DecisionSource::Human;
  throw DomainError("unknown decision source '" + s + "'");
}

struct CurationDecision {
  std::string sample_id;
  bool accepted = false;
  DecisionSource source = DecisionSource::Oracle;
  std::string ts;
};

inline std::string now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline nlohmann::json to_json_line(const CurationDecision& d) {
  return {{"sample_id", d.sample_id}, {"accepted", d.accepted}, {"source", to_string(d.source)}, {"ts", d.ts}};
}

inline CurationDecision decision_from_json(const nlohmann::json& j) {
  return {j.at("sample_id").get<std::string>(), j.at("accepted").get<bool>(),
          decision_source_from_string(j.at("source").get<std::string>()), j.value("ts", std::string{})};
}

// Flips exactly round(rate * n) decisions, chosen by a seeded shuffle.
inline int inject_noise(std::vector<CurationDecision>& decisions, double rate, std::uint64_t seed) {
  if (rate < 0.0 || rate > 1.0) throw DomainError("noise injection rate must be in [0, 1]");
  const auto flips = static_cast<std::size_t>(std::lround(rate * static_cast<double>(decisions.size())));
  std::vector<std::size_t> order(decisions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  for (std::size_t k = 0; k < flips; ++k) decisions[order[k]].accepted = !decisions[order[k]].accepted;
  return static_cast<int>(flips);
}

// Accepts a mask iff IoU(mask, gt) >= threshold.
inline std::vector<CurationDecision> curate_oracle(const std::vector<std::string>& ids,
                                                   const std::vector<const img::BinaryMask*>& masks,
                                                   const std::vector<const img::BinaryMask*>& gts, double threshold,
                                                   double noise_rate = 0.0, std::uint64_t noise_seed = 0,
                                                   std::vector<double>* ious = nullptr) {
  if (ids.size() != masks.size() || ids.size() != gts.size()) throw ShapeError("curate_oracle: list sizes differ");
  const std::string ts = now_iso8601();
  std::vector<CurationDecision> out;
  out.reserve(ids.size());
  if (ious) ious->clear();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!gts[i]) throw DomainError("curate_oracle: sample " + ids[i] + " has no ground truth");
    const double v = metrics::iou(*masks[i], *gts[i]);
    if (ious) ious->push_back(v);
    out.push_back({ids[i], v >= threshold, DecisionSource::Oracle, ts});
  }
  if (noise_rate > 0.0) inject_noise(out, noise_rate, noise_seed);
  return out;
}

// Reads a decisions file; later lines for the same sample replace earlier
// ones. A missing file reads as no decisions.
inline std::map<std::string, CurationDecision> read_decisions(const std::filesystem::path& path) {
  std::map<std::string, CurationDecision> out;
  std::ifstream f(path);
  if (!f) return out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto d = decision_from_json(nlohmann::json::parse(line));
      out[d.sample_id] = std::move(d);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": malformed decision: " + e.what());
    }
  }
  return out;
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + tmp.string());
    f << text;
    if (!f) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline void write_decisions(const std::filesystem::path& path, const std::vector<CurationDecision>& ds) {
  std::ostringstream os;
  for (const auto& d : ds) os << to_json_line(d).dump() << '\n';
  write_text_atomic(path, os.str());
}

// Appends one decision by rewriting the file through a temporary and a
// rename. Readers never observe a partial line. Callers serialize.
inline void append_decision(const std::filesystem::path& path, const CurationDecision& d) {
  std::string text;
  {
    std::ifstream f(path, std::ios::binary);
    if (f) text.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
  }
  if (!text.empty() && text.back() != '\n') text.push_back('\n');
  text += to_json_line(d).dump() + "\n";
  write_text_atomic(path, text);
}

}  // namespace lithoseg::coarse
