#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lithoseg/json_io.hpp"
#include "lithoseg/imgcore/io.hpp"
#include "lithoseg/synthgen/synth.hpp"

namespace lithoseg::synth {

namespace fs = std::filesystem;
using nlohmann::json;

inline void to_json(json& j, const SynthSpec& s) {
  j = json{{"image_size", s.image_size},
           {"pattern", to_string(s.pattern)},
           {"pitch", s.pitch},
           {"line_width", s.line_width},
           {"orientation", s.orientation},
           {"roughness_sigma", s.roughness_sigma},
           {"roughness_corr_len", s.roughness_corr_len},
           {"bloom_width", s.bloom_width},
           {"bloom_gain", s.bloom_gain},
           {"blur_sigma", s.blur_sigma},
           {"noise_sigma", s.noise_sigma},
           {"vertical_contrast", s.vertical_contrast},
           {"process_bias", s.process_bias},
           {"defocus_extra_blur", s.defocus_extra_blur},
           {"seed", s.seed},
           {"groove_level", s.groove_level},
           {"space_level", s.space_level},
           {"scan_cone_deg", s.scan_cone_deg},
           {"margin", s.margin}};
}

inline void from_json(const json& j, SynthSpec& s) {
  SynthSpec d;
  s.image_size = j.value("image_size", d.image_size);
  s.pattern = pattern_from_string(j.value("pattern", to_string(d.pattern)));
  s.pitch = j.value("pitch", d.pitch);
  s.line_width = j.value("line_width", d.line_width);
  s.orientation = j.value("orientation", d.orientation);
  s.roughness_sigma = j.value("roughness_sigma", d.roughness_sigma);
  s.roughness_corr_len = j.value("roughness_corr_len", d.roughness_corr_len);
  s.bloom_width = j.value("bloom_width", d.bloom_width);
  s.bloom_gain = j.value("bloom_gain", d.bloom_gain);
  s.blur_sigma = j.value("blur_sigma", d.blur_sigma);
  s.noise_sigma = j.value("noise_sigma", d.noise_sigma);
  s.vertical_contrast = j.value("vertical_contrast", d.vertical_contrast);
  s.process_bias = j.value("process_bias", d.process_bias);
  s.defocus_extra_blur = j.value("defocus_extra_blur", d.defocus_extra_blur);
  s.seed = j.value("seed", d.seed);
  s.groove_level = j.value("groove_level", d.groove_level);
  s.space_level = j.value("space_level", d.space_level);
  s.scan_cone_deg = j.value("scan_cone_deg", d.scan_cone_deg);
  s.margin = j.value("margin", d.margin);
}

inline json edges_to_json(const SynthSample& s) {
  json arr = json::array();
  for (std::size_t i = 0; i < s.edges.size(); ++i) {
    const auto& e = s.edges[i];
    arr.push_back({{"edge", i},
                   {"segment", e.segment},
                   {"side", e.side > 0 ? "left" : "right"},
                   {"origin", {e.origin.x, e.origin.y}},
                   {"direction", {e.direction.x, e.direction.y}},
                   {"outward", {e.outward.x, e.outward.y}},
                   {"displacement", e.displacement}});
  }
  return json{{"image_size", s.spec.image_size},
              {"process_bias", s.spec.process_bias},
              {"half_widths", [&] {
                 json hw = json::array();
                 for (const auto& seg : s.segments) hw.push_back(seg.half_width);
                 return hw;
               }()},
              {"edges", arr}};
}

inline std::vector<EdgeTrack> edges_from_json(const json& j) {
  std::vector<EdgeTrack> out;
  for (const auto& e : j.at("edges")) {
    EdgeTrack t;
    t.segment = e.at("segment").get<int>();
    t.side = e.at("side").get<std::string>() == "left" ? +1 : -1;
    t.origin = {e.at("origin")[0].get<double>(), e.at("origin")[1].get<double>()};
    t.direction = {e.at("direction")[0].get<double>(), e.at("direction")[1].get<double>()};
    t.outward = {e.at("outward")[0].get<double>(), e.at("outward")[1].get<double>()};
    t.displacement = e.at("displacement").get<std::vector<double>>();
    out.push_back(std::move(t));
  }
  return out;
}

inline void write_json(const fs::path& path, const json& j, int indent = 1) { write_json_file(path, j, indent); }

inline json read_json(const fs::path& path) { return read_json_file(path); }

inline void write_sample(const fs::path& dir, const SynthSample& s) {
  fs::create_directories(dir);
  img::save_mask(dir / "layout.png", s.layout);
  img::save_image(dir / "sem.png", s.sem);
  img::save_mask(dir / "gt.png", s.gt_mask);
  write_json(dir / "edges.json", edges_to_json(s), -1);
}

// ---------------------------------------------------------------- corpus

enum class Difficulty { Easy, Medium, Hard, Extreme };

inline std::string to_string(Difficulty d) {
  switch (d) {
    case Difficulty::Easy:
      return "easy";
    case Difficulty::Medium:
      return "medium";
    case Difficulty::Hard:
      return "hard";
    case Difficulty::Extreme:
      return "extreme";
  }
  return "?";
}

inline Difficulty difficulty_from_string(const std::string& s) {
  if (s == "easy") return Difficulty::Easy;
  if (s == "medium") return Difficulty::Medium;
  if (s == "hard") return Difficulty::Hard;
  if (s == "extreme") return Difficulty::Extreme;
  throw SpecError("difficulty", "unknown stratum '" + s + "'");
}

struct CorpusSpec {
  SynthSpec base;
  int train = 60;
  int val = 10;
  int test_easy = 50;
  int test_medium = 10;
  int test_hard = 10;
  int test_extreme = 10;
  std::uint64_t seed_base = 1000;
  // Orientations cycled by sample index (degrees).
  std::vector<double> orientations{90.0, 0.0};
  // Noise levels cycled by sample index; empty keeps base.noise_sigma.
  std::vector<double> noise_levels{0.03, 0.03, 0.06};
  // Medium stratum: unseen geometry.
  double medium_pitch = 48.0;
  double medium_line_width = 24.0;
  // Extreme stratum: suboptimal process window.
  double extreme_bias = 3.0;
  double extreme_defocus = 1.0;

  int count() const { return train + val + test_easy + test_medium + test_hard + test_extreme; }
};

struct CorpusEntry {
  std::string id;
  std::string split;  // train | val | test
  Difficulty difficulty = Difficulty::Easy;
  SynthSpec spec;
};

inline void to_json(json& j, const CorpusEntry& e) {
  j = json{{"id", e.id}, {"split", e.split}, {"difficulty", to_string(e.difficulty)}, {"spec", e.spec}};
}

inline void from_json(const json& j, CorpusEntry& e) {
  e.id = j.at("id").get<std::string>();
  e.split = j.at("split").get<std::string>();
  e.difficulty = difficulty_from_string(j.at("difficulty").get<std::string>());
  e.spec = j.at("spec").get<SynthSpec>();
}

// Per-sample specs for the whole corpus; seeds are seed_base + index.
inline std::vector<CorpusEntry> plan_corpus(const CorpusSpec& cs) {
  if (cs.count() < 1) throw SpecError("count", "corpus must contain at least one sample");
  if (cs.orientations.empty()) throw SpecError("orientations", "must not be empty");
  cs.base.validate();
  std::vector<CorpusEntry> out;
  int index = 0;
  auto add = [&](const std::string& split, Difficulty d, int n) {
    for (int k = 0; k < n; ++k, ++index) {
      CorpusEntry e;
      e.split = split;
      e.difficulty = d;
      e.spec = cs.base;
      e.spec.seed = cs.seed_base + static_cast<std::uint64_t>(index);
      e.spec.orientation = cs.orientations[static_cast<std::size_t>(index) % cs.orientations.size()];
      if (!cs.noise_levels.empty())
        e.spec.noise_sigma = cs.noise_levels[static_cast<std::size_t>(index) % cs.noise_levels.size()];
      switch (d) {
        case Difficulty::Easy:
          break;
        case Difficulty::Medium:
          e.spec.pitch = cs.medium_pitch;
          e.spec.line_width = cs.medium_line_width;
          break;
        case Difficulty::Hard:
          e.spec.pattern = k % 2 == 0 ? Pattern::Elbows : Pattern::Serpentine;
          break;
        case Difficulty::Extreme:
          e.spec.pattern = k % 2 == 0 ? Pattern::Elbows : Pattern::Serpentine;
          e.spec.process_bias = cs.extreme_bias;
          e.spec.defocus_extra_blur = cs.extreme_defocus;
          break;
      }
      char buf[32];
      std::snprintf(buf, sizeof buf, "%s_%04d", split == "test" ? to_string(d).c_str() : split.c_str(), index);
      e.id = buf;
      e.spec.validate();
      out.push_back(std::move(e));
    }
  };
  add("train", Difficulty::Easy, cs.train);
  add("val", Difficulty::Easy, cs.val);
  add("test", Difficulty::Easy, cs.test_easy);
  add("test", Difficulty::Medium, cs.test_medium);
  add("test", Difficulty::Hard, cs.test_hard);
  add("test", Difficulty::Extreme, cs.test_extreme);
  return out;
}

inline fs::path sample_dir(const fs::path& root, const CorpusEntry& e) { return root / e.split / e.id; }

inline json manifest_json(const CorpusSpec& cs, const std::vector<CorpusEntry>& entries) {
  return json{{"format", "lithoseg-corpus-1"},
              {"seed_base", cs.seed_base},
              {"count", entries.size()},
              {"samples", entries}};
}

// Writes <root>/<split>/<id>/{layout,sem,gt}.png + edges.json and
// <root>/manifest.json.
inline std::vector<CorpusEntry> gen_corpus(const fs::path& root, const CorpusSpec& cs) {
  const auto entries = plan_corpus(cs);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) throw IoError("cannot create corpus directory " + root.string());
  for (const auto& e : entries) write_sample(sample_dir(root, e), gen_sample(e.spec));
  write_json(root / "manifest.json", manifest_json(cs, entries));
  return entries;
}

inline std::vector<CorpusEntry> read_manifest(const fs::path& root) {
  const auto j = read_json(root / "manifest.json");
  return j.at("samples").get<std::vector<CorpusEntry>>();
}

// In-memory view of one corpus sample as read back from disk.
struct LoadedSample {
  CorpusEntry entry;
  GrayImage sem;
  BinaryMask layout;
  BinaryMask gt;
  std::vector<EdgeTrack> edges;
};

inline LoadedSample load_sample(const fs::path& root, const CorpusEntry& e, bool with_edges = false) {
  const auto dir = sample_dir(root, e);
  LoadedSample s{e, img::load_image(dir / "sem.png"), img::load_mask(dir / "layout.png"),
                 img::load_mask(dir / "gt.png"), {}};
  if (with_edges) s.edges = edges_from_json(read_json(dir / "edges.json"));
  return s;
}

}  // namespace lithoseg::synth
