#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lithoseg/coarse/bootstrap.hpp"
#include "lithoseg/coarse/segmenter.hpp"
#include "lithoseg/fine/refine.hpp"
#include "lithoseg/metrics/evaluate.hpp"
#include "lithoseg/rng.hpp"
#include "lithoseg/synthgen/corpus.hpp"

namespace lithoseg::cli {

class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& what) : Error(key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct FineTrainOptions {
  int epochs = 20;
  double learning_rate = 1e-3;
  int batch_size = 256;
  double weight_decay = 1e-4;
  std::size_t max_profiles = 40000;
};

struct AblateOptions {
  std::vector<double> angles{0.0, 2.0, 5.0, 10.0};
  std::vector<double> scan_factors{0.66, 2.0};
  std::vector<double> noise_rates{0.0, 0.1, 0.2, 0.3};
};

struct ReviewOptions {
  std::string ui_dir = "review-ui/dist";
  std::string host = "127.0.0.1";
  int port = 8765;
};

struct Config {
  std::uint64_t seed = 1;
  synth::CorpusSpec corpus{};
  coarse::BootstrapConfig bootstrap{};
  coarse::ClassicalOptions classical{};
  coarse::PatchMlpOptions patch{};
  fine::RefineConfig refine{};
  FineTrainOptions fine_train{};
  metrics::EvalOptions eval{};
  AblateOptions ablate{};
  ReviewOptions review{};

  // Seeds of every random stream, all derived from `seed`.
  std::uint64_t stream_seed(const std::string& stream) const {
    std::uint64_t s = seed;
    for (unsigned char c : stream) s = s * 1099511628211ULL ^ c;
    return splitmix64(s);
  }
  std::uint64_t corpus_seed_base() const { return 1000 * seed; }

  void apply_seeds() {
    corpus.seed_base = corpus_seed_base();
    bootstrap.noise_seed = stream_seed("curation-noise");
    patch.init_seed = stream_seed("patch-init");
    patch.sample_seed = stream_seed("patch-sample");
    patch.train.seed = stream_seed("patch-train");
  }

  nn::TrainConfig fine_train_config() const {
    nn::TrainConfig tc;
    tc.epochs = fine_train.epochs;
    tc.learning_rate = fine_train.learning_rate;
    tc.batch_size = fine_train.batch_size;
    tc.optimizer.weight_decay = fine_train.weight_decay;
    tc.seed = stream_seed("fine-train");
    return tc;
  }
  std::uint64_t fine_init_seed() const { return stream_seed("fine-init"); }
  std::uint64_t profile_seed() const { return stream_seed("fine-profiles"); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops `#` comments outside double quotes and unquotes values so the
// result is plain INI.
inline std::string to_ini(const std::string& text) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    bool quoted = false;
    std::string kept;
    for (char c : line) {
      if (c == '"') quoted = !quoted;
      if (c == '#' && !quoted) break;
      kept += c;
    }
    kept = trim(kept);
    if (const auto eq = kept.find('='); eq != std::string::npos && kept.front() != '[') {
      std::string value = trim(kept.substr(eq + 1));
      if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
      kept = trim(kept.substr(0, eq)) + " = " + value;
    }
    out << kept << "\n";
  }
  return out.str();
}

inline std::vector<std::string> split_list(const std::string& key, const std::string& v) {
  const std::string t = trim(v);
  if (t.size() < 2 || t.front() != '[' || t.back() != ']') throw ConfigError(key, "expected a list like [1, 2]");
  std::vector<std::string> items;
  std::stringstream ss(t.substr(1, t.size() - 2));
  std::string item;
  while (std::getline(ss, item, ','))
    if (!trim(item).empty()) items.push_back(trim(item));
  return items;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream in(trim(v));
  T out{};
  in >> out;
  if (!in || !in.eof()) throw ConfigError(key, "cannot parse '" + v + "' as a number");
  return out;
}

// Shortest decimal form that reads back to the same double.
inline std::string fmt_double(double v) {
  for (int p = 6;; ++p) {
    std::ostringstream o;
    o.precision(p);
    o << v;
    if (std::stod(o.str()) == v || p >= 17) return o.str();
  }
}

}  // namespace detail

// Table of every config key: how to read it from text and how to render it.
class ConfigSchema {
 public:
  struct Field {
    std::string key;  // section.name
    std::function<void(Config&, const std::string&)> set;
    std::function<std::string(const Config&)> get;
  };

  static const std::vector<Field>& fields() {
    static const std::vector<Field> f = build();
    return f;
  }

 private:
  template <class Ref>
  static Field num_at(std::string key, Ref ref) {
    using T = std::remove_reference_t<decltype(ref(std::declval<Config&>()))>;
    Field f;
    f.key = key;
    f.set = [ref, key](Config& c, const std::string& v) {
      if constexpr (std::is_same_v<T, bool>) {
        const std::string t = detail::trim(v);
        if (t == "true")
          ref(c) = true;
        else if (t == "false")
          ref(c) = false;
        else
          throw ConfigError(key, "expected true or false");
      } else {
        ref(c) = detail::parse_number<T>(key, v);
      }
    };
    f.get = [ref](const Config& c) -> std::string {
      const T& v = ref(const_cast<Config&>(c));
      if constexpr (std::is_same_v<T, bool>)
        return v ? "true" : "false";
      else if constexpr (std::is_floating_point_v<T>)
        return detail::fmt_double(v);
      else
        return std::to_string(v);
    };
    return f;
  }

  template <class Ref>
  static Field list_at(std::string key, Ref ref) {
    Field f;
    f.key = key;
    f.set = [ref, key](Config& c, const std::string& v) {
      auto& out = ref(c);
      out.clear();
      for (const auto& item : detail::split_list(key, v))
        out.push_back(detail::parse_number<typename std::remove_reference_t<decltype(out)>::value_type>(key, item));
    };
    f.get = [ref](const Config& c) {
      std::string s = "[";
      const auto& v = ref(const_cast<Config&>(c));
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        if constexpr (std::is_floating_point_v<typename std::remove_reference_t<decltype(v)>::value_type>)
          s += detail::fmt_double(v[i]);
        else
          s += std::to_string(v[i]);
      }
      return s + "]";
    };
    return f;
  }

  static std::vector<Field> build() {
    std::vector<Field> f;
    f.push_back(num_at("run.seed", [](Config& c) -> auto& { return c.seed; }));

    auto spec = [](Config& c) -> synth::SynthSpec& { return c.corpus.base; };
    f.push_back(num_at("synth.image_size", [=](Config& c) -> auto& { return spec(c).image_size; }));
    {
      Field p;
      p.key = "synth.pattern";
      p.set = [](Config& c, const std::string& v) { c.corpus.base.pattern = synth::pattern_from_string(detail::trim(v)); };
      p.get = [](const Config& c) { return "\"" + synth::to_string(c.corpus.base.pattern) + "\""; };
      f.push_back(p);
    }
    f.push_back(num_at("synth.pitch", [=](Config& c) -> auto& { return spec(c).pitch; }));
    f.push_back(num_at("synth.line_width", [=](Config& c) -> auto& { return spec(c).line_width; }));
    f.push_back(num_at("synth.roughness_sigma", [=](Config& c) -> auto& { return spec(c).roughness_sigma; }));
    f.push_back(num_at("synth.roughness_corr_len", [=](Config& c) -> auto& { return spec(c).roughness_corr_len; }));
    f.push_back(num_at("synth.bloom_width", [=](Config& c) -> auto& { return spec(c).bloom_width; }));
    f.push_back(num_at("synth.bloom_gain", [=](Config& c) -> auto& { return spec(c).bloom_gain; }));
    f.push_back(num_at("synth.blur_sigma", [=](Config& c) -> auto& { return spec(c).blur_sigma; }));
    f.push_back(num_at("synth.noise_sigma", [=](Config& c) -> auto& { return spec(c).noise_sigma; }));
    f.push_back(num_at("synth.vertical_contrast", [=](Config& c) -> auto& { return spec(c).vertical_contrast; }));
    f.push_back(num_at("synth.process_bias", [=](Config& c) -> auto& { return spec(c).process_bias; }));
    f.push_back(num_at("synth.defocus_extra_blur", [=](Config& c) -> auto& { return spec(c).defocus_extra_blur; }));
    f.push_back(list_at("synth.orientations", [](Config& c) -> auto& { return c.corpus.orientations; }));
    f.push_back(list_at("synth.noise_levels", [](Config& c) -> auto& { return c.corpus.noise_levels; }));
    f.push_back(num_at("synth.train", [](Config& c) -> auto& { return c.corpus.train; }));
    f.push_back(num_at("synth.val", [](Config& c) -> auto& { return c.corpus.val; }));
    f.push_back(num_at("synth.test_easy", [](Config& c) -> auto& { return c.corpus.test_easy; }));
    f.push_back(num_at("synth.test_medium", [](Config& c) -> auto& { return c.corpus.test_medium; }));
    f.push_back(num_at("synth.test_hard", [](Config& c) -> auto& { return c.corpus.test_hard; }));
    f.push_back(num_at("synth.test_extreme", [](Config& c) -> auto& { return c.corpus.test_extreme; }));
    f.push_back(num_at("synth.medium_pitch", [](Config& c) -> auto& { return c.corpus.medium_pitch; }));
    f.push_back(num_at("synth.medium_line_width", [](Config& c) -> auto& { return c.corpus.medium_line_width; }));
    f.push_back(num_at("synth.extreme_bias", [](Config& c) -> auto& { return c.corpus.extreme_bias; }));
    f.push_back(num_at("synth.extreme_defocus", [](Config& c) -> auto& { return c.corpus.extreme_defocus; }));

    f.push_back(num_at("coarse.iterations", [](Config& c) -> auto& { return c.bootstrap.iterations; }));
    f.push_back(num_at("coarse.epochs_per_iter", [](Config& c) -> auto& { return c.bootstrap.epochs_per_iter; }));
    {
      Field p;
      p.key = "coarse.curation";
      p.set = [](Config& c, const std::string& v) {
        const std::string t = detail::trim(v);
        if (t == "oracle")
          c.bootstrap.curation = coarse::CurationMode::Oracle;
        else if (t == "human")
          c.bootstrap.curation = coarse::CurationMode::Human;
        else
          throw ConfigError("coarse.curation", "expected oracle or human");
      };
      p.get = [](const Config& c) {
        return std::string(c.bootstrap.curation == coarse::CurationMode::Oracle ? "\"oracle\"" : "\"human\"");
      };
      f.push_back(p);
    }
    f.push_back(num_at("coarse.iou_threshold", [](Config& c) -> auto& { return c.bootstrap.iou_threshold; }));
    f.push_back(
        num_at("coarse.noise_injection_rate", [](Config& c) -> auto& { return c.bootstrap.noise_injection_rate; }));
    f.push_back(
        num_at("coarse.allow_partial_review", [](Config& c) -> auto& { return c.bootstrap.allow_partial_review; }));
    f.push_back(num_at("coarse.box_min_area", [](Config& c) -> auto& { return c.bootstrap.boxes.min_area; }));
    f.push_back(num_at("coarse.box_margin", [](Config& c) -> auto& { return c.bootstrap.boxes.margin; }));
    f.push_back(num_at("coarse.classical_open_radius", [](Config& c) -> auto& { return c.classical.open_radius; }));
    f.push_back(
        num_at("coarse.classical_min_contrast", [](Config& c) -> auto& { return c.classical.min_class_contrast; }));
    f.push_back(num_at("coarse.patch_radius", [](Config& c) -> auto& { return c.patch.radius; }));
    f.push_back(list_at("coarse.patch_hidden", [](Config& c) -> auto& { return c.patch.hidden; }));
    f.push_back(num_at("coarse.pixels_per_image", [](Config& c) -> auto& { return c.patch.pixels_per_image; }));
    f.push_back(num_at("coarse.learning_rate", [](Config& c) -> auto& { return c.patch.train.learning_rate; }));
    f.push_back(num_at("coarse.batch_size", [](Config& c) -> auto& { return c.patch.train.batch_size; }));
    f.push_back(num_at("coarse.lambda_mix", [](Config& c) -> auto& { return c.patch.train.lambda_mix; }));
    f.push_back(num_at("coarse.open_radius", [](Config& c) -> auto& { return c.patch.open_radius; }));
    f.push_back(num_at("coarse.smooth_radius", [](Config& c) -> auto& { return c.patch.smooth_radius; }));

    f.push_back(num_at("fine.s_scan", [](Config& c) -> auto& { return c.refine.s_scan; }));
    f.push_back(num_at("fine.t_max", [](Config& c) -> auto& { return c.refine.t_max; }));
    f.push_back(num_at("fine.center_window", [](Config& c) -> auto& { return c.refine.center_window; }));
    f.push_back(num_at("fine.align", [](Config& c) -> auto& { return c.refine.align; }));
    f.push_back(num_at("fine.align_smooth_sigma", [](Config& c) -> auto& { return c.refine.align_smooth_sigma; }));
    f.push_back(num_at("fine.orientation_feature", [](Config& c) -> auto& { return c.refine.orientation_feature; }));
    f.push_back(
        num_at("fine.normal_perturbation_deg", [](Config& c) -> auto& { return c.refine.normal_perturbation_deg; }));
    f.push_back(num_at("fine.drop_out_of_bounds", [](Config& c) -> auto& { return c.refine.drop_out_of_bounds; }));
    f.push_back(num_at("fine.arc_spacing", [](Config& c) -> auto& { return c.refine.arc_spacing; }));
    f.push_back(num_at("fine.normal_window", [](Config& c) -> auto& { return c.refine.normal_window; }));
    f.push_back(num_at("fine.label_step", [](Config& c) -> auto& { return c.refine.label_step; }));
    f.push_back(
        num_at("fine.offset_median_window", [](Config& c) -> auto& { return c.refine.offset_median_window; }));
    f.push_back(
        num_at("fine.max_fragment_fraction", [](Config& c) -> auto& { return c.refine.max_fragment_fraction; }));
    f.push_back(num_at("fine.epochs", [](Config& c) -> auto& { return c.fine_train.epochs; }));
    f.push_back(num_at("fine.learning_rate", [](Config& c) -> auto& { return c.fine_train.learning_rate; }));
    f.push_back(num_at("fine.batch_size", [](Config& c) -> auto& { return c.fine_train.batch_size; }));
    f.push_back(num_at("fine.weight_decay", [](Config& c) -> auto& { return c.fine_train.weight_decay; }));
    f.push_back(num_at("fine.max_profiles", [](Config& c) -> auto& { return c.fine_train.max_profiles; }));

    f.push_back(num_at("eval.min_overlap", [](Config& c) -> auto& { return c.eval.min_overlap; }));
    f.push_back(num_at("eval.tau_rel", [](Config& c) -> auto& { return c.eval.esd.tau_rel; }));
    f.push_back(num_at("eval.esd_min_run", [](Config& c) -> auto& { return c.eval.esd.min_run; }));
    f.push_back(num_at("eval.rough_min_run", [](Config& c) -> auto& { return c.eval.rough.min_run; }));

    f.push_back(list_at("ablate.angles", [](Config& c) -> auto& { return c.ablate.angles; }));
    f.push_back(list_at("ablate.scan_factors", [](Config& c) -> auto& { return c.ablate.scan_factors; }));
    f.push_back(list_at("ablate.noise_rates", [](Config& c) -> auto& { return c.ablate.noise_rates; }));

    {
      Field p;
      p.key = "review.ui_dir";
      p.set = [](Config& c, const std::string& v) { c.review.ui_dir = detail::trim(v); };
      p.get = [](const Config& c) { return "\"" + c.review.ui_dir + "\""; };
      f.push_back(p);
    }
    {
      Field p;
      p.key = "review.host";
      p.set = [](Config& c, const std::string& v) { c.review.host = detail::trim(v); };
      p.get = [](const Config& c) { return "\"" + c.review.host + "\""; };
      f.push_back(p);
    }
    f.push_back(num_at("review.port", [](Config& c) -> auto& { return c.review.port; }));
    return f;
  }
};

// Range checks of the assembled config; each failure names its key.
inline void validate(const Config& c) {
  auto wrap = [](const std::string& key, auto&& fn) {
    try {
      fn();
    } catch (const synth::SpecError& e) {
      throw ConfigError("synth." + e.field(), e.what());
    } catch (const DomainError& e) {
      throw ConfigError(key, e.what());
    }
  };
  if (c.seed == 0) throw ConfigError("run.seed", "must be >= 1");
  wrap("synth", [&] {
    c.corpus.base.validate();
    synth::plan_corpus(c.corpus);
  });
  for (double n : c.corpus.noise_levels)
    if (!(n >= 0.0)) throw ConfigError("synth.noise_levels", "entries must be >= 0");
  wrap("coarse", [&] { c.bootstrap.validate(); });
  if (c.patch.radius < 0) throw ConfigError("coarse.patch_radius", "must be >= 0");
  if (c.patch.pixels_per_image < 1) throw ConfigError("coarse.pixels_per_image", "must be >= 1");
  for (int h : c.patch.hidden)
    if (h < 1) throw ConfigError("coarse.patch_hidden", "layer sizes must be >= 1");
  wrap("coarse", [&] {
    nn::TrainConfig t = c.patch.train;
    t.epochs = c.bootstrap.epochs_per_iter;
    t.validate();
  });
  wrap("fine", [&] { c.refine.validate(); });
  wrap("fine", [&] { c.fine_train_config().validate(); });
  if (c.fine_train.max_profiles < 1) throw ConfigError("fine.max_profiles", "must be >= 1");
  if (c.eval.min_overlap < 1) throw ConfigError("eval.min_overlap", "must be >= 1");
  if (!(c.eval.esd.tau_rel > 0.0)) throw ConfigError("eval.tau_rel", "must be > 0");
  for (double f : c.ablate.scan_factors)
    if (!(f > 0.0)) throw ConfigError("ablate.scan_factors", "entries must be > 0");
  for (double r : c.ablate.noise_rates)
    if (r < 0.0 || r > 0.3) throw ConfigError("ablate.noise_rates", "entries must be in [0, 0.3]");
  if (c.review.port < 0 || c.review.port > 65535) throw ConfigError("review.port", "must be in [0, 65535]");
}

// Parses config text. Keys left out keep their defaults; the scan-derived
// defaults (t_max, center_window) follow fine.s_scan unless given.
inline Config parse_config(const std::string& text, std::optional<std::uint64_t> seed_override = std::nullopt) {
  boost::property_tree::ptree tree;
  std::istringstream in(detail::to_ini(text));
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError("config", std::string("syntax error: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  std::map<std::string, std::string> values;
  for (const auto& [section, body] : tree) {
    if (body.empty()) throw ConfigError(section, "keys must live inside a [section]");
    for (const auto& [key, v] : body) values[section + "." + key] = v.data();
  }
  Config c;
  std::map<std::string, const ConfigSchema::Field*> by_key;
  for (const auto& f : ConfigSchema::fields()) by_key[f.key] = &f;
  for (const auto& [key, v] : values)
    if (!by_key.count(key)) throw ConfigError(key, "unknown key");
  if (values.count("fine.s_scan")) {
    by_key["fine.s_scan"]->set(c, values["fine.s_scan"]);
    const auto derived = fine::RefineConfig::from_scan_size(c.refine.s_scan);
    if (c.refine.s_scan % 2 == 0) throw ConfigError("fine.s_scan", "must be odd");
    c.refine.t_max = derived.t_max;
    c.refine.center_window = derived.center_window;
  }
  for (const auto& [key, v] : values) by_key[key]->set(c, v);
  if (seed_override) c.seed = *seed_override;
  c.apply_seeds();
  validate(c);
  return c;
}

inline Config load_config(const std::filesystem::path& path, std::optional<std::uint64_t> seed_override = std::nullopt) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config", "cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), seed_override);
}

// Full rendering of every key; parse_config(render_config(c)) == c.
inline std::string render_config(const Config& c) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : ConfigSchema::fields()) {
    const auto dot = f.key.find('.');
    const std::string s = f.key.substr(0, dot);
    if (s != section) {
      if (!section.empty()) out << "\n";
      out << "[" << s << "]\n";
      section = s;
    }
    out << f.key.substr(dot + 1) << " = " << f.get(c) << "\n";
  }
  return out.str();
}

inline nlohmann::json config_json(const Config& c) {
  nlohmann::json j;
  for (const auto& f : ConfigSchema::fields()) j[f.key] = f.get(c);
  return j;
}

}  // namespace lithoseg::cli
