#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "lithoseg/cli/stages.hpp"
#include "lithoseg/cli/review.hpp"

namespace {

using namespace lithoseg;
using namespace lithoseg::cli;

struct Options {
  std::string config;
  std::string run_dir = "run";
  bool force = false;
  int port = -1;
  std::uint64_t seed = 0;
  std::string ablation = "all";
  std::string ui_dir;
};

int exit_for(const StageOutcome& o) {
  std::cout << "status: " << to_string(o.status);
  if (!o.message.empty()) std::cout << " (" << o.message << ")";
  std::cout << "\n";
  return 0;
}

int dispatch(const std::string& cmd, const Options& opt) {
  const std::optional<fs::path> config = opt.config.empty() ? std::nullopt : std::optional<fs::path>(opt.config);
  const std::optional<std::uint64_t> seed = opt.seed ? std::optional(opt.seed) : std::nullopt;
  if (cmd == "ablate") expand_ablation(opt.ablation);
  Run run = Run::open(opt.run_dir, config, seed, opt.force);

  if (cmd == "synth") return exit_for(run.run_stage("synth", opt.force, stage_synth));
  if (cmd == "bootstrap")
    return exit_for(run.run_stage("bootstrap", opt.force, [&](Run& r) { return stage_bootstrap(r, opt.force); }));
  if (cmd == "fine-train") return exit_for(run.run_stage("fine-train", opt.force, stage_fine_train));
  if (cmd == "refine") return exit_for(run.run_stage("refine", opt.force, stage_refine));
  if (cmd == "eval") return exit_for(run.run_stage("eval", opt.force, stage_eval));
  if (cmd == "ablate") {
    for (const auto& name : expand_ablation(opt.ablation))
      exit_for(run.run_stage("ablate:" + name, opt.force, [&](Run& r) { return stage_ablate(r, name); }));
    return 0;
  }
  if (cmd == "review-serve") {
    int port = run.config().review.port;
    if (const char* env = std::getenv("LITHOSEG_PORT")) {
      try {
        port = std::stoi(env);
      } catch (const std::exception&) {
        throw ConfigError("LITHOSEG_PORT", "not a port number");
      }
    }
    if (opt.port >= 0) port = opt.port;
    if (port < 0 || port > 65535) throw ConfigError("port", "must be in [0, 65535]");
    const fs::path ui = opt.ui_dir.empty() ? fs::path(run.config().review.ui_dir) : fs::path(opt.ui_dir);
    return serve_review(run, run.config().review.host, port, ui);
  }
  throw ConfigError("command", "unknown command " + cmd);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lithoseg: coarse-to-fine segmentation of SEM line patterns"};
  app.require_subcommand(1);
  app.fallthrough();
  Options opt;
  app.add_option("--config", opt.config, "config file (TOML-style sections); defaults to <run-dir>/config.toml");
  app.add_option("--run-dir", opt.run_dir, "run directory")->capture_default_str();
  app.add_flag("--force", opt.force, "rerun a stage that is already done");
  app.add_option("--port", opt.port, "review-serve port (overrides LITHOSEG_PORT and review.port)");
  app.add_option("--seed", opt.seed, "master seed (overrides run.seed)")->check(CLI::PositiveNumber);

  const std::vector<std::pair<std::string, std::string>> cmds{
      {"synth", "generate the synthetic corpus"},
      {"bootstrap", "run the coarse bootstrapping loop"},
      {"fine-train", "train the contour refinement regressor"},
      {"refine", "refine coarse masks of the validation and test splits"},
      {"eval", "score coarse and refined masks against ground truth"},
      {"ablate", "run ablation grids: center, angle, scan, noise or all"},
      {"review-serve", "serve the human curation API"}};
  for (const auto& [name, help] : cmds) {
    auto* sub = app.add_subcommand(name, help);
    if (name == "ablate") sub->add_option("which", opt.ablation, "center | angle | scan | noise | all")->capture_default_str();
    if (name == "review-serve") sub->add_option("--ui-dir", opt.ui_dir, "directory of the built review UI");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    return dispatch(cmd, opt);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const MissingArtifact& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
}
