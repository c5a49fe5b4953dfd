// chaoslab <subcommand> --config <path> [--seed u64] [--out dir] [--workers k]
//
// Exit codes: 0 all checks passed, 1 invariant failure or module error,
// 2 configuration error.

#include "chaoslab/config.hpp"
#include "chaoslab/study.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace chaoslab;
  CLI::App app{"mean-field / propagation-of-chaos workbench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<unsigned> workers;
  bool dry = false;

  for (auto kind : {StudyKind::kPdeSolve, StudyKind::kParticlesRun, StudyKind::kLiouvilleRun, StudyKind::kChaosStudy,
                    StudyKind::kVerifyInequalities, StudyKind::kBenchForces}) {
    auto* sub = app.add_subcommand(to_string(kind));
    sub->add_option("--config", config_path, "study configuration (TOML)")->required();
    sub->add_option("--seed", seed, "master seed (overrides the file)");
    sub->add_option("--out", out, "output directory (overrides the file)");
    sub->add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--dry-run", dry, "validate the configuration and stop");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const auto kind = study_kind_from(app.get_subcommands().front()->get_name());
  ConfigOverrides overrides;
  overrides.seed = seed;
  if (out) overrides.output = *out;
  overrides.workers = workers;

  StudyConfig cfg;
  try {
    cfg = load_config(config_path, kind, overrides);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  if (dry) {
    std::cout << "configuration ok (" << to_string(cfg.kind) << ", hash " << cfg.hash << ")\n";
    return 0;
  }

  StudyOutcome outcome;
  try {
    outcome = run_study(cfg);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  for (const auto& c : outcome.checks)
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : "  (" + c.detail + ")") << "\n";
  std::cout << "status: " << outcome.manifest.status;
  if (!outcome.manifest.failure_point.empty()) std::cout << "  [" << outcome.manifest.failure_point << "]";
  std::cout << "\nartifacts: " << cfg.output.string() << "\n";
  return outcome.passed() ? 0 : 1;
}
