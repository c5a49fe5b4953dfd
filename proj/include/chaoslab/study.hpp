#pragma once

// Orchestration of the study kinds: runs the modules, checks their
// invariants, and writes CSV/JSON/SVG artifacts plus a manifest.

#include "chaoslab/artifacts.hpp"
#include "chaoslab/config.hpp"

#include <string>
#include <vector>

namespace chaoslab {

inline constexpr const char* kVersion = "0.1.0";

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct StudyOutcome {
  RunManifest manifest;
  std::vector<CheckResult> checks;
  bool passed() const { return manifest.status == "pass"; }
};

/// Runs the configured study. Module errors are caught: the manifest then has
/// status "error" and names the failure point; artifacts written so far stay
/// on disk. Benchmark timings are the only nondeterministic outputs.
StudyOutcome run_study(const StudyConfig& cfg);

}  // namespace chaoslab
