#pragma once

// Study configuration: a TOML subset (tables, arrays of tables, strings,
// numbers, booleans, arrays, inline tables) lowered to JSON, then validated
// against a fixed schema.

#include "chaoslab/kernel.hpp"
#include "chaoslab/meanfield.hpp"
#include "chaoslab/particles.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chaoslab {

/// Malformed or invalid configuration. Carries every issue found.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

/// Parses the TOML subset. Throws ConfigError with a line number on syntax errors.
nlohmann::json parse_toml(std::string_view text);

/// Levenshtein distance, used for "did you mean" hints.
std::size_t edit_distance(std::string_view a, std::string_view b);

enum class StudyKind { kPdeSolve, kParticlesRun, kLiouvilleRun, kChaosStudy, kVerifyInequalities, kBenchForces };

std::string to_string(StudyKind kind);
std::optional<StudyKind> study_kind_from(std::string_view name);

struct PdeSettings {
  int points = 128;
  double dt = 1e-4;
  double horizon = 0.1;
  std::vector<double> snapshots;
};

struct ParticleSettings {
  std::size_t count = 128;
  std::size_t replicas = 1000;
  double dt = 1e-3;
  double horizon = 0.5;
  std::vector<double> snapshots;
  ForceMethod method = ForceMethod::kSpectral;
  double drift_factor = 2.0;
  bool compare_pde = true;
  int pde_points = 128;
  double pde_dt = 1e-4;
  int bins = 32;
  double max_l1 = 0.05;
};

struct LiouvilleSettings {
  int particles = 2;
  int points = 64;
  double dt = 1e-4;
  double horizon = 0.25;
  int snapshots = 11;  // equally spaced, including 0 and the horizon
  double pde_dt = 1e-4;
};

struct ChaosSettings {
  std::vector<std::size_t> ladder{8, 32, 128, 512};
  std::size_t replicas = 2000;
  double horizon = 0.5;
  double particle_dt = 1e-3;
  int pde_points = 128;
  double pde_dt = 1e-4;
  int bins = 32;
  double slope_low = -1.2;
  double slope_high = -0.3;
  bool control = true;
};

struct InequalitySettings {
  std::size_t instances = 1000;
  int max_outcomes = 5;
  int max_particles = 4;
  std::vector<std::size_t> moment_ladder{10, 100, 1000, 10000};
  std::size_t moment_samples = 100000;
  int pde_points = 64;
  bool negative_control = true;
};

struct BenchSettings {
  std::size_t particles = 10000;
  std::vector<std::size_t> check_sizes{2, 16, 256};
  std::size_t check_states = 100;
  int repeats = 3;
  double min_speedup = 10.0;
};

struct StudyConfig {
  StudyKind kind = StudyKind::kPdeSolve;
  KernelSpec kernel;
  InitialProfile initial;
  std::uint64_t seed = 1;
  std::filesystem::path output = "out";
  unsigned workers = 1;

  PdeSettings pde;
  ParticleSettings particles;
  LiouvilleSettings liouville;
  ChaosSettings chaos;
  InequalitySettings inequalities;
  BenchSettings bench;

  /// Effective configuration (defaults filled in, overrides applied), without
  /// output path and worker count, which do not influence results.
  nlohmann::json canonical;
  /// SHA-256 of canonical.dump().
  std::string hash;
};

struct ConfigOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> output;
  std::optional<unsigned> workers;
};

/// Validates a parsed document. `expected` (e.g. from the CLI subcommand)
/// fixes the study kind; a conflicting `study` key is an error.
StudyConfig config_from_json(const nlohmann::json& doc, std::optional<StudyKind> expected = {},
                             const ConfigOverrides& overrides = {});

/// Reads, parses and validates a file. All problems are collected into one ConfigError.
StudyConfig load_config(const std::filesystem::path& path, std::optional<StudyKind> expected = {},
                        const ConfigOverrides& overrides = {});

/// Module preconditions checked before launch (kernel certificate, grids,
/// step sizes). Throws ConfigError.
void dry_run(const StudyConfig& cfg);

}  // namespace chaoslab
