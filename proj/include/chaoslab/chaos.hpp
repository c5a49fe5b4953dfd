#pragma once

#include "chaoslab/kernel.hpp"
#include "chaoslab/meanfield.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace chaoslab {

/// Periodic equal-width histogram on [0,1)^d with `bins` bins per axis.
struct EmpiricalDensity {
  int dimension = 1;
  int bins = 0;
  std::size_t samples = 0;
  std::vector<double> mass;  // per bin, sums to 1

  double bin_volume() const { return std::pow(1.0 / bins, dimension); }
  std::vector<double> density() const;
};

/// Throws PreconditionError on an empty sample set or bins < 4.
EmpiricalDensity histogram(std::span<const double> samples, int dimension, int bins);

/// Exact integrals of the trigonometric interpolant of f over each histogram bin.
std::vector<double> bin_masses(const DensityField& f, int bins);

/// sum |g1 - g2| * cell_volume for two densities on a common grid.
double l1_distance(std::span<const double> g1, std::span<const double> g2, double cell_volume);
/// L1 distance between two histograms (sum of absolute bin-mass differences).
double l1_distance(const EmpiricalDensity& g1, const EmpiricalDensity& g2);

/// Expected L1 distance between an empirical histogram of `samples` i.i.d.
/// draws and the bin masses it estimates (binomial model, normal limit).
double binomial_l1_error(std::span<const double> reference_masses, std::size_t samples);

/// Relative entropy sum p log(p/q) of two mass vectors (0 log 0 = 0).
double discrete_relative_entropy(std::span<const double> p, std::span<const double> q);

struct CkpAudit {
  double l1 = 0.0;
  double bound = 0.0;  // sqrt(2 k H_k)
  bool holds = false;
};

/// Checks ||g1 - g2||_1 <= sqrt(2 k H) + 1e-10.
CkpAudit ckp_audit(double l1, double relative_entropy, int order);
CkpAudit ckp_audit(std::span<const double> g1, std::span<const double> g2, double cell_volume,
                   double relative_entropy, int order);

struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;  // infinite with two points
  std::size_t points = 0;
};

/// Least squares of log(error) on log(n). Needs >= 2 points.
PowerLawFit fit_power_law(std::span<const double> n, std::span<const double> error);

/// Two-sided 95% Student-t quantile.
double student_t_975(std::size_t dof);

struct ChaosRow {
  std::size_t particles = 0;
  std::size_t replicas = 0;
  double horizon = 0.0;
  int bins = 0;
  double l1_error = 0.0;
  double standard_error = 0.0;  // binomial L1 noise floor
  double ckp_bound = -1.0;      // negative when no exact entropy is available
  std::uint64_t seed = 0;
  std::string config_hash;
  bool included = false;
  std::string exclusion_reason;
};

struct ChaosStudyReport {
  std::vector<ChaosRow> rows;
  bool fit_available = false;
  PowerLawFit fit;
  double slope_ci_low = 0.0;
  double slope_ci_high = 0.0;
};

struct ChaosStudyConfig {
  KernelSpec kernel;
  InitialProfile initial;
  std::vector<std::size_t> ladder;
  std::size_t replicas = 2000;
  double horizon = 0.5;
  double particle_dt = 1e-3;
  int pde_points = 128;
  double pde_dt = 1e-4;
  int bins = 32;
  std::uint64_t seed = 1;
  std::string config_hash;
  unsigned workers = 1;
};

/// Number of bins actually used: min(requested, n/2, floor((M N_min)^{1/3})).
int study_bins(const ChaosStudyConfig& cfg);

/// Particle 1-marginals at the horizon versus the mean-field solution for
/// each N of the ladder. Rows enter the fit only if standard_error < l1/3.
ChaosStudyReport marginal_error_study(const ChaosStudyConfig& cfg);

/// Fits the included rows of a report and fills the fit fields.
void fit_report(ChaosStudyReport& report);

/// True when slope in [low, high] and a fit exists.
bool slope_within(const ChaosStudyReport& report, double low, double high);
/// Control criterion: no fit (rows excluded by the budget rule) or a 95%
/// slope interval reaching values >= threshold.
bool no_significant_trend(const ChaosStudyReport& report, double threshold = -0.2);

struct EntropySeries {
  int particles = 2;
  std::vector<double> times;
  std::vector<double> entropy;  // H_N(t)
};

struct NhReport {
  std::vector<double> max_scaled;  // max_t N H_N(t) per series
  std::vector<double> initial;     // H_N(0) per series
  double envelope_ratio = 0.0;     // max / min of max_scaled
  double c1 = 0.0;                 // fitted N H_N(t) ~ c1 exp(c2 t)
  double c2 = 0.0;
  bool initial_ok = false;  // all H_N(0) <= 1e-10
  bool finite = false;
  bool nonnegative = false;  // all H_N(t) >= -1e-10
};

NhReport nh_boundedness_check(std::span<const EntropySeries> series);

}  // namespace chaoslab
