#pragma once

// Liouville equation for the joint law f_N of N particles in d = 1:
//
//   d/dt f_N = sum_i d/dv^i [ A_i(V) d/dv^i f_N - B_i(V) f_N ],
//   A_i = (1/N) sum_{j != i} a(v^i - v^j),  B_i = (1/N) sum_{j != i} b(v^i - v^j),
//
// solved on an n^N periodic grid (N = 2, 3) in divergence form with spectral
// derivatives, so the discrete mass is conserved to round-off. Time stepping
// mirrors the mean-field solver: exact decay for c Laplacian with
// c = lambda_max (N-1)/N >= A_i, the remainder explicit.

#include "chaoslab/kernel.hpp"
#include "chaoslab/meanfield.hpp"

#include <span>
#include <vector>

namespace chaoslab {

struct LiouvilleDensity {
  int particles = 2;
  int points = 64;
  std::vector<double> values;  // axis 0 (particle 1) slowest
  double time = 0.0;

  double spacing() const { return 1.0 / points; }
  double cell_volume() const { return std::pow(spacing(), particles); }
  std::size_t size() const { return values.size(); }
  double mass() const;
  /// Quadrature of f_N log f_N (unnormalized by N).
  double entropy() const;
};

/// Terms of the relative-entropy balance dH_N/dt = I1 + I2 + I3 at one time.
struct EntropyBalance {
  double i1 = 0.0;
  double i2 = 0.0;
  double i3 = 0.0;
  double dissipation = 0.0;       // -I1
  double relative_fisher = 0.0;   // (1/N) sum_i int f_N |d_i log(f_N / f^N)|^2
  double i1_upper_bound = 0.0;    // -lambda_min (N-1)/N * relative_fisher

  double total() const { return i1 + i2 + i3; }
};

class LiouvilleSolver {
 public:
  LiouvilleSolver(KernelField kernel, int particles, int points);

  int particles() const { return particles_; }
  int points() const { return points_; }
  const KernelField& kernel() const { return kernel_; }
  /// Coefficient of the implicitly treated Laplacian.
  double implicit_diffusivity() const { return implicit_; }

  /// Advective limit h / max|B_i|.
  double stability_limit() const;

  /// Throws StabilityError when a node drops below -1e-10.
  LiouvilleDensity step(const LiouvilleDensity& f, double dt, StepReport* report = nullptr) const;

  /// Same snapshot semantics as MeanFieldSolver::solve.
  std::vector<LiouvilleDensity> solve(const LiouvilleDensity& f0, double horizon, double dt,
                                      std::span<const double> snapshot_times = {}) const;

  std::vector<std::vector<double>> gradient(const LiouvilleDensity& f) const;

  /// sum_i int A_i (d_i f)^2 / f.
  double fisher_information(const LiouvilleDensity& f) const;
  /// sum_i int f (1/N) sum_{j != i} div b(v^i - v^j).
  double div_b_moment(const LiouvilleDensity& f) const;

  /// Entropy-solution residual at every snapshot:
  ///   S(t) + int_0^t [Fisher + div-b moment] - S(0),
  /// time integral by the trapezoid rule over the given snapshots.
  std::vector<double> entropy_residuals(std::span<const LiouvilleDensity> trajectory) const;

  /// I1, I2, I3 of the relative-entropy balance against the tensorized
  /// mean-field density f (same grid). Throws PreconditionError on
  /// nonpositive inputs.
  EntropyBalance balance_terms(const LiouvilleDensity& fN, const DensityField& f) const;

 private:
  KernelField kernel_;
  int particles_;
  int points_;
  double implicit_;
  SpectralTransform transform_;
  std::vector<std::vector<double>> a_;  // per axis, per node: A_i
  std::vector<std::vector<double>> b_;  // per axis, per node: B_i
  std::vector<double> div_b_;           // per node: sum_i (1/N) sum_{j != i} div b
};

/// f^{tensor N} on the grid of f (d = 1).
LiouvilleDensity tensor_power(const DensityField& f, int particles);

/// k-particle marginal by quadrature over the trailing N - k axes.
LiouvilleDensity marginal(const LiouvilleDensity& f, int k);

/// A one-particle Liouville density as a 1D DensityField.
DensityField as_density(const LiouvilleDensity& one_particle);

/// H_N(f_N | f^N) = (1/N) int f_N log(f_N / f^N), with 0 log 0 = 0.
/// Throws PreconditionError if f has a nonpositive node.
double relative_entropy(const LiouvilleDensity& fN, const DensityField& f);

/// Exchanges particle axes i and j.
LiouvilleDensity swap_axes(const LiouvilleDensity& f, int i, int j);

}  // namespace chaoslab
