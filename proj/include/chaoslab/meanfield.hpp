#pragma once

// Mean-field equation on the torus,
//
//   d/dt f = div[ (a*f) grad f - (b*f) f ],
//
// discretized on a uniform periodic grid. Convolutions with the kernel are
// exact in Fourier space (the kernel is a trigonometric polynomial); the
// stiff part lambda_max * Laplacian is integrated exactly per Fourier mode,
// the remainder div[(a*f - lambda_max Id) grad f - (b*f) f] explicitly.

#include "chaoslab/fft.hpp"
#include "chaoslab/kernel.hpp"

#include <complex>
#include <span>
#include <vector>

namespace chaoslab {

struct PeriodicGrid {
  int dimension = 1;
  int points = 64;  // per axis, power of two

  double spacing() const { return 1.0 / points; }
  double cell_volume() const { return std::pow(spacing(), dimension); }
  std::size_t size() const;
  /// Coordinates of node `index` (row-major, last axis fastest).
  std::array<double, kMaxDim> node(std::size_t index) const;

  friend bool operator==(const PeriodicGrid&, const PeriodicGrid&) = default;
};

/// Throws PreconditionError unless d in {1,2} and n is a power of two >= 4.
PeriodicGrid make_grid(int dimension, int points);

struct DensityField {
  PeriodicGrid grid;
  std::vector<double> values;
  double time = 0.0;

  double mass() const;
  double min_value() const;
  /// Quadrature of f log f (0 log 0 = 0).
  double entropy() const;
};

/// 1 + sum_k amplitude * cos(2 pi k.v + phase).
struct CosineMode {
  WaveVector wave{};
  double amplitude = 0.0;
  double phase = 0.0;
};

struct InitialProfile {
  int dimension = 1;
  std::vector<CosineMode> modes;

  double operator()(std::span<const double> v) const;
  /// Closed-form lower bound 1 - sum |amplitude|.
  double lower_bound() const;
};

/// Throws PreconditionError unless sum |amplitude| <= 0.5 and wave vectors are nonzero.
void validate_profile(const InitialProfile& profile);
/// Samples the profile at the grid nodes and rescales to unit quadrature mass.
DensityField discretize(const InitialProfile& profile, const PeriodicGrid& grid);

struct ConvolvedFields {
  PeriodicGrid grid;
  std::vector<double> a;      // size * d * d, row-major per node
  std::vector<double> b;      // size * d
  std::vector<double> div_b;  // size

  Mat a_at(std::size_t node) const;
  Vec b_at(std::size_t node) const;
};

/// Periodic convolutions a*f, b*f, (div b)*f at the grid nodes.
/// Rejects grids with fewer than 4 * (max kernel wave number) points per axis.
ConvolvedFields convolve(const KernelField& kernel, const DensityField& f);

struct StepReport {
  double mass_correction = 0.0;  // |mass - 1| before re-projection
  std::size_t clamped = 0;       // nodes in [-1e-10, 0) set to 0
};

class MeanFieldSolver {
 public:
  MeanFieldSolver(KernelField kernel, PeriodicGrid grid);

  const KernelField& kernel() const { return kernel_; }
  const PeriodicGrid& grid() const { return grid_; }

  ConvolvedFields convolve(const DensityField& f) const;

  /// min( h^2 / (2 d (lambda_max - lambda_min)), h / max|b*f| ).
  double stability_limit(const DensityField& f) const;

  /// One step of size dt. Throws StabilityError if dt exceeds the stability
  /// limit or a node drops below -1e-10.
  DensityField step(const DensityField& f, double dt, StepReport* report = nullptr) const;

  /// Integrates to `horizon` with steps of at most dt, landing exactly on the
  /// requested snapshot times (sorted, within [0, horizon]). An empty list
  /// means a single snapshot at the horizon. If dt exceeds the stability limit
  /// the step is reduced to it.
  std::vector<DensityField> solve(const DensityField& f0, double horizon, double dt,
                                  std::span<const double> snapshot_times = {}) const;

  /// Spectral gradient, d arrays of grid size.
  std::vector<std::vector<double>> gradient(const DensityField& f) const;

 private:
  KernelField kernel_;
  PeriodicGrid grid_;
  SpectralTransform transform_;
  // Per kernel term: cos / sin of 2 pi k.v at every node.
  std::vector<std::vector<double>> node_cos_;
  std::vector<std::vector<double>> node_sin_;
};

/// max_v |grad f / f| of the trigonometric interpolant of f (continuous
/// maximum, refined beyond the grid). Throws PreconditionError if min f <= 0.
double log_gradient_bound(const DensityField& f);

/// Fourier coefficient int f(w) exp(-2 pi i k.w) dw by grid quadrature.
std::complex<double> fourier_coefficient(const DensityField& f, const WaveVector& wave);

}  // namespace chaoslab
