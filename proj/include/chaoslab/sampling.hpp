#pragma once

#include "chaoslab/meanfield.hpp"
#include "chaoslab/rng.hpp"

#include <span>
#include <vector>

namespace chaoslab {

/// Draws i.i.d. points from a grid density. The density between nodes is the
/// periodic piecewise-linear (d=1) or bilinear (d=2) interpolant, whose mass
/// equals the node quadrature mass exactly. d=1 uses exact inverse-CDF
/// sampling; d=2 uses rejection against the maximum node value.
class DensitySampler {
 public:
  explicit DensitySampler(const DensityField& density);

  int dimension() const { return grid_.dimension; }

  /// Inverse CDF of the 1D interpolant at u in [0,1].
  double inverse_cdf(double u) const;

  /// One point into out[0..d) drawn from the stream `addr`. Draw indices
  /// start at `first_index`; returns the number of indices consumed.
  std::uint32_t sample(const rng::StreamAddress& addr, std::uint32_t first_index,
                       std::span<double> out) const;

 private:
  double interpolate(double x, double y) const;

  PeriodicGrid grid_;
  std::vector<double> values_;
  std::vector<double> cumulative_;  // d = 1: mass below node j, size n + 1
  double max_value_ = 0.0;
};

}  // namespace chaoslab
