#pragma once

// Interaction kernels on the unit torus [0,1)^d:
//
//   a(z) = base_level * Id + sum_k A_k cos(2 pi k.z)
//   b(z) = div a(z)       = sum_k (-2 pi A_k k) sin(2 pi k.z)
//   div b(z)              = sum_k (-4 pi^2 k.A_k k) cos(2 pi k.z)
//
// All three are exact trigonometric polynomials, so b is the analytic
// divergence of a and no numerical differentiation is involved anywhere.

#include "chaoslab/types.hpp"

#include <span>
#include <vector>

namespace chaoslab {

struct KernelMode {
  WaveVector wave{};  // only the first `dimension` entries are used
  Mat coeff;          // symmetric d x d
};

struct KernelSpec {
  int dimension = 1;
  double base_level = 1.0;
  std::vector<KernelMode> modes;
};

/// One cosine mode with its derived divergence coefficients.
struct KernelTerm {
  WaveVector wave{};
  Vec angular;         // 2 pi k
  Mat coeff;           // A_k
  Vec b_coeff;         // -2 pi A_k k   (multiplies sin)
  double div_b_coeff;  // -4 pi^2 k.A_k k (multiplies cos)
};

struct BoundsScan {
  double min_observed = 0.0;
  double max_observed = 0.0;
  bool within_certificate = false;
};

class KernelField {
 public:
  int dimension() const { return dim_; }
  double base_level() const { return base_level_; }
  /// Certified lower/upper eigenvalue bounds of a(z) over the torus.
  double lambda_min() const { return lambda_min_; }
  double lambda_max() const { return lambda_max_; }
  const std::vector<KernelTerm>& terms() const { return terms_; }
  const KernelSpec& spec() const { return spec_; }
  /// Largest |k_i| over all modes (0 for constant kernels).
  int max_wave_number() const { return max_wave_; }
  /// a(0) = base_level Id + sum_k A_k, the true kernel value at the origin.
  Mat a_at_origin() const;

  Mat eval_a(std::span<const double> z) const;
  Vec eval_b(std::span<const double> z) const;
  double eval_div_b(std::span<const double> z) const;

 private:
  friend KernelField build_kernel(const KernelSpec& spec);
  KernelField() = default;

  KernelSpec spec_;
  int dim_ = 1;
  double base_level_ = 1.0;
  double lambda_min_ = 1.0;
  double lambda_max_ = 1.0;
  int max_wave_ = 0;
  std::vector<KernelTerm> terms_;
};

/// Validates the spec and certifies ellipticity. Throws KernelError when
/// base_level - sum_k ||A_k||_2 <= 0 or a coefficient is not symmetric.
KernelField build_kernel(const KernelSpec& spec);

/// Scans eig(a(z)) on a uniform grid_n^d grid. Requires grid_n >= 2 * max wave + 1.
BoundsScan certify_bounds(const KernelField& field, int grid_n);

/// The reference kernel used throughout the tests: d = 1, a(z) = 1 + 0.5 cos(2 pi z).
KernelSpec canonical_kernel_spec();
/// a = lambda * Id in dimension d.
KernelSpec constant_kernel_spec(int dimension, double lambda);

}  // namespace chaoslab
