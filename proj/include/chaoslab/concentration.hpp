#pragma once

// Executable checks of the two concentration facts behind the entropy
// estimate:
//
//  * change of measure: for probability vectors p (joint, on s^N outcomes) and
//    q (one-particle), any bounded Phi and eta > 0,
//        sum p Phi <= (1/eta) ( H_N(p | q^N) + (1/N) log sum q^N exp(N eta Phi) );
//  * exponential moments: for centered psi with ||psi||_inf < 1/(2e),
//        E_{f^N} exp( ((1/sqrt N) sum_j psi(v^1, v^j))^2 ) stays bounded in N.

#include "chaoslab/kernel.hpp"
#include "chaoslab/meanfield.hpp"

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace chaoslab {

struct DiscreteSpace {
  int outcomes = 2;                   // s
  int particles = 1;                  // N
  std::vector<double> joint;          // p on s^N, row-major
  std::vector<double> reference;      // q on s (its N-fold product is the reference)
  std::vector<double> test_function;  // Phi on s^N
};

struct ChangeOfMeasureResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double relative_entropy = 0.0;  // H_N(p | q^N)
  bool holds = false;
};

/// Exhaustive evaluation over all s^N outcomes. Throws PreconditionError for
/// eta <= 0, malformed vectors, or p not absolutely continuous w.r.t. q^N.
ChangeOfMeasureResult change_of_measure_check(const DiscreteSpace& space, double eta);

struct DiscreteInstance {
  DiscreteSpace space;
  double eta = 1.0;
};

/// Reproducible random instance: s in [2, max_outcomes], N in [1, max_particles].
DiscreteInstance random_discrete_instance(std::uint64_t seed, std::uint32_t index,
                                          int max_outcomes = 5, int max_particles = 4);

/// Kernel entry used to build psi: a_{alpha beta} or b_alpha.
struct PsiEntry {
  bool drift = false;  // false: a(alpha, beta); true: b(alpha)
  int alpha = 0;
  int beta = 0;
};

/// psi(z, v) = sqrt(eta) (c*f(z) - c(z - v)) for one kernel entry c.
class PsiFunction {
 public:
  double eta() const { return eta_; }
  double scale() const { return scale_; }
  const PsiEntry& entry() const { return entry_; }
  int dimension() const { return dim_; }
  /// max |psi| from grid scans of c*f and c (exact for separable extremes).
  double sup_norm() const { return sup_norm_; }
  /// Closed-form upper bound sqrt(eta) sum_k |c_k| (1 + |F_k|).
  double certified_bound() const { return certified_; }
  /// max over grid nodes z of |int psi(z, v) f(v) dv|.
  double centering_residual() const { return centering_; }

  double convolution(std::span<const double> z) const;  // c*f(z)
  double entry_value(std::span<const double> z) const;  // c(z)
  double operator()(std::span<const double> z, std::span<const double> v) const;

  /// Same psi with its amplitude rescaled so that sup_norm() == target.
  /// Used for negative controls that deliberately break ||psi|| < 1/(2e).
  PsiFunction rescaled_to(double target) const;

 private:
  friend PsiFunction build_psi(const KernelField&, const DensityField&, PsiEntry);

  struct Term {
    Vec angular;
    double coeff;  // entry coefficient, multiplies cos (a) or sin (b)
    std::complex<double> fourier;
  };
  int dim_ = 1;
  PsiEntry entry_;
  double constant_ = 0.0;       // base level on diagonal a-entries
  double mass_constant_ = 0.0;  // base level times mass of f
  std::vector<Term> terms_;
  double eta_ = 1.0;
  double scale_ = 1.0;
  double sup_norm_ = 0.0;
  double certified_ = 0.0;
  double centering_ = 0.0;
};

/// Builds psi for `entry` and picks the largest eta = 2^-m (m >= 0) with
/// certified_bound() < 1/(2e) - 1e-6. A constant entry gives psi == 0, eta = 1.
PsiFunction build_psi(const KernelField& kernel, const DensityField& f, PsiEntry entry);

struct MomentEstimate {
  std::size_t particles = 0;
  double mean = 0.0;
  double standard_error = 0.0;
};

struct MomentStudy {
  std::vector<MomentEstimate> estimates;
  bool bounded = false;  // mean(N_max) <= 2 mean(N_min) + 5 combined standard errors
  bool above_one = false;  // every mean >= 1 - 3 standard errors
};

/// Monte Carlo estimate of E exp(((1/sqrt N) sum_{j=1}^N psi(v^1, v^j))^2)
/// under i.i.d. draws from f, for each N of the ladder. Samples are split
/// into fixed batches with their own streams and summed in batch order, so
/// the result does not depend on `workers`.
MomentStudy exp_moment_check(const PsiFunction& psi, const DensityField& f,
                             std::span<const std::size_t> ladder, std::size_t samples,
                             std::uint64_t seed, unsigned workers = 1);

}  // namespace chaoslab
