#include "chaoslab/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

namespace chaoslab {

namespace {

double spectral_norm(const Mat& m) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

double phase(const KernelTerm& t, std::span<const double> z, int dim) {
  double p = 0.0;
  for (int i = 0; i < dim; ++i) p += t.angular[i] * wrap_unit(z[i]);
  return p;
}

}  // namespace

KernelField build_kernel(const KernelSpec& spec) {
  const int d = spec.dimension;
  if (d < 1 || d > kMaxDim) throw KernelError("kernel dimension must be 1, 2 or 3");
  if (!(spec.base_level > 0.0)) throw KernelError("kernel base_level must be positive");

  KernelField field;
  field.spec_ = spec;
  field.dim_ = d;
  field.base_level_ = spec.base_level;

  double norm_sum = 0.0;
  for (std::size_t m = 0; m < spec.modes.size(); ++m) {
    const KernelMode& mode = spec.modes[m];
    if (mode.coeff.rows() != d || mode.coeff.cols() != d)
      throw KernelError("mode " + std::to_string(m) + ": coefficient must be d x d");
    if ((mode.coeff - mode.coeff.transpose()).cwiseAbs().maxCoeff() > 0.0)
      throw KernelError("mode " + std::to_string(m) + ": coefficient matrix is not symmetric");
    bool zero = true;
    for (int i = 0; i < d; ++i) zero = zero && mode.wave[i] == 0;
    if (zero) throw KernelError("mode " + std::to_string(m) + ": wave vector must be nonzero");

    KernelTerm term;
    term.wave = mode.wave;
    term.coeff = mode.coeff;
    term.angular = Vec::Zero(d);
    Vec k(d);
    for (int i = 0; i < d; ++i) {
      k[i] = mode.wave[i];
      term.angular[i] = kTwoPi * mode.wave[i];
      field.max_wave_ = std::max(field.max_wave_, std::abs(mode.wave[i]));
    }
    term.b_coeff = -kTwoPi * (mode.coeff * k);
    term.div_b_coeff = -kTwoPi * kTwoPi * k.dot(mode.coeff * k);
    field.terms_.push_back(term);
    norm_sum += spectral_norm(mode.coeff);
  }

  field.lambda_min_ = spec.base_level - norm_sum;
  field.lambda_max_ = spec.base_level + norm_sum;
  if (!(field.lambda_min_ > 0.0)) {
    throw KernelError("ellipticity certificate fails: base_level - sum ||A_k||_2 = " +
                      std::to_string(field.lambda_min_) + " <= 0");
  }
  return field;
}

Mat KernelField::a_at_origin() const {
  Mat a = base_level_ * Mat::Identity(dim_, dim_);
  for (const auto& t : terms_) a += t.coeff;
  return a;
}

Mat KernelField::eval_a(std::span<const double> z) const {
  Mat a = base_level_ * Mat::Identity(dim_, dim_);
  for (const auto& t : terms_) a += t.coeff * std::cos(phase(t, z, dim_));
  return a;
}

Vec KernelField::eval_b(std::span<const double> z) const {
  Vec b = Vec::Zero(dim_);
  for (const auto& t : terms_) b += t.b_coeff * std::sin(phase(t, z, dim_));
  return b;
}

double KernelField::eval_div_b(std::span<const double> z) const {
  double s = 0.0;
  for (const auto& t : terms_) s += t.div_b_coeff * std::cos(phase(t, z, dim_));
  return s;
}

BoundsScan certify_bounds(const KernelField& field, int grid_n) {
  if (grid_n < 2 * field.max_wave_number() + 1)
    throw PreconditionError("certify_bounds: grid_n must be >= 2 * max wave number + 1");
  const int d = field.dimension();
  std::size_t total = 1;
  for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(grid_n);

  BoundsScan scan;
  scan.min_observed = std::numeric_limits<double>::infinity();
  scan.max_observed = -std::numeric_limits<double>::infinity();
  std::array<double, kMaxDim> z{};
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    for (int i = d - 1; i >= 0; --i) {
      z[i] = static_cast<double>(rest % grid_n) / grid_n;
      rest /= grid_n;
    }
    const Mat a = field.eval_a(std::span<const double>(z.data(), d));
    Eigen::SelfAdjointEigenSolver<Mat> eig(a, Eigen::EigenvaluesOnly);
    scan.min_observed = std::min(scan.min_observed, eig.eigenvalues().minCoeff());
    scan.max_observed = std::max(scan.max_observed, eig.eigenvalues().maxCoeff());
  }
  constexpr double tol = 1e-10;
  scan.within_certificate = field.lambda_min() - tol <= scan.min_observed &&
                            scan.max_observed <= field.lambda_max() + tol;
  return scan;
}

KernelSpec canonical_kernel_spec() {
  KernelSpec spec;
  spec.dimension = 1;
  spec.base_level = 1.0;
  KernelMode mode;
  mode.wave = {1, 0, 0};
  mode.coeff = Mat::Constant(1, 1, 0.5);
  spec.modes.push_back(mode);
  return spec;
}

KernelSpec constant_kernel_spec(int dimension, double lambda) {
  KernelSpec spec;
  spec.dimension = dimension;
  spec.base_level = lambda;
  return spec;
}

}  // namespace chaoslab
