#include "chaoslab/kernel.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <random>

using namespace chaoslab;
using std::numbers::pi;

namespace {

double at(const KernelField& k, double z) { return k.eval_a(std::span<const double>(&z, 1))(0, 0); }
double bt(const KernelField& k, double z) { return k.eval_b(std::span<const double>(&z, 1))(0); }
double divbt(const KernelField& k, double z) { return k.eval_div_b(std::span<const double>(&z, 1)); }

KernelSpec two_d_spec() {
  KernelSpec s;
  s.dimension = 2;
  s.base_level = 1.0;
  Mat a(2, 2);
  a << 0.2, 0.1, 0.1, -0.15;
  s.modes.push_back({{1, 2, 0}, a});
  Mat c(2, 2);
  c << 0.05, 0.0, 0.0, 0.1;
  s.modes.push_back({{-1, 1, 0}, c});
  return s;
}

}  // namespace

TEST_CASE("canonical kernel closed form") {
  const KernelField k = build_kernel(canonical_kernel_spec());
  CHECK(k.lambda_min() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(k.lambda_max() == doctest::Approx(1.5).epsilon(1e-15));
  for (double z : {0.0, 0.1, 0.25, 0.4, 0.77}) {
    CHECK(at(k, z) == doctest::Approx(1.0 + 0.5 * std::cos(2 * pi * z)).epsilon(1e-14));
    CHECK(bt(k, z) == doctest::Approx(-pi * std::sin(2 * pi * z)).epsilon(1e-14));
    CHECK(divbt(k, z) == doctest::Approx(-2 * pi * pi * std::cos(2 * pi * z)).epsilon(1e-14));
  }
  CHECK(std::abs(at(k, 0.25) - 1.0) < 1e-15);
}

TEST_CASE("constant kernel") {
  const KernelField k = build_kernel(constant_kernel_spec(2, 1.7));
  CHECK(k.lambda_min() == 1.7);
  CHECK(k.lambda_max() == 1.7);
  const double z[2] = {0.3, 0.9};
  CHECK((k.eval_a(z) - 1.7 * Mat::Identity(2, 2)).norm() == 0.0);
  CHECK(k.eval_b(z).norm() == 0.0);
  CHECK(k.eval_div_b(z) == 0.0);
}

TEST_CASE("ellipticity certificate rejects") {
  KernelSpec s = canonical_kernel_spec();
  s.modes[0].coeff(0, 0) = 1.5;
  CHECK_THROWS_AS(build_kernel(s), KernelError);
  s.modes[0].coeff(0, 0) = 1.0;  // certificate exactly zero
  CHECK_THROWS_AS(build_kernel(s), KernelError);
}

TEST_CASE("malformed specs") {
  KernelSpec s = two_d_spec();
  s.modes[0].coeff(0, 1) = 0.3;
  CHECK_THROWS_AS(build_kernel(s), KernelError);
  s = two_d_spec();
  s.modes[0].wave = {0, 0, 0};
  CHECK_THROWS_AS(build_kernel(s), KernelError);
  s = canonical_kernel_spec();
  s.base_level = 0.0;
  CHECK_THROWS_AS(build_kernel(s), KernelError);
}

TEST_CASE("periodicity, parity, b vanishes at the origin") {
  const KernelField k = build_kernel(two_d_spec());
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int t = 0; t < 100; ++t) {
    const double z[2] = {u(gen), u(gen)};
    const double z1[2] = {z[0] + 1.0, z[1] - 3.0};
    const double mz[2] = {-z[0], -z[1]};
    CHECK((k.eval_a(z) - k.eval_a(z1)).norm() < 1e-12);
    CHECK((k.eval_b(z) - k.eval_b(z1)).norm() < 1e-12);
    CHECK((k.eval_a(z) - k.eval_a(z).transpose()).norm() <= 1e-14);
    CHECK((k.eval_a(z) - k.eval_a(mz)).norm() < 1e-13);
    CHECK((k.eval_b(z) + k.eval_b(mz)).norm() < 1e-13);
  }
  const double zero[2] = {0.0, 0.0};
  CHECK(k.eval_b(zero).norm() == 0.0);
}

TEST_CASE("b is the divergence of a, div b the divergence of b") {
  const KernelField k = build_kernel(two_d_spec());
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double h = 1e-4;
  for (int t = 0; t < 50; ++t) {
    const double z[2] = {u(gen), u(gen)};
    Vec div_a = Vec::Zero(2);
    double div_b = 0.0;
    for (int j = 0; j < 2; ++j) {
      double zp[2] = {z[0], z[1]}, zm[2] = {z[0], z[1]};
      zp[j] += h;
      zm[j] -= h;
      div_a += (k.eval_a(zp).col(j) - k.eval_a(zm).col(j)) / (2 * h);
      div_b += (k.eval_b(zp)(j) - k.eval_b(zm)(j)) / (2 * h);
    }
    CHECK((div_a - k.eval_b(z)).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(std::abs(div_b - k.eval_div_b(z)) <= 1e-5);
  }
}

TEST_CASE("certify_bounds") {
  const auto canon = certify_bounds(build_kernel(canonical_kernel_spec()), 256);
  CHECK(std::abs(canon.min_observed - 0.5) <= 1e-10);
  CHECK(std::abs(canon.max_observed - 1.5) <= 1e-10);
  CHECK(canon.within_certificate);

  const auto flat = certify_bounds(build_kernel(constant_kernel_spec(1, 2.0)), 8);
  CHECK(flat.min_observed == 2.0);
  CHECK(flat.max_observed == 2.0);

  KernelSpec s;
  s.dimension = 2;
  Mat a(2, 2);
  a << 0.3, 0.0, 0.0, -0.2;  // ||A||_2 = 0.3
  s.modes.push_back({{1, 1, 0}, a});
  const KernelField k = build_kernel(s);
  CHECK(k.lambda_min() == doctest::Approx(0.7));
  const auto scan = certify_bounds(k, 64);
  CHECK(scan.min_observed >= 0.7 - 1e-10);
  CHECK(scan.within_certificate);
  CHECK_THROWS_AS(certify_bounds(k, 2), PreconditionError);
}

TEST_CASE("2d scan against an independent eigen-solver") {
  const KernelField k = build_kernel(two_d_spec());
  const auto scan = certify_bounds(k, 33);
  double lo = 1e300, hi = -1e300;
  for (int i = 0; i < 33; ++i)
    for (int j = 0; j < 33; ++j) {
      const double z[2] = {i / 33.0, j / 33.0};
      Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(Eigen::Matrix2d(k.eval_a(z)));
      lo = std::min(lo, es.eigenvalues()(0));
      hi = std::max(hi, es.eigenvalues()(1));
    }
  CHECK(scan.min_observed == doctest::Approx(lo).epsilon(1e-12));
  CHECK(scan.max_observed == doctest::Approx(hi).epsilon(1e-12));
  CHECK(lo >= k.lambda_min() - 1e-10);
  CHECK(hi <= k.lambda_max() + 1e-10);
}
