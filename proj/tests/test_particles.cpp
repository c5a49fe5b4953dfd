#include "chaoslab/particles.hpp"

#include "chaoslab/chaos.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace chaoslab;
using std::numbers::pi;

namespace {

ParticleState make_state(int d, std::vector<double> pos) {
  ParticleState s;
  s.dimension = d;
  s.positions = std::move(pos);
  s.streams.resize(s.positions.size() / d);
  for (std::size_t i = 0; i < s.streams.size(); ++i) s.streams[i] = static_cast<std::uint32_t>(i);
  s.seed = 99;
  return s;
}

ParticleState random_state(int d, std::size_t n, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> pos(n * d);
  for (double& x : pos) x = u(gen);
  return make_state(d, pos);
}

KernelSpec two_d_kernel() {
  KernelSpec s;
  s.dimension = 2;
  Mat a(2, 2);
  a << 0.25, 0.05, 0.05, 0.15;
  s.modes.push_back({{1, 0, 0}, a});
  Mat c(2, 2);
  c << 0.1, -0.02, -0.02, 0.2;
  s.modes.push_back({{2, -1, 0}, c});
  return s;
}

double max_gap(const DriftDiffusion& x, const DriftDiffusion& y) {
  double g = 0.0;
  for (std::size_t i = 0; i < x.drift.size(); ++i) g = std::max(g, std::abs(x.drift[i] - y.drift[i]));
  for (std::size_t i = 0; i < x.diffusion.size(); ++i) g = std::max(g, std::abs(x.diffusion[i] - y.diffusion[i]));
  return g;
}

}  // namespace

TEST_CASE("two-particle forces, closed form") {
  const KernelField k = build_kernel(canonical_kernel_spec());
  const auto st = make_state(1, {0.0, 0.25});
  for (const auto& f : {forces_naive(st, k), forces_spectral(st, k)}) {
    CHECK(f.drift_at(0)(0) == doctest::Approx(pi).epsilon(1e-14));
    CHECK(f.diffusion_at(0)(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(f.drift_at(1)(0) == doctest::Approx(-pi).epsilon(1e-14));
  }
}

TEST_CASE("constant kernel forces") {
  const KernelField k = build_kernel(constant_kernel_spec(2, 1.3));
  std::mt19937_64 gen(1);
  const auto st = random_state(2, 10, gen);
  for (const auto& f : {forces_naive(st, k), forces_spectral(st, k)})
    for (std::size_t i = 0; i < 10; ++i) {
      CHECK(f.drift_at(i).norm() == 0.0);
      CHECK((f.diffusion_at(i) - 1.3 * 0.9 * Mat::Identity(2, 2)).norm() < 1e-14);
    }
}

TEST_CASE("coincident particles drop only the self term") {
  const KernelField k = build_kernel(canonical_kernel_spec());
  const auto st = make_state(1, {0.3, 0.3, 0.3, 0.3});
  for (const auto& f : {forces_naive(st, k), forces_spectral(st, k)})
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(std::abs(f.drift_at(i)(0)) < 1e-14);
      CHECK(f.diffusion_at(i)(0, 0) == doctest::Approx(0.75 * 1.5).epsilon(1e-14));
    }
}

TEST_CASE("spectral forces equal naive forces") {
  std::mt19937_64 gen(2);
  const KernelField k1 = build_kernel(canonical_kernel_spec());
  const KernelField k2 = build_kernel(two_d_kernel());
  double worst = 0.0;
  for (std::size_t n : {2, 16, 64, 256})
    for (int rep = 0; rep < 5; ++rep) {
      auto s1 = random_state(1, n, gen);
      auto s2 = random_state(2, n, gen);
      worst = std::max(worst, max_gap(forces_naive(s1, k1), forces_spectral(s1, k1)));
      worst = std::max(worst, max_gap(forces_naive(s2, k2), forces_spectral(s2, k2)));
    }
  CHECK(worst <= 1e-10);
}

TEST_CASE("drift factor scales only the drift") {
  const KernelField k = build_kernel(canonical_kernel_spec());
  std::mt19937_64 gen(4);
  const auto st = random_state(1, 8, gen);
  const auto two = forces_spectral(st, k), one = forces_spectral(st, k, 1.0);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(one.drift[i] == doctest::Approx(two.drift[i] / 2).epsilon(1e-14));
    CHECK(one.diffusion[i] == two.diffusion[i]);
  }
}

TEST_CASE("diffusion eigenvalues respect the certified bounds") {
  const KernelField k = build_kernel(two_d_kernel());
  std::mt19937_64 gen(8);
  const std::size_t n = 16;
  const auto f = forces_spectral(random_state(2, n, gen), k);
  const double scale = double(n - 1) / n;
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::SelfAdjointEigenSolver<Mat> es(f.diffusion_at(i));
    CHECK(es.eigenvalues().minCoeff() >= k.lambda_min() * scale - 1e-12);
    CHECK(es.eigenvalues().maxCoeff() <= k.lambda_max() + 1e-12);
  }
}

TEST_CASE("sqrt_psd") {
  for (int d = 1; d <= 3; ++d) CHECK((sqrt_psd(Mat::Identity(d, d)) - Mat::Identity(d, d)).norm() < 1e-15);
  Mat a = Mat::Zero(2, 2);
  a(0, 0) = 4;
  a(1, 1) = 9;
  const Mat s = sqrt_psd(a);
  CHECK(s(0, 0) == doctest::Approx(2.0));
  CHECK(s(1, 1) == doctest::Approx(3.0));
  CHECK(std::abs(s(0, 1)) < 1e-15);

  std::mt19937_64 gen(11);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 200; ++t) {
    const int d = 1 + t % 3;
    Mat g(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) g(i, j) = nd(gen);
    const Mat q = Eigen::HouseholderQR<Mat>(g).householderQ();
    Vec lam(d);
    for (int i = 0; i < d; ++i) lam[i] = (t % 7 == 0 && i == 0) ? 0.0 : std::abs(nd(gen));  // some singular cases
    const Mat m = q * lam.asDiagonal() * q.transpose();
    const Mat r = sqrt_psd(m);
    CHECK((r - r.transpose()).norm() < 1e-14);
    CHECK((r * r - m).norm() <= 1e-12);
    // independent oracle: Eigen's eigendecomposition
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    const Mat oracle = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                       es.eigenvectors().transpose();
    // the square root is not Lipschitz at a zero eigenvalue: round-off of
    // order 1e-16 there shows up as 1e-8 in the root
    CHECK((r - oracle).norm() <= (t % 7 == 0 ? 1e-7 : 1e-10));
    CHECK(Eigen::SelfAdjointEigenSolver<Mat>(r).eigenvalues().minCoeff() >= -1e-14);
  }

  Mat tiny = Mat::Zero(3, 3);
  tiny(0, 0) = 1.0;
  tiny(1, 1) = -5e-11;
  CHECK(sqrt_psd(tiny)(1, 1) == 0.0);
  tiny(1, 1) = -1e-8;
  CHECK_THROWS_AS(sqrt_psd(tiny), PreconditionError);
}

TEST_CASE("em_step with zero dt is the identity") {
  const KernelField k = build_kernel(canonical_kernel_spec());
  std::mt19937_64 gen(3);
  const auto st = random_state(1, 5, gen);
  const auto next = em_step(st, k, 0.0);
  CHECK(next.positions == st.positions);
  CHECK(next.time == st.time);
}

TEST_CASE("permuting particles and their streams commutes with a step") {
  const KernelField k = build_kernel(two_d_kernel());
  std::mt19937_64 gen(12);
  auto st = random_state(2, 7, gen);
  st.steps = 3;
  std::vector<std::size_t> perm{3, 0, 6, 1, 5, 2, 4};
  ParticleState ps = st;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    ps.streams[i] = st.streams[perm[i]];
    for (int a = 0; a < 2; ++a) ps.positions[i * 2 + a] = st.positions[perm[i] * 2 + a];
  }
  const auto a = em_step(st, k, 1e-3), b = em_step(ps, k, 1e-3);
  for (std::size_t i = 0; i < perm.size(); ++i)
    for (int ax = 0; ax < 2; ++ax) CHECK(std::abs(b.positions[i * 2 + ax] - a.positions[perm[i] * 2 + ax]) < 1e-14);
}

TEST_CASE("constant kernel increments are Gaussian with the reduced variance") {
  const double lambda = 0.8, dt = 1e-3;
  const KernelField k = build_kernel(constant_kernel_spec(1, lambda));
  const std::size_t n = 4, replicas = 100000 / n;
  const double var = 2 * lambda * (n - 1.0) / n * dt;
  double sum = 0, sq = 0, quad = 0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < replicas; ++r) {
    auto st = make_state(1, {0.1, 0.4, 0.6, 0.9});
    st.replica = static_cast<std::uint32_t>(r);
    const auto next = em_step(st, k, dt);
    for (std::size_t i = 0; i < n; ++i) {
      const double inc = wrap_centered(next.positions[i] - st.positions[i]);
      sum += inc;
      sq += inc * inc;
      quad += inc * inc * inc * inc;
      ++count;
    }
  }
  const double mean = sum / count, m2 = sq / count;
  const double se_var = std::sqrt((quad / count - m2 * m2) / count);
  CHECK(std::abs(mean) < 3 * std::sqrt(var / count));
  CHECK(std::abs(m2 - var) < 3 * se_var);
}

TEST_CASE("ensembles are deterministic and independent of worker count") {
  const KernelField k = build_kernel(canonical_kernel_spec());
  const auto f0 = discretize(InitialProfile{1, {{{1, 0, 0}, 0.3, 0.0}}}, make_grid(1, 64));
  EnsembleConfig cfg;
  cfg.replicas = 24;
  cfg.particles = 16;
  cfg.dt = 1e-3;
  cfg.horizon = 0.05;
  cfg.snapshot_times = {0.0, 0.02, 0.05};
  cfg.seed = 5;
  const auto a = run_ensemble(cfg, k, f0, 1);
  const auto b = run_ensemble(cfg, k, f0, 1);
  const auto c = run_ensemble(cfg, k, f0, 3);
  CHECK(a.positions == b.positions);
  CHECK(a.positions == c.positions);
  CHECK(a.times == std::vector<double>{0.0, 0.02, 0.05});
  cfg.options.method = ForceMethod::kNaive;
  const auto d = run_ensemble(cfg, k, f0, 2);
  double gap = 0.0;
  for (std::size_t i = 0; i < a.positions[2].size(); ++i)
    gap = std::max(gap, std::abs(wrap_centered(a.positions[2][i] - d.positions[2][i])));
  CHECK(gap < 1e-10);
  cfg.seed = 6;
  CHECK(run_ensemble(cfg, k, f0, 1).positions[2] != d.positions[2]);
}

TEST_CASE("uniform law is invariant: Kolmogorov-Smirnov") {
  const KernelField k = build_kernel(constant_kernel_spec(1, 1.0));
  const auto f0 = discretize(InitialProfile{1, {}}, make_grid(1, 32));
  EnsembleConfig cfg;
  cfg.replicas = 200;
  cfg.particles = 16;
  cfg.dt = 1e-3;
  cfg.horizon = 0.05;
  cfg.seed = 17;
  auto x = run_ensemble(cfg, k, f0).positions.back();
  std::sort(x.begin(), x.end());
  double ks = 0.0;
  const double n = double(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    ks = std::max({ks, std::abs((i + 1) / n - x[i]), std::abs(x[i] - i / n)});
  CHECK(ks * std::sqrt(n) < 1.949);  // 99.9% critical value
}

TEST_CASE("constant kernel: circular moments of the displacement") {
  const double lambda = 0.5, T = 0.05;
  const KernelField k = build_kernel(constant_kernel_spec(1, lambda));
  const auto f0 = discretize(InitialProfile{1, {}}, make_grid(1, 32));
  EnsembleConfig cfg;
  cfg.replicas = 2000;
  cfg.particles = 8;
  cfg.dt = 1e-3;
  cfg.horizon = T;
  cfg.snapshot_times = {0.0, T};
  cfg.seed = 23;
  const auto res = run_ensemble(cfg, k, f0);
  const double var = 2 * lambda * (cfg.particles - 1.0) / cfg.particles * T;
  for (int m : {1, 2}) {
    double s = 0, sq = 0;
    const auto& x0 = res.positions[0];
    const auto& x1 = res.positions[1];
    for (std::size_t i = 0; i < x0.size(); ++i) {
      const double c = std::cos(2 * pi * m * (x1[i] - x0[i]));
      s += c;
      sq += c * c;
    }
    const double n = double(x0.size());
    const double mean = s / n, se = std::sqrt((sq / n - mean * mean) / n);
    const double exact = std::exp(-2 * pi * pi * m * m * var);
    CHECK(std::abs(mean - exact) < 3 * se);
  }
}

TEST_CASE("pooled marginal matches the mean-field solution") {
  const KernelField k = build_kernel(canonical_kernel_spec());
  const auto grid = make_grid(1, 128);
  const auto f0 = discretize(InitialProfile{1, {{{1, 0, 0}, 0.3, 0.0}}}, grid);
  EnsembleConfig cfg;
  cfg.replicas = 1000;
  cfg.particles = 128;
  cfg.dt = 1e-3;
  cfg.horizon = 0.5;
  cfg.seed = 31;
  const auto x = run_ensemble(cfg, k, f0).positions.back();
  const auto fT = MeanFieldSolver(k, grid).solve(f0, 0.5, 1e-4).back();
  const auto hist = histogram(x, 1, 32);
  CHECK(l1_distance(hist.mass, bin_masses(fT, 32), 1.0) <= 0.05);
}

TEST_CASE("initial states follow the initial density") {
  const auto f0 = discretize(InitialProfile{1, {{{1, 0, 0}, 0.5, 0.0}}}, make_grid(1, 64));
  double s = 0.0;
  std::size_t count = 0;
  for (std::uint32_t r = 0; r < 200; ++r) {
    const auto st = initial_state(f0, 100, 3, r);
    CHECK(st.count() == 100);
    for (double x : st.positions) {
      s += std::cos(2 * pi * x);
      ++count;
    }
  }
  // E cos(2 pi v) = amplitude / 2 for the interpolant, up to O(h^2)
  CHECK(std::abs(s / count - 0.25) < 4 * std::sqrt(0.5 / count));
  CHECK_THROWS_AS(initial_state(f0, 1, 3, 0), PreconditionError);
}
