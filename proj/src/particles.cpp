#include "chaoslab/particles.hpp"

#include "chaoslab/sampling.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <cmath>
#include <sstream>
#include <thread>

namespace chaoslab {

namespace {

// Cyclic Jacobi eigendecomposition of a symmetric 3x3 matrix: a = q diag(w) q^T.
void jacobi_eigen(Mat a, Mat& q, Vec& w) {
  const int d = static_cast<int>(a.rows());
  q = Mat::Identity(d, d);
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < d; ++p)
      for (int r = p + 1; r < d; ++r) off += a(p, r) * a(p, r);
    if (off <= 1e-300) break;
    for (int p = 0; p < d; ++p) {
      for (int r = p + 1; r < d; ++r) {
        if (a(p, r) == 0.0) continue;
        const double theta = (a(r, r) - a(p, p)) / (2.0 * a(p, r));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < d; ++k) {
          const double akp = a(k, p), akr = a(k, r);
          a(k, p) = c * akp - s * akr;
          a(k, r) = s * akp + c * akr;
        }
        for (int k = 0; k < d; ++k) {
          const double apk = a(p, k), ark = a(r, k);
          a(p, k) = c * apk - s * ark;
          a(r, k) = s * apk + c * ark;
        }
        for (int k = 0; k < d; ++k) {
          const double qkp = q(k, p), qkr = q(k, r);
          q(k, p) = c * qkp - s * qkr;
          q(k, r) = s * qkp + c * qkr;
        }
      }
    }
  }
  w = a.diagonal();
}

[[noreturn]] void negative_eigenvalue(double lambda, double tol) {
  std::ostringstream msg;
  msg << "sqrt_psd: eigenvalue " << lambda << " below -" << tol
      << " (kernel ellipticity certificate violated)";
  throw PreconditionError(msg.str());
}

struct FlatKernel {
  int dim;
  double base;
  std::vector<double> angular;  // K * d
  std::vector<double> coeff;    // K * d * d
  std::vector<double> bcoeff;   // K * d

  explicit FlatKernel(const KernelField& k) : dim(k.dimension()), base(k.base_level()) {
    for (const KernelTerm& t : k.terms()) {
      for (int i = 0; i < dim; ++i) angular.push_back(t.angular[i]);
      for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) coeff.push_back(t.coeff(r, c));
      for (int i = 0; i < dim; ++i) bcoeff.push_back(t.b_coeff[i]);
    }
  }
  std::size_t terms() const { return bcoeff.size() / dim; }
};

}  // namespace

Vec DriftDiffusion::drift_at(std::size_t i) const {
  Vec v(dimension);
  for (int a = 0; a < dimension; ++a) v[a] = drift[i * dimension + a];
  return v;
}

Mat DriftDiffusion::diffusion_at(std::size_t i) const {
  Mat m(dimension, dimension);
  const std::size_t dd = static_cast<std::size_t>(dimension) * dimension;
  for (int r = 0; r < dimension; ++r)
    for (int c = 0; c < dimension; ++c) m(r, c) = diffusion[i * dd + r * dimension + c];
  return m;
}

DriftDiffusion forces_naive(const ParticleState& state, const KernelField& kernel,
                            double drift_factor) {
  const int d = state.dimension;
  if (kernel.dimension() != d) throw PreconditionError("kernel and state dimensions differ");
  const std::size_t n = state.count();
  const FlatKernel fk(kernel);
  const std::size_t nk = fk.terms();

  DriftDiffusion out;
  out.dimension = d;
  out.drift.assign(n * d, 0.0);
  out.diffusion.assign(n * d * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double a_sum[kMaxDim * kMaxDim] = {};
    double b_sum[kMaxDim] = {};
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double z[kMaxDim];
      for (int a = 0; a < d; ++a)
        z[a] = wrap_centered(state.positions[i * d + a] - state.positions[j * d + a]);
      for (int a = 0; a < d; ++a) a_sum[a * d + a] += fk.base;
      for (std::size_t t = 0; t < nk; ++t) {
        double theta = 0.0;
        for (int a = 0; a < d; ++a) theta += fk.angular[t * d + a] * z[a];
        const double c = std::cos(theta), s = std::sin(theta);
        for (int e = 0; e < d * d; ++e) a_sum[e] += fk.coeff[t * d * d + e] * c;
        for (int a = 0; a < d; ++a) b_sum[a] += fk.bcoeff[t * d + a] * s;
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (int e = 0; e < d * d; ++e) out.diffusion[i * d * d + e] = a_sum[e] * inv_n;
    for (int a = 0; a < d; ++a) out.drift[i * d + a] = drift_factor * b_sum[a] * inv_n;
  }
  return out;
}

DriftDiffusion forces_spectral(const ParticleState& state, const KernelField& kernel,
                               double drift_factor) {
  const int d = state.dimension;
  if (kernel.dimension() != d) throw PreconditionError("kernel and state dimensions differ");
  const std::size_t n = state.count();
  const FlatKernel fk(kernel);
  const std::size_t nk = fk.terms();
  const double inv_n = 1.0 / static_cast<double>(n);

  // Per-particle phases and the mode sums, accumulated in particle order.
  std::vector<double> cos_t(n * nk), sin_t(n * nk);
  std::vector<double> sum_re(nk, 0.0), sum_im(nk, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t t = 0; t < nk; ++t) {
      double theta = 0.0;
      for (int a = 0; a < d; ++a) theta += fk.angular[t * d + a] * state.positions[j * d + a];
      const double c = std::cos(theta), s = std::sin(theta);
      cos_t[j * nk + t] = c;
      sin_t[j * nk + t] = s;
      sum_re[t] += c;
      sum_im[t] -= s;
    }
  }
  for (std::size_t t = 0; t < nk; ++t) {
    sum_re[t] *= inv_n;
    sum_im[t] *= inv_n;
  }

  DriftDiffusion out;
  out.dimension = d;
  out.drift.assign(n * d, 0.0);
  out.diffusion.assign(n * d * d, 0.0);
  const double diag = fk.base * (1.0 - inv_n);
  for (std::size_t i = 0; i < n; ++i) {
    double* ai = &out.diffusion[i * d * d];
    double* bi = &out.drift[i * d];
    for (int a = 0; a < d; ++a) ai[a * d + a] = diag;
    for (std::size_t t = 0; t < nk; ++t) {
      const double c = cos_t[i * nk + t], s = sin_t[i * nk + t];
      // (1/N) sum_{j != i} cos(theta_i - theta_j) and sin(...) from e^{i theta_i} S_k.
      const double re = c * sum_re[t] - s * sum_im[t] - inv_n;
      const double im = s * sum_re[t] + c * sum_im[t];
      for (int e = 0; e < d * d; ++e) ai[e] += fk.coeff[t * d * d + e] * re;
      for (int a = 0; a < d; ++a) bi[a] += drift_factor * fk.bcoeff[t * d + a] * im;
    }
  }
  return out;
}

Mat sqrt_psd(const Mat& a, double tol) {
  const int d = static_cast<int>(a.rows());
  if (d < 1 || d > kMaxDim || a.cols() != d) throw PreconditionError("sqrt_psd: need a square d x d matrix, d <= 3");
  if (d == 1) {
    const double x = a(0, 0);
    if (x < -tol) negative_eigenvalue(x, tol);
    return Mat::Constant(1, 1, std::sqrt(std::max(x, 0.0)));
  }
  if (d == 2) {
    const double p = a(0, 0), r = a(1, 1), q = 0.5 * (a(0, 1) + a(1, 0));
    const double mean = 0.5 * (p + r);
    const double radius = std::hypot(0.5 * (p - r), q);
    double hi = mean + radius, lo = mean - radius;
    if (lo < -tol) negative_eigenvalue(lo, tol);
    Mat m(2, 2);
    m << p, q, q, r;
    if (lo < 0.0) {
      // Remove the small negative part along its eigenvector.
      if (radius > 0.0) m -= lo * (hi * Mat::Identity(2, 2) - m) / (hi - lo);
      else m.setZero();
      lo = 0.0;
      hi = std::max(hi, 0.0);
    }
    const double s = std::sqrt(hi) + std::sqrt(lo);
    if (s == 0.0) return Mat::Zero(2, 2);
    Mat root = (m + std::sqrt(hi * lo) * Mat::Identity(2, 2)) / s;
    return root;
  }
  Mat sym = 0.5 * (a + a.transpose());
  Mat q;
  Vec w;
  jacobi_eigen(sym, q, w);
  Vec roots(d);
  for (int i = 0; i < d; ++i) {
    if (w[i] < -tol) negative_eigenvalue(w[i], tol);
    roots[i] = std::sqrt(std::max(w[i], 0.0));
  }
  Mat root = q * roots.asDiagonal() * q.transpose();
  return 0.5 * (root + root.transpose());
}

ParticleState em_step(const ParticleState& state, const KernelField& kernel, double dt,
                      const StepOptions& options) {
  if (dt < 0.0) throw PreconditionError("em_step: negative time step");
  if (dt == 0.0) return state;
  const int d = state.dimension;
  const DriftDiffusion forces = options.method == ForceMethod::kNaive
                                    ? forces_naive(state, kernel, options.drift_factor)
                                    : forces_spectral(state, kernel, options.drift_factor);
  ParticleState next = state;
  const double noise_scale = std::sqrt(2.0 * dt);
  double xi[4];
  for (std::size_t i = 0; i < state.count(); ++i) {
    const rng::StreamAddress addr{state.seed, state.replica, state.streams[i],
                                  rng::Purpose::kIncrement};
    rng::normals(addr, state.steps, xi, d);
    const Mat root = sqrt_psd(forces.diffusion_at(i));
    for (int a = 0; a < d; ++a) {
      double noise = 0.0;
      for (int c = 0; c < d; ++c) noise += root(a, c) * xi[c];
      next.positions[i * d + a] =
          wrap_unit(state.positions[i * d + a] + forces.drift[i * d + a] * dt + noise_scale * noise);
    }
  }
  next.steps = state.steps + 1;
  next.time = state.time + dt;
  return next;
}

ParticleState initial_state(const DensityField& initial, std::size_t count, std::uint64_t seed,
                            std::uint32_t replica) {
  if (count < 2) throw PreconditionError("particle system needs N >= 2");
  const DensitySampler sampler(initial);
  ParticleState state;
  state.dimension = initial.grid.dimension;
  state.seed = seed;
  state.replica = replica;
  state.positions.resize(count * state.dimension);
  state.streams.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    state.streams[i] = static_cast<std::uint32_t>(i);
    const rng::StreamAddress addr{seed, replica, state.streams[i], rng::Purpose::kInitial};
    sampler.sample(addr, 0, std::span<double>(state.positions.data() + i * state.dimension,
                                              static_cast<std::size_t>(state.dimension)));
  }
  return state;
}

EnsembleResult run_ensemble(const EnsembleConfig& cfg, const KernelField& kernel,
                            const DensityField& initial, unsigned workers) {
  if (cfg.replicas < 1) throw PreconditionError("run_ensemble: need at least one replica");
  if (!(cfg.dt > 0.0)) throw PreconditionError("run_ensemble: dt must be positive");
  if (cfg.particles < 2) throw PreconditionError("run_ensemble: need N >= 2");
  if (kernel.dimension() != initial.grid.dimension)
    throw PreconditionError("run_ensemble: kernel and initial density dimensions differ");

  std::vector<double> times = cfg.snapshot_times;
  if (times.empty()) times.push_back(cfg.horizon);
  for (std::size_t s = 0; s < times.size(); ++s) {
    if (times[s] < 0.0 || (s > 0 && times[s] < times[s - 1]))
      throw PreconditionError("run_ensemble: snapshot times must be sorted and nonnegative");
  }

  const int d = initial.grid.dimension;
  EnsembleResult result;
  result.dimension = d;
  result.replicas = cfg.replicas;
  result.particles = cfg.particles;
  result.times = times;
  const std::size_t stride = cfg.particles * static_cast<std::size_t>(d);
  result.positions.assign(times.size(), std::vector<double>(cfg.replicas * stride));

  auto run_replica = [&](std::size_t r) {
    ParticleState state = initial_state(initial, cfg.particles, cfg.seed, static_cast<std::uint32_t>(r));
    double elapsed = 0.0;
    for (std::size_t s = 0; s < times.size(); ++s) {
      const double target = times[s];
      while (target - elapsed > 1e-14 * std::max(1.0, target)) {
        double h = cfg.dt;
        if (target - elapsed <= h * (1.0 + 1e-9)) h = target - elapsed;
        state = em_step(state, kernel, h, cfg.options);
        elapsed += h;
      }
      elapsed = target;
      std::copy(state.positions.begin(), state.positions.end(),
                result.positions[s].begin() + static_cast<std::ptrdiff_t>(r * stride));
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(cfg.replicas)));
  if (threads == 1) {
    for (std::size_t r = 0; r < cfg.replicas; ++r) run_replica(r);
    return result;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      for (std::size_t r = next++; r < cfg.replicas; r = next++) {
        try {
          run_replica(r);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return result;
}

}  // namespace chaoslab
