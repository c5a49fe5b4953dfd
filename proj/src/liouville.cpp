#include "chaoslab/liouville.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace chaoslab {

namespace {

using Complex = std::complex<double>;

std::size_t int_pow(int base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) r *= static_cast<std::size_t>(base);
  return r;
}

// Per-node grid index along each axis (axis 0 slowest).
void unravel(std::size_t idx, int rank, int n, int* out) {
  for (int a = rank - 1; a >= 0; --a) {
    out[a] = static_cast<int>(idx % static_cast<std::size_t>(n));
    idx /= static_cast<std::size_t>(n);
  }
}

void check_density(const LiouvilleDensity& f, int particles, int points) {
  if (f.particles != particles || f.points != points || f.values.size() != int_pow(points, particles))
    throw PreconditionError("Liouville density does not match the solver grid");
}

}  // namespace

double LiouvilleDensity::mass() const {
  return cell_volume() * std::accumulate(values.begin(), values.end(), 0.0);
}

double LiouvilleDensity::entropy() const {
  double s = 0.0;
  for (double v : values)
    if (v > 0.0) s += v * std::log(v);
  return cell_volume() * s;
}

LiouvilleSolver::LiouvilleSolver(KernelField kernel, int particles, int points)
    : kernel_(std::move(kernel)),
      particles_(particles),
      points_(points),
      implicit_(kernel_.lambda_max() * (particles - 1) / particles),
      transform_(particles, points) {
  if (kernel_.dimension() != 1) throw PreconditionError("Liouville solver supports d = 1 only");
  if (particles < 2 || particles > 3) throw PreconditionError("Liouville solver supports N = 2, 3");
  if (points < 4 || (points & (points - 1)) != 0)
    throw PreconditionError("Liouville grid points must be a power of two >= 4");
  if (points < 4 * kernel_.max_wave_number())
    throw PreconditionError("Liouville grid too coarse for the kernel modes");

  const int n = points;
  const double h = 1.0 / n;
  std::vector<double> a_tab(n), b_tab(n), divb_tab(n);
  for (int m = 0; m < n; ++m) {
    const double z = m * h;
    a_tab[m] = kernel_.eval_a(std::span<const double>(&z, 1))(0, 0);
    b_tab[m] = kernel_.eval_b(std::span<const double>(&z, 1))[0];
    divb_tab[m] = kernel_.eval_div_b(std::span<const double>(&z, 1));
  }

  const std::size_t size = transform_.real_size();
  const double inv_n = 1.0 / particles;
  a_.assign(particles, std::vector<double>(size, 0.0));
  b_.assign(particles, std::vector<double>(size, 0.0));
  div_b_.assign(size, 0.0);
  int idx[3];
  for (std::size_t node = 0; node < size; ++node) {
    unravel(node, particles, n, idx);
    for (int i = 0; i < particles; ++i) {
      for (int j = 0; j < particles; ++j) {
        if (j == i) continue;
        const int m = ((idx[i] - idx[j]) % n + n) % n;
        a_[i][node] += inv_n * a_tab[m];
        b_[i][node] += inv_n * b_tab[m];
        div_b_[node] += inv_n * divb_tab[m];
      }
    }
  }
}

double LiouvilleSolver::stability_limit() const {
  double bmax = 0.0;
  for (const auto& bi : b_)
    for (double v : bi) bmax = std::max(bmax, std::abs(v));
  return bmax > 0.0 ? (1.0 / points_) / bmax : std::numeric_limits<double>::infinity();
}

std::vector<std::vector<double>> LiouvilleSolver::gradient(const LiouvilleDensity& f) const {
  check_density(f, particles_, points_);
  std::vector<Complex> spec(transform_.spectral_size()), work(transform_.spectral_size());
  transform_.forward(f.values, spec);
  std::vector<std::vector<double>> grad(particles_, std::vector<double>(f.size()));
  for (int a = 0; a < particles_; ++a) {
    for (std::size_t k = 0; k < spec.size(); ++k)
      work[k] = transform_.nyquist(k, a) ? Complex(0.0)
                                         : Complex(0.0, kTwoPi * transform_.wave(k, a)) * spec[k];
    transform_.backward(work, grad[a]);
  }
  return grad;
}

LiouvilleDensity LiouvilleSolver::step(const LiouvilleDensity& f, double dt, StepReport* report) const {
  check_density(f, particles_, points_);
  if (dt < 0.0) throw PreconditionError("negative time step");
  if (dt == 0.0) return f;
  const double limit = stability_limit();
  if (dt > limit * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "Liouville time step " << dt << " exceeds advective limit " << limit;
    throw StabilityError(msg.str());
  }

  const std::size_t size = f.size();
  const std::size_t nspec = transform_.spectral_size();
  std::vector<Complex> spec(nspec), work(nspec), remainder(nspec, Complex(0.0));
  transform_.forward(f.values, spec);

  std::vector<double> grad(size), flux(size);
  for (int a = 0; a < particles_; ++a) {
    for (std::size_t k = 0; k < nspec; ++k)
      work[k] = transform_.nyquist(k, a) ? Complex(0.0)
                                         : Complex(0.0, kTwoPi * transform_.wave(k, a)) * spec[k];
    transform_.backward(work, grad);
    for (std::size_t j = 0; j < size; ++j)
      flux[j] = (a_[a][j] - implicit_) * grad[j] - b_[a][j] * f.values[j];
    transform_.forward(flux, work);
    for (std::size_t k = 0; k < nspec; ++k)
      if (!transform_.nyquist(k, a))
        remainder[k] += Complex(0.0, kTwoPi * transform_.wave(k, a)) * work[k];
  }

  for (std::size_t k = 0; k < nspec; ++k) {
    const double rate = implicit_ * kTwoPi * kTwoPi * transform_.wave_norm2(k);
    const double decay = std::exp(-rate * dt);
    const double phi = rate > 0.0 ? -std::expm1(-rate * dt) / rate : dt;
    work[k] = decay * spec[k] + phi * remainder[k];
  }

  LiouvilleDensity out;
  out.particles = particles_;
  out.points = points_;
  out.time = f.time + dt;
  out.values.resize(size);
  transform_.backward(work, out.values);

  StepReport local;
  for (double& v : out.values) {
    if (v < -1e-10) {
      std::ostringstream msg;
      msg << "negative Liouville density " << v << " at t=" << out.time << " (dt=" << dt
          << "); reduce the time step";
      throw StabilityError(msg.str());
    }
    if (v < 0.0) {
      v = 0.0;
      ++local.clamped;
    }
  }
  const double m = out.mass();
  local.mass_correction = std::abs(m - 1.0);
  for (double& v : out.values) v /= m;
  if (report) *report = local;
  return out;
}

std::vector<LiouvilleDensity> LiouvilleSolver::solve(const LiouvilleDensity& f0, double horizon,
                                                     double dt,
                                                     std::span<const double> snapshot_times) const {
  check_density(f0, particles_, points_);
  if (!(dt > 0.0)) throw PreconditionError("solve: dt must be positive");
  std::vector<double> targets(snapshot_times.begin(), snapshot_times.end());
  if (targets.empty()) targets.push_back(horizon);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0.0 || targets[i] > horizon * (1.0 + 1e-12))
      throw PreconditionError("solve: snapshot time outside [0, horizon]");
    if (i > 0 && targets[i] < targets[i - 1])
      throw PreconditionError("solve: snapshot times must be sorted");
  }
  const double step_size = std::min(dt, stability_limit());
  std::vector<LiouvilleDensity> out;
  LiouvilleDensity f = f0;
  const double start = f0.time;
  double elapsed = 0.0;
  for (double target : targets) {
    while (target - elapsed > 1e-14 * std::max(1.0, target)) {
      double h = step_size;
      if (target - elapsed <= h * (1.0 + 1e-9)) h = target - elapsed;
      f = step(f, h);
      elapsed += h;
    }
    f.time = start + target;
    elapsed = target;
    out.push_back(f);
  }
  return out;
}

double LiouvilleSolver::fisher_information(const LiouvilleDensity& f) const {
  const auto grad = gradient(f);
  double s = 0.0;
  for (int a = 0; a < particles_; ++a)
    for (std::size_t j = 0; j < f.size(); ++j)
      if (f.values[j] > 0.0) s += a_[a][j] * grad[a][j] * grad[a][j] / f.values[j];
  return s * f.cell_volume();
}

double LiouvilleSolver::div_b_moment(const LiouvilleDensity& f) const {
  check_density(f, particles_, points_);
  double s = 0.0;
  for (std::size_t j = 0; j < f.size(); ++j) s += f.values[j] * div_b_[j];
  return s * f.cell_volume();
}

std::vector<double> LiouvilleSolver::entropy_residuals(
    std::span<const LiouvilleDensity> trajectory) const {
  std::vector<double> out;
  if (trajectory.empty()) return out;
  const double s0 = trajectory.front().entropy();
  double integral = 0.0;
  double prev_rate = 0.0;
  for (std::size_t m = 0; m < trajectory.size(); ++m) {
    const LiouvilleDensity& f = trajectory[m];
    const double rate = fisher_information(f) + div_b_moment(f);
    if (m > 0) {
      const double dt = f.time - trajectory[m - 1].time;
      if (dt < 0.0) throw PreconditionError("entropy_residuals: trajectory times must increase");
      integral += 0.5 * dt * (rate + prev_rate);
    }
    prev_rate = rate;
    out.push_back(f.entropy() + integral - s0);
  }
  return out;
}

EntropyBalance LiouvilleSolver::balance_terms(const LiouvilleDensity& fN,
                                              const DensityField& f) const {
  check_density(fN, particles_, points_);
  if (f.grid.dimension != 1 || f.grid.points != points_)
    throw PreconditionError("balance_terms: mean-field density must share the 1D grid");
  if (*std::min_element(fN.values.begin(), fN.values.end()) <= 0.0 || f.min_value() <= 0.0)
    throw PreconditionError("balance_terms: densities must be strictly positive");

  const ConvolvedFields conv = convolve(kernel_, f);
  // Spectral log-derivative of the one-particle density.
  SpectralTransform one(1, points_);
  std::vector<Complex> spec(one.spectral_size());
  one.forward(f.values, spec);
  for (std::size_t k = 0; k < spec.size(); ++k)
    spec[k] = one.nyquist(k, 0) ? Complex(0.0) : Complex(0.0, kTwoPi * one.wave(k, 0)) * spec[k];
  std::vector<double> dlog(points_);
  one.backward(spec, dlog);
  for (int m = 0; m < points_; ++m) dlog[m] /= f.values[m];

  const auto grad = gradient(fN);
  const double inv_n = 1.0 / particles_;
  double i1 = 0.0, i2 = 0.0, i3 = 0.0, fisher = 0.0;
  int idx[3];
  for (std::size_t j = 0; j < fN.size(); ++j) {
    unravel(j, particles_, points_, idx);
    const double w = fN.values[j];
    for (int a = 0; a < particles_; ++a) {
      const double g = dlog[idx[a]];
      const double r = grad[a][j] / w - g;  // d_i log(f_N / f^N)
      const double conv_a = conv.a[idx[a]];
      const double conv_b = conv.b[idx[a]];
      i1 -= w * a_[a][j] * r * r;
      i2 += w * (conv_a - a_[a][j]) * r * g;
      i3 -= w * (conv_b - b_[a][j]) * r;
      fisher += w * r * r;
    }
  }
  const double scale = inv_n * fN.cell_volume();
  EntropyBalance out;
  out.i1 = i1 * scale;
  out.i2 = i2 * scale;
  out.i3 = i3 * scale;
  out.dissipation = -out.i1;
  out.relative_fisher = fisher * scale;
  out.i1_upper_bound = -kernel_.lambda_min() * (particles_ - 1) * inv_n * out.relative_fisher;
  return out;
}

LiouvilleDensity tensor_power(const DensityField& f, int particles) {
  if (f.grid.dimension != 1) throw PreconditionError("tensor_power: need a 1D density");
  if (particles < 1 || particles > 3) throw PreconditionError("tensor_power: N must be 1..3");
  const int n = f.grid.points;
  LiouvilleDensity out;
  out.particles = particles;
  out.points = n;
  out.time = f.time;
  out.values.resize(int_pow(n, particles));
  int idx[3];
  for (std::size_t j = 0; j < out.values.size(); ++j) {
    unravel(j, particles, n, idx);
    double v = 1.0;
    for (int a = 0; a < particles; ++a) v *= f.values[idx[a]];
    out.values[j] = v;
  }
  return out;
}

LiouvilleDensity marginal(const LiouvilleDensity& f, int k) {
  if (k < 1 || k >= f.particles) throw PreconditionError("marginal: need 1 <= k < N");
  const std::size_t inner = int_pow(f.points, f.particles - k);
  LiouvilleDensity out;
  out.particles = k;
  out.points = f.points;
  out.time = f.time;
  out.values.assign(int_pow(f.points, k), 0.0);
  const double w = std::pow(f.spacing(), f.particles - k);
  for (std::size_t o = 0; o < out.values.size(); ++o) {
    double s = 0.0;
    for (std::size_t i = 0; i < inner; ++i) s += f.values[o * inner + i];
    out.values[o] = s * w;
  }
  return out;
}

DensityField as_density(const LiouvilleDensity& one_particle) {
  if (one_particle.particles != 1) throw PreconditionError("as_density: need a one-particle density");
  DensityField f;
  f.grid = PeriodicGrid{1, one_particle.points};
  f.values = one_particle.values;
  f.time = one_particle.time;
  return f;
}

double relative_entropy(const LiouvilleDensity& fN, const DensityField& f) {
  if (f.grid.dimension != 1 || f.grid.points != fN.points)
    throw PreconditionError("relative_entropy: grids differ");
  for (double v : f.values)
    if (!(v > 0.0)) throw PreconditionError("relative_entropy: reference density has a nonpositive node");
  std::vector<double> logf(f.values.size());
  for (std::size_t m = 0; m < logf.size(); ++m) logf[m] = std::log(f.values[m]);
  int idx[3];
  double s = 0.0;
  for (std::size_t j = 0; j < fN.size(); ++j) {
    const double p = fN.values[j];
    if (p <= 0.0) continue;
    unravel(j, fN.particles, fN.points, idx);
    double logq = 0.0;
    for (int a = 0; a < fN.particles; ++a) logq += logf[idx[a]];
    s += p * (std::log(p) - logq);
  }
  return s * fN.cell_volume() / fN.particles;
}

LiouvilleDensity swap_axes(const LiouvilleDensity& f, int i, int j) {
  LiouvilleDensity out = f;
  int idx[3];
  for (std::size_t node = 0; node < f.size(); ++node) {
    unravel(node, f.particles, f.points, idx);
    std::swap(idx[i], idx[j]);
    std::size_t target = 0;
    for (int a = 0; a < f.particles; ++a) target = target * f.points + idx[a];
    out.values[target] = f.values[node];
  }
  return out;
}

}  // namespace chaoslab
