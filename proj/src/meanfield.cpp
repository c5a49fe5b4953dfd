#include "chaoslab/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace chaoslab {

namespace {

constexpr double kNegativeTolerance = 1e-10;

using Complex = std::complex<double>;

double dot_wave(const WaveVector& k, const std::array<double, kMaxDim>& v, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += k[i] * v[i];
  return s;
}

void require_resolved(const KernelField& kernel, const PeriodicGrid& grid) {
  if (kernel.dimension() != grid.dimension)
    throw PreconditionError("kernel and grid dimensions differ");
  if (grid.points < 4 * kernel.max_wave_number()) {
    std::ostringstream msg;
    msg << "grid too coarse: " << grid.points << " points per axis < 4 * max wave number "
        << kernel.max_wave_number();
    throw PreconditionError(msg.str());
  }
}

// Fills node-wise convolution fields from the Fourier coefficients F_k of f:
//   int cos(2 pi k.(v - w)) f(w) dw = Re(F_k e^{i theta}),  theta = 2 pi k.v
//   int sin(2 pi k.(v - w)) f(w) dw = Im(F_k e^{i theta}).
ConvolvedFields assemble(const KernelField& kernel, const PeriodicGrid& grid, double mass,
                         std::span<const Complex> coeffs,
                         const std::vector<std::vector<double>>& node_cos,
                         const std::vector<std::vector<double>>& node_sin) {
  const int d = grid.dimension;
  const std::size_t size = grid.size();
  ConvolvedFields out;
  out.grid = grid;
  out.a.assign(size * d * d, 0.0);
  out.b.assign(size * d, 0.0);
  out.div_b.assign(size, 0.0);
  for (std::size_t j = 0; j < size; ++j)
    for (int i = 0; i < d; ++i) out.a[j * d * d + i * d + i] = kernel.base_level() * mass;

  const auto& terms = kernel.terms();
  for (std::size_t t = 0; t < terms.size(); ++t) {
    const KernelTerm& term = terms[t];
    const double fr = coeffs[t].real();
    const double fi = coeffs[t].imag();
    for (std::size_t j = 0; j < size; ++j) {
      const double c = node_cos[t][j];
      const double s = node_sin[t][j];
      const double re = c * fr - s * fi;
      const double im = s * fr + c * fi;
      double* aj = &out.a[j * d * d];
      for (int r = 0; r < d; ++r)
        for (int col = 0; col < d; ++col) aj[r * d + col] += term.coeff(r, col) * re;
      for (int r = 0; r < d; ++r) out.b[j * d + r] += term.b_coeff[r] * im;
      out.div_b[j] += term.div_b_coeff * re;
    }
  }
  return out;
}

void node_phases(const KernelField& kernel, const PeriodicGrid& grid,
                 std::vector<std::vector<double>>& cosines,
                 std::vector<std::vector<double>>& sines) {
  const std::size_t size = grid.size();
  cosines.clear();
  sines.clear();
  for (const KernelTerm& term : kernel.terms()) {
    std::vector<double> c(size), s(size);
    for (std::size_t j = 0; j < size; ++j) {
      const double theta = kTwoPi * dot_wave(term.wave, grid.node(j), grid.dimension);
      c[j] = std::cos(theta);
      s[j] = std::sin(theta);
    }
    cosines.push_back(std::move(c));
    sines.push_back(std::move(s));
  }
}

// Real trigonometric interpolant of grid data (Nyquist coefficients dropped),
// evaluable with its gradient at arbitrary points.
class TrigInterpolant {
 public:
  explicit TrigInterpolant(const DensityField& f) : dim_(f.grid.dimension), n_(f.grid.points) {
    SpectralTransform tr(dim_, n_);
    std::vector<Complex> spec(tr.spectral_size());
    tr.forward(f.values, spec);
    const double scale = 1.0 / static_cast<double>(tr.real_size());
    // Coefficients below round-off of the mean carry no information.
    const double floor = 1e-16 * std::abs(spec[0]);
    for (std::size_t idx = 0; idx < spec.size(); ++idx) {
      bool nyq = false;
      for (int a = 0; a < dim_; ++a) nyq = nyq || tr.nyquist(idx, a);
      if (nyq || std::abs(spec[idx]) <= floor) continue;
      const int last = tr.wave(idx, dim_ - 1);
      Entry e;
      for (int a = 0; a < dim_; ++a) e.wave[a] = tr.wave(idx, a);
      e.coeff = spec[idx] * scale * (last == 0 ? 1.0 : 2.0);
      entries_.push_back(e);
    }
  }

  // Returns |grad f / f| at x.
  double log_gradient(const std::array<double, kMaxDim>& x) const {
    double value = 0.0;
    std::array<double, kMaxDim> grad{};
    for (const Entry& e : entries_) {
      double theta = 0.0;
      for (int a = 0; a < dim_; ++a) theta += kTwoPi * e.wave[a] * x[a];
      const double c = std::cos(theta);
      const double s = std::sin(theta);
      // Re(C e^{i theta}) and its derivative Re(i 2 pi k C e^{i theta}).
      const double re = e.coeff.real() * c - e.coeff.imag() * s;
      const double im = e.coeff.real() * s + e.coeff.imag() * c;
      value += re;
      for (int a = 0; a < dim_; ++a) grad[a] -= kTwoPi * e.wave[a] * im;
    }
    double g2 = 0.0;
    for (int a = 0; a < dim_; ++a) g2 += grad[a] * grad[a];
    return std::sqrt(g2) / value;
  }

 private:
  struct Entry {
    WaveVector wave{};
    Complex coeff;
  };
  int dim_;
  int n_;
  std::vector<Entry> entries_;
};

// Golden-section maximization of g along one axis within [lo, hi].
template <class F>
double golden_max(F&& g, double lo, double hi, double& best_x) {
  constexpr double kInvPhi = 0.6180339887498949;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double g1 = g(x1), g2 = g(x2);
  for (int it = 0; it < 80 && hi - lo > 1e-13; ++it) {
    if (g1 < g2) {
      lo = x1;
      x1 = x2;
      g1 = g2;
      x2 = lo + kInvPhi * (hi - lo);
      g2 = g(x2);
    } else {
      hi = x2;
      x2 = x1;
      g2 = g1;
      x1 = hi - kInvPhi * (hi - lo);
      g1 = g(x1);
    }
  }
  best_x = g1 > g2 ? x1 : x2;
  return std::max(g1, g2);
}

}  // namespace

std::size_t PeriodicGrid::size() const {
  std::size_t s = 1;
  for (int i = 0; i < dimension; ++i) s *= static_cast<std::size_t>(points);
  return s;
}

std::array<double, kMaxDim> PeriodicGrid::node(std::size_t index) const {
  std::array<double, kMaxDim> v{};
  for (int a = dimension - 1; a >= 0; --a) {
    v[a] = static_cast<double>(index % points) / points;
    index /= points;
  }
  return v;
}

PeriodicGrid make_grid(int dimension, int points) {
  if (dimension < 1 || dimension > 2) throw PreconditionError("grid dimension must be 1 or 2");
  if (points < 4 || (points & (points - 1)) != 0)
    throw PreconditionError("grid points per axis must be a power of two >= 4");
  return PeriodicGrid{dimension, points};
}

double DensityField::mass() const {
  return grid.cell_volume() * std::accumulate(values.begin(), values.end(), 0.0);
}

double DensityField::min_value() const { return *std::min_element(values.begin(), values.end()); }

double DensityField::entropy() const {
  double s = 0.0;
  for (double v : values)
    if (v > 0.0) s += v * std::log(v);
  return grid.cell_volume() * s;
}

double InitialProfile::operator()(std::span<const double> v) const {
  double f = 1.0;
  for (const CosineMode& m : modes) {
    double theta = m.phase;
    for (int i = 0; i < dimension; ++i) theta += kTwoPi * m.wave[i] * v[i];
    f += m.amplitude * std::cos(theta);
  }
  return f;
}

double InitialProfile::lower_bound() const {
  double s = 0.0;
  for (const CosineMode& m : modes) s += std::abs(m.amplitude);
  return 1.0 - s;
}

void validate_profile(const InitialProfile& profile) {
  if (profile.dimension < 1 || profile.dimension > kMaxDim)
    throw PreconditionError("initial profile dimension must be 1..3");
  if (profile.lower_bound() < 0.5 - 1e-15)
    throw PreconditionError("initial profile: sum of |amplitude| must be <= 0.5");
  for (const CosineMode& m : profile.modes) {
    bool zero = true;
    for (int i = 0; i < profile.dimension; ++i) zero = zero && m.wave[i] == 0;
    if (zero) throw PreconditionError("initial profile: wave vectors must be nonzero");
  }
}

DensityField discretize(const InitialProfile& profile, const PeriodicGrid& grid) {
  if (profile.dimension != grid.dimension)
    throw PreconditionError("profile and grid dimensions differ");
  DensityField f;
  f.grid = grid;
  f.values.resize(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    const auto v = grid.node(j);
    f.values[j] = profile(std::span<const double>(v.data(), grid.dimension));
  }
  const double m = f.mass();
  for (double& x : f.values) x /= m;
  return f;
}

Mat ConvolvedFields::a_at(std::size_t node) const {
  const int d = grid.dimension;
  Mat m(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) m(r, c) = a[node * d * d + r * d + c];
  return m;
}

Vec ConvolvedFields::b_at(std::size_t node) const {
  const int d = grid.dimension;
  Vec v(d);
  for (int r = 0; r < d; ++r) v[r] = b[node * d + r];
  return v;
}

std::complex<double> fourier_coefficient(const DensityField& f, const WaveVector& wave) {
  Complex acc = 0.0;
  for (std::size_t j = 0; j < f.grid.size(); ++j) {
    const double theta = kTwoPi * dot_wave(wave, f.grid.node(j), f.grid.dimension);
    acc += f.values[j] * Complex(std::cos(theta), -std::sin(theta));
  }
  return acc * f.grid.cell_volume();
}

ConvolvedFields convolve(const KernelField& kernel, const DensityField& f) {
  require_resolved(kernel, f.grid);
  std::vector<std::vector<double>> cosines, sines;
  node_phases(kernel, f.grid, cosines, sines);
  std::vector<Complex> coeffs;
  for (std::size_t t = 0; t < kernel.terms().size(); ++t) {
    Complex acc = 0.0;
    for (std::size_t j = 0; j < f.grid.size(); ++j)
      acc += f.values[j] * Complex(cosines[t][j], -sines[t][j]);
    coeffs.push_back(acc * f.grid.cell_volume());
  }
  return assemble(kernel, f.grid, f.mass(), coeffs, cosines, sines);
}

MeanFieldSolver::MeanFieldSolver(KernelField kernel, PeriodicGrid grid)
    : kernel_(std::move(kernel)), grid_(grid), transform_(grid.dimension, grid.points) {
  make_grid(grid.dimension, grid.points);
  require_resolved(kernel_, grid_);
  node_phases(kernel_, grid_, node_cos_, node_sin_);
}

ConvolvedFields MeanFieldSolver::convolve(const DensityField& f) const {
  if (!(f.grid == grid_)) throw PreconditionError("density grid differs from solver grid");
  std::vector<Complex> coeffs;
  for (std::size_t t = 0; t < kernel_.terms().size(); ++t) {
    Complex acc = 0.0;
    for (std::size_t j = 0; j < grid_.size(); ++j)
      acc += f.values[j] * Complex(node_cos_[t][j], -node_sin_[t][j]);
    coeffs.push_back(acc * grid_.cell_volume());
  }
  return assemble(kernel_, grid_, f.mass(), coeffs, node_cos_, node_sin_);
}

double MeanFieldSolver::stability_limit(const DensityField& f) const {
  const double h = grid_.spacing();
  const double spread = kernel_.lambda_max() - kernel_.lambda_min();
  double limit = std::numeric_limits<double>::infinity();
  if (spread > 0.0) limit = h * h / (2.0 * grid_.dimension * spread);
  if (!kernel_.terms().empty()) {
    const ConvolvedFields conv = convolve(f);
    double bmax = 0.0;
    for (std::size_t j = 0; j < grid_.size(); ++j) bmax = std::max(bmax, conv.b_at(j).norm());
    if (bmax > 0.0) limit = std::min(limit, h / bmax);
  }
  return limit;
}

std::vector<std::vector<double>> MeanFieldSolver::gradient(const DensityField& f) const {
  const int d = grid_.dimension;
  std::vector<Complex> spec(transform_.spectral_size()), work(transform_.spectral_size());
  transform_.forward(f.values, spec);
  std::vector<std::vector<double>> grad(d, std::vector<double>(grid_.size()));
  for (int a = 0; a < d; ++a) {
    for (std::size_t idx = 0; idx < spec.size(); ++idx) {
      work[idx] = transform_.nyquist(idx, a)
                      ? Complex(0.0)
                      : Complex(0.0, kTwoPi * transform_.wave(idx, a)) * spec[idx];
    }
    transform_.backward(work, grad[a]);
  }
  return grad;
}

DensityField MeanFieldSolver::step(const DensityField& f, double dt, StepReport* report) const {
  if (!(f.grid == grid_)) throw PreconditionError("density grid differs from solver grid");
  if (dt < 0.0) throw PreconditionError("negative time step");
  if (dt == 0.0) return f;

  const int d = grid_.dimension;
  const std::size_t size = grid_.size();
  const std::size_t nspec = transform_.spectral_size();
  const double lmax = kernel_.lambda_max();

  const ConvolvedFields conv = convolve(f);
  {
    const double h = grid_.spacing();
    const double spread = kernel_.lambda_max() - kernel_.lambda_min();
    double limit = spread > 0.0 ? h * h / (2.0 * d * spread) : std::numeric_limits<double>::infinity();
    double bmax = 0.0;
    for (std::size_t j = 0; j < size; ++j) bmax = std::max(bmax, conv.b_at(j).norm());
    if (bmax > 0.0) limit = std::min(limit, h / bmax);
    if (dt > limit * (1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "time step " << dt << " exceeds stability limit " << limit;
      throw StabilityError(msg.str());
    }
  }

  std::vector<Complex> spec(nspec), work(nspec), remainder(nspec, Complex(0.0));
  transform_.forward(f.values, spec);

  std::vector<std::vector<double>> grad(d, std::vector<double>(size));
  for (int a = 0; a < d; ++a) {
    for (std::size_t idx = 0; idx < nspec; ++idx)
      work[idx] = transform_.nyquist(idx, a)
                      ? Complex(0.0)
                      : Complex(0.0, kTwoPi * transform_.wave(idx, a)) * spec[idx];
    transform_.backward(work, grad[a]);
  }

  // Explicit flux (a*f - lmax Id) grad f - (b*f) f, then its spectral divergence.
  std::vector<double> flux(size);
  for (int a = 0; a < d; ++a) {
    for (std::size_t j = 0; j < size; ++j) {
      double s = -conv.b[j * d + a] * f.values[j];
      for (int c = 0; c < d; ++c) {
        const double coef = conv.a[j * d * d + a * d + c] - (a == c ? lmax : 0.0);
        s += coef * grad[c][j];
      }
      flux[j] = s;
    }
    transform_.forward(flux, work);
    for (std::size_t idx = 0; idx < nspec; ++idx)
      if (!transform_.nyquist(idx, a))
        remainder[idx] += Complex(0.0, kTwoPi * transform_.wave(idx, a)) * work[idx];
  }

  // Exponential Euler: exact decay for lmax * Laplacian, remainder frozen over the step.
  for (std::size_t idx = 0; idx < nspec; ++idx) {
    const double rate = lmax * kTwoPi * kTwoPi * transform_.wave_norm2(idx);
    const double decay = std::exp(-rate * dt);
    const double phi = rate > 0.0 ? -std::expm1(-rate * dt) / rate : dt;
    work[idx] = decay * spec[idx] + phi * remainder[idx];
  }

  DensityField out;
  out.grid = grid_;
  out.time = f.time + dt;
  out.values.resize(size);
  transform_.backward(work, out.values);

  StepReport local;
  for (double& v : out.values) {
    if (v < -kNegativeTolerance) {
      std::ostringstream msg;
      msg << "negative density " << v << " at t=" << out.time << " (dt=" << dt
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

std::vector<DensityField> MeanFieldSolver::solve(const DensityField& f0, double horizon, double dt,
                                                 std::span<const double> snapshot_times) const {
  if (!(dt > 0.0)) throw PreconditionError("solve: dt must be positive");
  if (horizon < 0.0) throw PreconditionError("solve: horizon must be nonnegative");
  if (f0.min_value() <= 0.0) throw PreconditionError("solve: initial density must be positive");
  if (std::abs(f0.mass() - 1.0) > 1e-8) throw PreconditionError("solve: initial density not normalized");

  std::vector<double> targets(snapshot_times.begin(), snapshot_times.end());
  if (targets.empty()) targets.push_back(horizon);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0.0 || targets[i] > horizon * (1.0 + 1e-12))
      throw PreconditionError("solve: snapshot time outside [0, horizon]");
    if (i > 0 && targets[i] < targets[i - 1])
      throw PreconditionError("solve: snapshot times must be sorted");
  }

  std::vector<DensityField> out;
  DensityField f = f0;
  const double start = f0.time;
  std::uint64_t steps = 0;
  double elapsed = 0.0;
  for (double target : targets) {
    while (target - elapsed > 1e-14 * std::max(1.0, target)) {
      double h = std::min(dt, stability_limit(f));
      if (target - elapsed <= h * (1.0 + 1e-9)) h = target - elapsed;
      f = step(f, h);
      ++steps;
      elapsed += h;
    }
    f.time = start + target;
    elapsed = target;
    out.push_back(f);
  }
  return out;
}

double log_gradient_bound(const DensityField& f) {
  if (f.min_value() <= 0.0) throw PreconditionError("log_gradient_bound: density must be positive");
  const int d = f.grid.dimension;
  const int n = f.grid.points;
  TrigInterpolant interp(f);

  // Coarse scan on a 4x refined lattice, then golden-section refinement
  // around the best few lattice points.
  const int fine = 4 * n;
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(fine);
  std::vector<std::pair<double, std::size_t>> scores;
  scores.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::array<double, kMaxDim> x{};
    std::size_t rest = idx;
    for (int a = d - 1; a >= 0; --a) {
      x[a] = static_cast<double>(rest % fine) / fine;
      rest /= fine;
    }
    scores.emplace_back(interp.log_gradient(x), idx);
  }
  const std::size_t keep = std::min<std::size_t>(8, scores.size());
  std::partial_sort(scores.begin(), scores.begin() + keep, scores.end(),
                    [](const auto& l, const auto& r) { return l.first > r.first; });

  double best = scores.front().first;
  const double cell = 1.0 / fine;
  for (std::size_t c = 0; c < keep; ++c) {
    std::array<double, kMaxDim> x{};
    std::size_t rest = scores[c].second;
    for (int a = d - 1; a >= 0; --a) {
      x[a] = static_cast<double>(rest % fine) / fine;
      rest /= fine;
    }
    double value = scores[c].first;
    // Coordinate ascent; one sweep suffices in 1D, a few in 2D.
    for (int sweep = 0; sweep < (d == 1 ? 1 : 6); ++sweep) {
      for (int a = 0; a < d; ++a) {
        auto g = [&](double t) {
          auto y = x;
          y[a] = t;
          return interp.log_gradient(y);
        };
        double arg = x[a];
        const double v = golden_max(g, x[a] - cell, x[a] + cell, arg);
        if (v > value) {
          value = v;
          x[a] = arg;
        }
      }
    }
    best = std::max(best, value);
  }
  return best;
}

}  // namespace chaoslab
