#include "chaoslab/chaos.hpp"

#include "chaoslab/fft.hpp"
#include "chaoslab/particles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace chaoslab {

namespace {

using Complex = std::complex<double>;

// int_{x0}^{x1} exp(2 pi i k x) dx
Complex segment_integral(int k, double x0, double x1) {
  if (k == 0) return {x1 - x0, 0.0};
  const double w = kTwoPi * k;
  const Complex e1(std::cos(w * x1), std::sin(w * x1));
  const Complex e0(std::cos(w * x0), std::sin(w * x0));
  return (e1 - e0) / Complex(0.0, w);
}

}  // namespace

std::vector<double> EmpiricalDensity::density() const {
  std::vector<double> d(mass.size());
  const double inv = 1.0 / bin_volume();
  for (std::size_t i = 0; i < mass.size(); ++i) d[i] = mass[i] * inv;
  return d;
}

EmpiricalDensity histogram(std::span<const double> samples, int dimension, int bins) {
  if (dimension < 1 || dimension > kMaxDim) throw PreconditionError("histogram: dimension must be 1..3");
  if (bins < 4) throw PreconditionError("histogram: need at least 4 bins");
  if (samples.empty() || samples.size() % dimension != 0)
    throw PreconditionError("histogram: empty or ragged sample set");
  EmpiricalDensity h;
  h.dimension = dimension;
  h.bins = bins;
  h.samples = samples.size() / dimension;
  std::size_t total = 1;
  for (int a = 0; a < dimension; ++a) total *= static_cast<std::size_t>(bins);
  std::vector<std::size_t> counts(total, 0);
  for (std::size_t s = 0; s < h.samples; ++s) {
    std::size_t cell = 0;
    for (int a = 0; a < dimension; ++a) {
      const double x = wrap_unit(samples[s * dimension + a]);
      const int b = std::min(bins - 1, static_cast<int>(x * bins));
      cell = cell * bins + static_cast<std::size_t>(b);
    }
    ++counts[cell];
  }
  h.mass.resize(total);
  for (std::size_t c = 0; c < total; ++c)
    h.mass[c] = static_cast<double>(counts[c]) / static_cast<double>(h.samples);
  return h;
}

std::vector<double> bin_masses(const DensityField& f, int bins) {
  const int d = f.grid.dimension;
  const int n = f.grid.points;
  if (bins < 1) throw PreconditionError("bin_masses: need at least one bin");
  SpectralTransform tr(d, n);
  std::vector<Complex> spec(tr.spectral_size());
  tr.forward(f.values, spec);
  const double scale = 1.0 / static_cast<double>(tr.real_size());

  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(bins);
  std::vector<double> out(total, 0.0);
  const double width = 1.0 / bins;
  for (std::size_t idx = 0; idx < spec.size(); ++idx) {
    bool nyq = false;
    for (int a = 0; a < d; ++a) nyq = nyq || tr.nyquist(idx, a);
    if (nyq) continue;
    const Complex c = spec[idx] * scale * (tr.wave(idx, d - 1) == 0 ? 1.0 : 2.0);
    if (std::abs(c) == 0.0) continue;
    for (std::size_t cell = 0; cell < total; ++cell) {
      Complex integral(1.0, 0.0);
      std::size_t rest = cell;
      for (int a = d - 1; a >= 0; --a) {
        const int b = static_cast<int>(rest % static_cast<std::size_t>(bins));
        rest /= static_cast<std::size_t>(bins);
        integral *= segment_integral(tr.wave(idx, a), b * width, (b + 1) * width);
      }
      out[cell] += (c * integral).real();
    }
  }
  return out;
}

double l1_distance(std::span<const double> g1, std::span<const double> g2, double cell_volume) {
  if (g1.size() != g2.size()) throw PreconditionError("l1_distance: grids differ");
  double s = 0.0;
  for (std::size_t i = 0; i < g1.size(); ++i) s += std::abs(g1[i] - g2[i]);
  return s * cell_volume;
}

double l1_distance(const EmpiricalDensity& g1, const EmpiricalDensity& g2) {
  if (g1.dimension != g2.dimension || g1.bins != g2.bins)
    throw PreconditionError("l1_distance: histogram bins differ");
  return l1_distance(g1.mass, g2.mass, 1.0);
}

double binomial_l1_error(std::span<const double> reference_masses, std::size_t samples) {
  if (samples == 0) throw PreconditionError("binomial_l1_error: need samples");
  const double k = std::sqrt(2.0 / std::numbers::pi);
  double s = 0.0;
  for (double q : reference_masses) {
    const double p = std::clamp(q, 0.0, 1.0);
    s += k * std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
  }
  return s;
}

double discrete_relative_entropy(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw PreconditionError("discrete_relative_entropy: sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    s += p[i] * std::log(p[i] / q[i]);
  }
  return s;
}

CkpAudit ckp_audit(double l1, double relative_entropy, int order) {
  CkpAudit audit;
  audit.l1 = l1;
  audit.bound = std::sqrt(std::max(0.0, 2.0 * order * relative_entropy));
  audit.holds = l1 <= audit.bound + 1e-10;
  return audit;
}

CkpAudit ckp_audit(std::span<const double> g1, std::span<const double> g2, double cell_volume,
                   double relative_entropy, int order) {
  return ckp_audit(l1_distance(g1, g2, cell_volume), relative_entropy, order);
}

PowerLawFit fit_power_law(std::span<const double> n, std::span<const double> error) {
  if (n.size() != error.size() || n.size() < 2)
    throw PreconditionError("fit_power_law: need at least two (n, error) pairs");
  const std::size_t r = n.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    if (!(n[i] > 0.0) || !(error[i] > 0.0))
      throw PreconditionError("fit_power_law: values must be positive");
    mx += std::log(n[i]);
    my += std::log(error[i]);
  }
  mx /= r;
  my /= r;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    const double dx = std::log(n[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(error[i]) - my);
  }
  if (sxx == 0.0) throw PreconditionError("fit_power_law: all n are equal");
  PowerLawFit fit;
  fit.points = r;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (r > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
      const double res = std::log(error[i]) - (fit.intercept + fit.slope * std::log(n[i]));
      rss += res * res;
    }
    fit.slope_stderr = std::sqrt(rss / static_cast<double>(r - 2) / sxx);
  } else {
    fit.slope_stderr = std::numeric_limits<double>::infinity();
  }
  return fit;
}

double student_t_975(std::size_t dof) {
  static constexpr double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306,
                                     2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
                                     2.110,  2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
                                     2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
  if (dof == 0) return std::numeric_limits<double>::infinity();
  if (dof <= 30) return table[dof - 1];
  return 1.96;
}

int study_bins(const ChaosStudyConfig& cfg) {
  if (cfg.ladder.empty()) throw PreconditionError("chaos study: empty N ladder");
  const std::size_t n_min = *std::min_element(cfg.ladder.begin(), cfg.ladder.end());
  const double cap = std::floor(std::cbrt(static_cast<double>(cfg.replicas * n_min)) + 1e-9);
  return std::max(4, std::min({cfg.bins, cfg.pde_points / 2, static_cast<int>(cap)}));
}

void fit_report(ChaosStudyReport& report) {
  std::vector<double> ns, errs;
  for (const ChaosRow& row : report.rows) {
    if (!row.included) continue;
    ns.push_back(static_cast<double>(row.particles));
    errs.push_back(row.l1_error);
  }
  report.fit_available = ns.size() >= 2;
  if (!report.fit_available) return;
  report.fit = fit_power_law(ns, errs);
  const double half = student_t_975(report.fit.points - 2) * report.fit.slope_stderr;
  report.slope_ci_low = report.fit.slope - half;
  report.slope_ci_high = report.fit.slope + half;
}

ChaosStudyReport marginal_error_study(const ChaosStudyConfig& cfg) {
  validate_profile(cfg.initial);
  if (cfg.initial.dimension != 1 || cfg.kernel.dimension != 1)
    throw PreconditionError("chaos study runs in d = 1");
  const KernelField kernel = build_kernel(cfg.kernel);
  const PeriodicGrid grid = make_grid(1, cfg.pde_points);
  const DensityField f0 = discretize(cfg.initial, grid);
  const MeanFieldSolver pde(kernel, grid);
  const DensityField f_final = pde.solve(f0, cfg.horizon, cfg.pde_dt).back();

  const int bins = study_bins(cfg);
  const std::vector<double> reference = bin_masses(f_final, bins);

  ChaosStudyReport report;
  for (std::size_t n : cfg.ladder) {
    EnsembleConfig ens;
    ens.replicas = cfg.replicas;
    ens.particles = n;
    ens.dt = cfg.particle_dt;
    ens.horizon = cfg.horizon;
    ens.seed = cfg.seed;
    const EnsembleResult result = run_ensemble(ens, kernel, f0, cfg.workers);
    const EmpiricalDensity hist = histogram(result.positions.back(), 1, bins);

    ChaosRow row;
    row.particles = n;
    row.replicas = cfg.replicas;
    row.horizon = cfg.horizon;
    row.bins = bins;
    row.l1_error = l1_distance(hist.mass, reference, 1.0);
    row.standard_error = binomial_l1_error(reference, hist.samples);
    row.seed = cfg.seed;
    row.config_hash = cfg.config_hash;
    row.included = row.standard_error < row.l1_error / 3.0;
    if (!row.included) row.exclusion_reason = "statistical error >= measured error / 3";
    report.rows.push_back(row);
  }
  fit_report(report);
  return report;
}

bool slope_within(const ChaosStudyReport& report, double low, double high) {
  return report.fit_available && report.fit.slope >= low && report.fit.slope <= high;
}

bool no_significant_trend(const ChaosStudyReport& report, double threshold) {
  return !report.fit_available || report.slope_ci_high >= threshold;
}

NhReport nh_boundedness_check(std::span<const EntropySeries> series) {
  NhReport out;
  out.initial_ok = true;
  out.finite = true;
  out.nonnegative = true;
  std::vector<double> ts, logs;
  for (const EntropySeries& s : series) {
    if (s.times.size() != s.entropy.size() || s.times.empty())
      throw PreconditionError("nh_boundedness_check: malformed series");
    double mx = 0.0;
    for (std::size_t i = 0; i < s.times.size(); ++i) {
      const double scaled = s.particles * s.entropy[i];
      if (!std::isfinite(scaled)) out.finite = false;
      if (s.entropy[i] < -1e-10) out.nonnegative = false;
      mx = std::max(mx, scaled);
      if (s.times[i] > 0.0 && scaled > 1e-14) {
        ts.push_back(s.times[i]);
        logs.push_back(std::log(scaled));
      }
    }
    out.max_scaled.push_back(mx);
    out.initial.push_back(s.entropy.front());
    if (std::abs(s.entropy.front()) > 1e-10) out.initial_ok = false;
  }
  if (!out.max_scaled.empty()) {
    const auto [lo, hi] = std::minmax_element(out.max_scaled.begin(), out.max_scaled.end());
    out.envelope_ratio = *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
  }
  if (ts.size() >= 2) {
    double mt = 0.0, ml = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      mt += ts[i];
      ml += logs[i];
    }
    mt /= ts.size();
    ml /= ts.size();
    double stt = 0.0, stl = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      stt += (ts[i] - mt) * (ts[i] - mt);
      stl += (ts[i] - mt) * (logs[i] - ml);
    }
    out.c2 = stt > 0.0 ? stl / stt : 0.0;
    out.c1 = std::exp(ml - out.c2 * mt);
  }
  return out;
}

}  // namespace chaoslab
