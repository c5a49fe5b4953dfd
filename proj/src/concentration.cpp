#include "chaoslab/concentration.hpp"

#include "chaoslab/rng.hpp"
#include "chaoslab/sampling.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

namespace chaoslab {

namespace {

std::size_t int_pow(int base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) r *= static_cast<std::size_t>(base);
  return r;
}

// Sequential uniforms from one stream.
class UniformDraws {
 public:
  explicit UniformDraws(rng::StreamAddress addr) : addr_(addr) {}
  double next() {
    if (slot_ == 2) {
      pair_ = rng::uniform_pair(addr_, index_++);
      slot_ = 0;
    }
    return pair_[slot_++];
  }

 private:
  rng::StreamAddress addr_;
  std::uint32_t index_ = 0;
  std::array<double, 2> pair_{};
  int slot_ = 2;
};

constexpr double kPsiCeiling = 1.0 / (2.0 * std::numbers::e);

}  // namespace

ChangeOfMeasureResult change_of_measure_check(const DiscreteSpace& space, double eta) {
  if (!(eta > 0.0)) throw PreconditionError("change_of_measure_check: eta must be positive");
  const int s = space.outcomes, n = space.particles;
  if (s < 1 || n < 1) throw PreconditionError("change_of_measure_check: empty space");
  const std::size_t total = int_pow(s, n);
  if (space.joint.size() != total || space.test_function.size() != total ||
      space.reference.size() != static_cast<std::size_t>(s))
    throw PreconditionError("change_of_measure_check: vector sizes do not match s^N");

  // Product reference and exhaustive sums.
  std::vector<double> product(total, 1.0);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    for (int a = 0; a < n; ++a) {
      product[idx] *= space.reference[rest % s];
      rest /= s;
    }
  }

  ChangeOfMeasureResult r;
  double kl = 0.0;
  for (std::size_t i = 0; i < total; ++i) {
    const double p = space.joint[i];
    r.lhs += p * space.test_function[i];
    if (p <= 0.0) continue;
    if (product[i] <= 0.0)
      throw PreconditionError("change_of_measure_check: joint law not dominated by reference");
    kl += p * std::log(p / product[i]);
  }
  r.relative_entropy = kl / n;

  // (1/N) log sum q^N exp(N eta Phi), stabilized by the largest exponent.
  double shift = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < total; ++i)
    if (product[i] > 0.0) shift = std::max(shift, n * eta * space.test_function[i]);
  double acc = 0.0;
  for (std::size_t i = 0; i < total; ++i)
    if (product[i] > 0.0) acc += product[i] * std::exp(n * eta * space.test_function[i] - shift);
  const double log_moment = (shift + std::log(acc)) / n;

  r.rhs = (r.relative_entropy + log_moment) / eta;
  r.holds = r.lhs <= r.rhs + 1e-12;
  return r;
}

DiscreteInstance random_discrete_instance(std::uint64_t seed, std::uint32_t index, int max_outcomes,
                                          int max_particles) {
  UniformDraws u(rng::StreamAddress{seed, index, 0, rng::Purpose::kInstance});
  DiscreteInstance inst;
  DiscreteSpace& sp = inst.space;
  sp.outcomes = 2 + static_cast<int>(u.next() * (max_outcomes - 1));
  sp.particles = 1 + static_cast<int>(u.next() * max_particles);
  sp.outcomes = std::min(sp.outcomes, max_outcomes);
  sp.particles = std::min(sp.particles, max_particles);
  const std::size_t total = int_pow(sp.outcomes, sp.particles);

  sp.reference.resize(sp.outcomes);
  double qs = 0.0;
  for (double& q : sp.reference) {
    q = 0.05 + u.next();
    qs += q;
  }
  for (double& q : sp.reference) q /= qs;

  sp.joint.resize(total);
  double ps = 0.0;
  for (double& p : sp.joint) {
    const double w = u.next();
    p = u.next() < 0.2 ? 0.0 : w * w * w;
    ps += p;
  }
  if (ps == 0.0) {
    sp.joint[0] = 1.0;
    ps = 1.0;
  }
  for (double& p : sp.joint) p /= ps;

  sp.test_function.resize(total);
  for (double& phi : sp.test_function) phi = 4.0 * u.next() - 2.0;
  inst.eta = std::exp(std::log(0.05) + u.next() * std::log(100.0));
  return inst;
}

double PsiFunction::convolution(std::span<const double> z) const {
  double s = mass_constant_;
  for (const Term& t : terms_) {
    double theta = 0.0;
    for (int a = 0; a < dim_; ++a) theta += t.angular[a] * z[a];
    const double c = std::cos(theta), sn = std::sin(theta);
    const double re = c * t.fourier.real() - sn * t.fourier.imag();
    const double im = sn * t.fourier.real() + c * t.fourier.imag();
    s += t.coeff * (entry_.drift ? im : re);
  }
  return s;
}

double PsiFunction::entry_value(std::span<const double> z) const {
  double s = constant_;
  for (const Term& t : terms_) {
    double theta = 0.0;
    for (int a = 0; a < dim_; ++a) theta += t.angular[a] * z[a];
    s += t.coeff * (entry_.drift ? std::sin(theta) : std::cos(theta));
  }
  return s;
}

double PsiFunction::operator()(std::span<const double> z, std::span<const double> v) const {
  double w[kMaxDim];
  for (int a = 0; a < dim_; ++a) w[a] = z[a] - v[a];
  return scale_ * (convolution(z) - entry_value(std::span<const double>(w, dim_)));
}

PsiFunction PsiFunction::rescaled_to(double target) const {
  PsiFunction out = *this;
  const double unit_sup = sup_norm_ / scale_;
  if (unit_sup <= 0.0) return out;
  out.scale_ = target / unit_sup;
  out.eta_ = out.scale_ * out.scale_;
  out.sup_norm_ = target;
  out.certified_ = certified_ / scale_ * out.scale_;
  out.centering_ = centering_ / scale_ * out.scale_;
  return out;
}

PsiFunction build_psi(const KernelField& kernel, const DensityField& f, PsiEntry entry) {
  const int d = kernel.dimension();
  if (f.grid.dimension != d) throw PreconditionError("build_psi: density and kernel dimensions differ");
  if (entry.alpha < 0 || entry.alpha >= d || entry.beta < 0 || entry.beta >= d)
    throw PreconditionError("build_psi: entry index out of range");
  if (std::abs(f.mass() - 1.0) > 1e-8) throw PreconditionError("build_psi: density not normalized");

  PsiFunction psi;
  psi.dim_ = d;
  psi.entry_ = entry;
  if (!entry.drift && entry.alpha == entry.beta) {
    psi.constant_ = kernel.base_level();
    psi.mass_constant_ = kernel.base_level() * f.mass();
  }
  double unit_bound = 0.0;
  for (const KernelTerm& kt : kernel.terms()) {
    PsiFunction::Term t;
    t.angular = kt.angular;
    t.coeff = entry.drift ? kt.b_coeff[entry.alpha] : kt.coeff(entry.alpha, entry.beta);
    t.fourier = fourier_coefficient(f, kt.wave);
    if (t.coeff == 0.0) continue;
    unit_bound += std::abs(t.coeff) * (1.0 + std::abs(t.fourier));
    psi.terms_.push_back(t);
  }

  // Unit-scale extremes of g = c*f and c over a 4x refined lattice; since
  // psi/sqrt(eta) = g(z) - c(w) with z, w independent, the sup is separable.
  const int fine = 4 * f.grid.points;
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(fine);
  double gmin = std::numeric_limits<double>::infinity(), gmax = -gmin;
  double cmin = gmin, cmax = -gmin;
  for (std::size_t idx = 0; idx < total; ++idx) {
    double z[kMaxDim];
    std::size_t rest = idx;
    for (int a = d - 1; a >= 0; --a) {
      z[a] = static_cast<double>(rest % fine) / fine;
      rest /= fine;
    }
    const std::span<const double> zs(z, d);
    const double g = psi.convolution(zs);
    const double c = psi.entry_value(zs);
    gmin = std::min(gmin, g);
    gmax = std::max(gmax, g);
    cmin = std::min(cmin, c);
    cmax = std::max(cmax, c);
  }
  const double unit_sup = std::max(std::abs(gmax - cmin), std::abs(cmax - gmin));

  if (unit_bound == 0.0) {
    psi.eta_ = 1.0;
  } else {
    psi.eta_ = 1.0;
    while (std::sqrt(psi.eta_) * unit_bound >= kPsiCeiling - 1e-6) psi.eta_ *= 0.5;
  }
  psi.scale_ = std::sqrt(psi.eta_);
  psi.sup_norm_ = psi.scale_ * unit_sup;
  psi.certified_ = psi.scale_ * unit_bound;

  // Centering: int psi(z, v) f(v) dv at every node z, by grid quadrature.
  double worst = 0.0;
  for (std::size_t zi = 0; zi < f.grid.size(); ++zi) {
    const auto z = f.grid.node(zi);
    double acc = 0.0;
    for (std::size_t vi = 0; vi < f.grid.size(); ++vi) {
      const auto v = f.grid.node(vi);
      acc += psi(std::span<const double>(z.data(), d), std::span<const double>(v.data(), d)) *
             f.values[vi];
    }
    worst = std::max(worst, std::abs(acc * f.grid.cell_volume()));
  }
  psi.centering_ = worst;
  return psi;
}

MomentStudy exp_moment_check(const PsiFunction& psi, const DensityField& f,
                             std::span<const std::size_t> ladder, std::size_t samples,
                             std::uint64_t seed, unsigned workers) {
  if (ladder.empty() || samples < 2) throw PreconditionError("exp_moment_check: empty ladder or too few samples");
  const DensitySampler sampler(f);
  const int d = f.grid.dimension;
  constexpr std::size_t kBatch = 1000;
  const std::size_t batches = (samples + kBatch - 1) / kBatch;

  MomentStudy study;
  for (std::size_t li = 0; li < ladder.size(); ++li) {
    const std::size_t n = ladder[li];
    if (n < 1) throw PreconditionError("exp_moment_check: N must be >= 1");
    std::vector<double> batch_sum(batches, 0.0), batch_sq(batches, 0.0);
    const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));

    auto run_batch = [&](std::size_t b) {
      const rng::StreamAddress addr{seed, static_cast<std::uint32_t>(li),
                                    static_cast<std::uint32_t>(b), rng::Purpose::kMonteCarlo};
      std::uint32_t counter = 0;
      const std::size_t begin = b * kBatch;
      const std::size_t end = std::min(samples, begin + kBatch);
      double v1[kMaxDim], vj[kMaxDim];
      double sum = 0.0, sq = 0.0;
      for (std::size_t m = begin; m < end; ++m) {
        counter += sampler.sample(addr, counter, std::span<double>(v1, d));
        const std::span<const double> z(v1, d);
        double total = psi(z, z);
        for (std::size_t j = 1; j < n; ++j) {
          counter += sampler.sample(addr, counter, std::span<double>(vj, d));
          total += psi(z, std::span<const double>(vj, d));
        }
        const double x = total * inv_sqrt_n;
        const double value = std::exp(x * x);
        sum += value;
        sq += value * value;
      }
      batch_sum[b] = sum;
      batch_sq[b] = sq;
    };

    const unsigned threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(batches)));
    if (threads == 1) {
      for (std::size_t b = 0; b < batches; ++b) run_batch(b);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::thread> pool;
      for (unsigned w = 0; w < threads; ++w)
        pool.emplace_back([&] {
          for (std::size_t b = next++; b < batches; b = next++) run_batch(b);
        });
      for (auto& t : pool) t.join();
    }

    double sum = 0.0, sq = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      sum += batch_sum[b];
      sq += batch_sq[b];
    }
    const double count = static_cast<double>(samples);
    const double mean = sum / count;
    const double var = std::max(0.0, (sq / count - mean * mean) * count / (count - 1.0));
    study.estimates.push_back({n, mean, std::sqrt(var / count)});
  }

  const auto by_n = [](const MomentEstimate& l, const MomentEstimate& r) { return l.particles < r.particles; };
  const auto lo = *std::min_element(study.estimates.begin(), study.estimates.end(), by_n);
  const auto hi = *std::max_element(study.estimates.begin(), study.estimates.end(), by_n);
  const double combined = std::sqrt(hi.standard_error * hi.standard_error +
                                    4.0 * lo.standard_error * lo.standard_error);
  study.bounded = hi.mean <= 2.0 * lo.mean + 5.0 * combined;
  study.above_one = std::all_of(study.estimates.begin(), study.estimates.end(), [](const auto& e) {
    return e.mean >= 1.0 - 3.0 * e.standard_error;
  });
  return study;
}

}  // namespace chaoslab
