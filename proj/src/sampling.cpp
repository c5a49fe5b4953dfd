#include "chaoslab/sampling.hpp"

#include <algorithm>
#include <cmath>

namespace chaoslab {

DensitySampler::DensitySampler(const DensityField& density)
    : grid_(density.grid), values_(density.values) {
  if (grid_.dimension > 2) throw PreconditionError("DensitySampler supports d = 1, 2");
  for (double v : values_)
    if (v < 0.0) throw PreconditionError("DensitySampler: negative density value");
  max_value_ = *std::max_element(values_.begin(), values_.end());
  if (grid_.dimension == 1) {
    const int n = grid_.points;
    const double h = grid_.spacing();
    cumulative_.assign(n + 1, 0.0);
    for (int j = 0; j < n; ++j)
      cumulative_[j + 1] = cumulative_[j] + 0.5 * h * (values_[j] + values_[(j + 1) % n]);
  }
}

double DensitySampler::inverse_cdf(double u) const {
  const int n = grid_.points;
  const double h = grid_.spacing();
  const double target = std::clamp(u, 0.0, 1.0) * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
  int cell = static_cast<int>(it - cumulative_.begin()) - 1;
  cell = std::clamp(cell, 0, n - 1);
  const double r = target - cumulative_[cell];
  const double f0 = values_[cell];
  const double slope = (values_[(cell + 1) % n] - f0) / h;
  // Solve f0 s + slope s^2 / 2 = r for s in [0, h] (cancellation-free root).
  const double disc = std::max(0.0, f0 * f0 + 2.0 * slope * r);
  const double denom = f0 + std::sqrt(disc);
  const double s = denom > 0.0 ? 2.0 * r / denom : 0.0;
  return wrap_unit(cell * h + std::clamp(s, 0.0, h));
}

double DensitySampler::interpolate(double x, double y) const {
  const int n = grid_.points;
  const double gx = x * n, gy = y * n;
  const int i0 = static_cast<int>(std::floor(gx)) % n;
  const int j0 = static_cast<int>(std::floor(gy)) % n;
  const double tx = gx - std::floor(gx), ty = gy - std::floor(gy);
  const int i1 = (i0 + 1) % n, j1 = (j0 + 1) % n;
  auto at = [&](int i, int j) { return values_[static_cast<std::size_t>(i) * n + j]; };
  return (1 - tx) * (1 - ty) * at(i0, j0) + tx * (1 - ty) * at(i1, j0) +
         (1 - tx) * ty * at(i0, j1) + tx * ty * at(i1, j1);
}

std::uint32_t DensitySampler::sample(const rng::StreamAddress& addr, std::uint32_t first_index,
                                     std::span<double> out) const {
  if (grid_.dimension == 1) {
    out[0] = inverse_cdf(rng::uniform_pair(addr, first_index)[0]);
    return 1;
  }
  for (std::uint32_t attempt = 0;; ++attempt) {
    const auto xy = rng::uniform_pair(addr, first_index + attempt, 0);
    const auto u = rng::uniform_pair(addr, first_index + attempt, 1);
    if (u[0] * max_value_ <= interpolate(xy[0], xy[1])) {
      out[0] = xy[0];
      out[1] = xy[1];
      return attempt + 1;
    }
  }
}

}  // namespace chaoslab
