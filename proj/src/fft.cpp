#include "chaoslab/fft.hpp"

#include "chaoslab/types.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <mutex>

namespace chaoslab {

namespace {
// The FFTW planner is not thread-safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct SpectralTransform::Plans {
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  // Executions reuse the shared buffers, so one transform object must not be
  // driven from two threads at once.
  std::mutex exec;

  ~Plans() {
    std::lock_guard lock(planner_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
    if (real) fftw_free(real);
    if (spec) fftw_free(spec);
  }
};

SpectralTransform::SpectralTransform(int rank, int n) : rank_(rank), n_(n) {
  if (rank < 1 || rank > 3) throw PreconditionError("SpectralTransform: rank must be 1..3");
  if (n < 2 || n % 2 != 0) throw PreconditionError("SpectralTransform: n must be even and >= 2");
  real_size_ = 1;
  spectral_size_ = 1;
  for (int a = 0; a < rank; ++a) {
    real_size_ *= static_cast<std::size_t>(n);
    spectral_size_ *= static_cast<std::size_t>(a + 1 == rank ? n / 2 + 1 : n);
  }

  waves_.resize(spectral_size_ * static_cast<std::size_t>(rank));
  norm2_.resize(spectral_size_);
  const int half = n / 2 + 1;
  for (std::size_t idx = 0; idx < spectral_size_; ++idx) {
    std::size_t rest = idx;
    double n2 = 0.0;
    for (int a = rank - 1; a >= 0; --a) {
      const int len = (a + 1 == rank) ? half : n;
      const int j = static_cast<int>(rest % static_cast<std::size_t>(len));
      rest /= static_cast<std::size_t>(len);
      const int k = (a + 1 == rank) ? j : (j <= n / 2 ? j : j - n);
      waves_[idx * rank + a] = k;
      n2 += static_cast<double>(k) * k;
    }
    norm2_[idx] = n2;
  }

  plans_ = std::make_unique<Plans>();
  std::lock_guard lock(planner_mutex());
  plans_->real = fftw_alloc_real(real_size_);
  plans_->spec = fftw_alloc_complex(spectral_size_);
  int dims[3] = {n, n, n};
  plans_->fwd = fftw_plan_dft_r2c(rank, dims, plans_->real, plans_->spec, FFTW_ESTIMATE);
  plans_->bwd = fftw_plan_dft_c2r(rank, dims, plans_->spec, plans_->real, FFTW_ESTIMATE);
  if (!plans_->fwd || !plans_->bwd) throw Error("SpectralTransform: FFTW planning failed");
}

SpectralTransform::~SpectralTransform() = default;
SpectralTransform::SpectralTransform(SpectralTransform&&) noexcept = default;
SpectralTransform& SpectralTransform::operator=(SpectralTransform&&) noexcept = default;

void SpectralTransform::forward(std::span<const double> in,
                                std::span<std::complex<double>> out) const {
  if (in.size() != real_size_ || out.size() != spectral_size_)
    throw PreconditionError("SpectralTransform::forward: size mismatch");
  std::lock_guard lock(plans_->exec);
  std::copy(in.begin(), in.end(), plans_->real);
  fftw_execute(plans_->fwd);
  std::memcpy(static_cast<void*>(out.data()), plans_->spec, spectral_size_ * sizeof(fftw_complex));
}

void SpectralTransform::backward(std::span<const std::complex<double>> in,
                                 std::span<double> out) const {
  if (in.size() != spectral_size_ || out.size() != real_size_)
    throw PreconditionError("SpectralTransform::backward: size mismatch");
  std::lock_guard lock(plans_->exec);
  // c2r destroys its input, so it always works on the internal copy.
  std::memcpy(plans_->spec, in.data(), spectral_size_ * sizeof(fftw_complex));
  fftw_execute(plans_->bwd);
  const double scale = 1.0 / static_cast<double>(real_size_);
  for (std::size_t i = 0; i < real_size_; ++i) out[i] = plans_->real[i] * scale;
}

}  // namespace chaoslab
