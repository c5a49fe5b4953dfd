#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace chaoslab {

/// Real-to-complex discrete Fourier transform on a rank-D periodic grid with n
/// points per axis. Spectral layout is FFTW's half-complex layout: the last
/// axis stores wave numbers 0..n/2.
///
/// forward() computes sum_j f_j exp(-2 pi i k.j/n) (unnormalized); backward()
/// is its exact inverse (includes the 1/n^D factor). Plans are built with
/// FFTW_ESTIMATE so results are bit-reproducible run to run.
class SpectralTransform {
 public:
  SpectralTransform(int rank, int n);
  ~SpectralTransform();
  SpectralTransform(SpectralTransform&&) noexcept;
  SpectralTransform& operator=(SpectralTransform&&) noexcept;
  SpectralTransform(const SpectralTransform&) = delete;
  SpectralTransform& operator=(const SpectralTransform&) = delete;

  int rank() const { return rank_; }
  int points_per_axis() const { return n_; }
  std::size_t real_size() const { return real_size_; }
  std::size_t spectral_size() const { return spectral_size_; }

  /// Signed wave number of spectral entry `index` along `axis`.
  int wave(std::size_t index, int axis) const { return waves_[index * rank_ + axis]; }
  /// True if the entry sits on a Nyquist plane along `axis` (first derivatives vanish there).
  bool nyquist(std::size_t index, int axis) const { return 2 * std::abs(wave(index, axis)) == n_; }
  /// Sum of squared wave numbers |k|^2.
  double wave_norm2(std::size_t index) const { return norm2_[index]; }

  void forward(std::span<const double> in, std::span<std::complex<double>> out) const;
  void backward(std::span<const std::complex<double>> in, std::span<double> out) const;

 private:
  struct Plans;
  int rank_;
  int n_;
  std::size_t real_size_;
  std::size_t spectral_size_;
  std::vector<int> waves_;
  std::vector<double> norm2_;
  std::unique_ptr<Plans> plans_;
};

}  // namespace chaoslab
