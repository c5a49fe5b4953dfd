#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace chaoslab {

inline constexpr int kMaxDim = 3;
inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Fixed-capacity small vectors/matrices: no heap traffic for d <= 3.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

using WaveVector = std::array<int, kMaxDim>;

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Kernel fails the ellipticity certificate or is otherwise malformed.
class KernelError : public Error {
 public:
  using Error::Error;
};

/// A time step produced values outside tolerance (negative densities, bad dt).
class StabilityError : public Error {
 public:
  using Error::Error;
};

/// Input violates a documented precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Reduce a coordinate to [0, 1).
inline double wrap_unit(double x) {
  double r = x - std::floor(x);
  return r >= 1.0 ? 0.0 : r;
}

/// Reduce a displacement to the canonical representative in [-0.5, 0.5).
inline double wrap_centered(double x) {
  double r = x - std::floor(x + 0.5);
  return r >= 0.5 ? r - 1.0 : r;
}

}  // namespace chaoslab
