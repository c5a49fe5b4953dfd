#pragma once

// Counter-based random numbers (Philox4x32-10, Salmon et al. 2011).
//
// A stream is addressed by (key, counter); drawing never mutates shared
// state, so results do not depend on how work is scheduled across threads.

#include <array>
#include <cmath>
#include <cstdint>

namespace chaoslab::rng {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline Counter philox4x32_10(Counter ctr, Key key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kW0;
    key[1] += kW1;
  }
  return ctr;
}

inline Key key_from_seed(std::uint64_t seed) {
  return {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
}

/// Uniform on the open interval (0, 1) from 64 random bits.
inline double open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (std::uint64_t{hi} << 32) | lo;
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Purpose tags keep streams used for different jobs disjoint.
enum class Purpose : std::uint32_t {
  kIncrement = 1,
  kInitial = 2,
  kMonteCarlo = 3,
  kInstance = 4,
};

/// Addresses one logical stream: (seed, replica, stream id, purpose).
/// The running index selects the draw within the stream.
struct StreamAddress {
  std::uint64_t seed = 0;
  std::uint32_t replica = 0;
  std::uint32_t stream = 0;
  Purpose purpose = Purpose::kIncrement;
};

/// Four raw 32-bit words for draw `index`, block `block` of a stream.
inline Counter raw_block(const StreamAddress& addr, std::uint32_t index, std::uint32_t block) {
  const Counter ctr = {index, addr.stream, addr.replica,
                       (static_cast<std::uint32_t>(addr.purpose) << 16) | (block & 0xFFFFu)};
  return philox4x32_10(ctr, key_from_seed(addr.seed));
}

/// Two uniforms in (0,1) for draw `index`, block `block`.
inline std::array<double, 2> uniform_pair(const StreamAddress& addr, std::uint32_t index,
                                          std::uint32_t block = 0) {
  const Counter r = raw_block(addr, index, block);
  return {open_unit(r[0], r[1]), open_unit(r[2], r[3])};
}

/// Two independent standard normals (Box-Muller) for draw `index`, block `block`.
inline std::array<double, 2> normal_pair(const StreamAddress& addr, std::uint32_t index,
                                         std::uint32_t block = 0) {
  const auto [u1, u2] = uniform_pair(addr, index, block);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 6.283185307179586476925286766559 * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

/// Fill `out[0..count)` (count <= 4) with standard normals for draw `index`.
inline void normals(const StreamAddress& addr, std::uint32_t index, double* out, int count) {
  for (int block = 0; 2 * block < count; ++block) {
    const auto pair = normal_pair(addr, index, static_cast<std::uint32_t>(block));
    out[2 * block] = pair[0];
    if (2 * block + 1 < count) out[2 * block + 1] = pair[1];
  }
}

}  // namespace chaoslab::rng
