#pragma once

// Counter-based random streams.
//
// Every stream is addressed by (root_seed, stream_index). Draws are produced by
// the Philox4x32-10 block cipher applied to a counter whose upper half is the
// stream index and whose lower half is the block position, keyed by the root
// seed. The k-th draw of a stream is therefore a pure function of
// (root_seed, stream_index, k): nothing depends on thread scheduling or on how
// many streams were opened before.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

#include <boost/math/distributions/normal.hpp>

namespace semieff::numerics {

namespace detail {

inline void mulhilo32(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace detail

using PhiloxBlock = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds and the standard round constants.
inline PhiloxBlock philox4x32_10(PhiloxBlock ctr, PhiloxKey key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    detail::mulhilo32(kMul0, ctr[0], hi0, lo0);
    detail::mulhilo32(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

/// Deterministic stream index for replication `rep` of a named experiment.
inline std::uint64_t stream_index_for(std::string_view experiment, std::uint64_t rep) {
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char c : experiment) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return detail::splitmix64(h) ^ rep;
}

class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t root_seed, std::uint64_t stream_index)
      : root_seed_(root_seed), stream_index_(stream_index) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  std::uint64_t root_seed() const { return root_seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

  /// An independent stream derived from this one's address; does not consume draws.
  RngStream child(std::uint64_t k) const {
    return RngStream(root_seed_, detail::splitmix64(stream_index_ ^ detail::splitmix64(k + 1)));
  }

  result_type operator()() {
    if (lane_ == 4) refill();
    const std::uint64_t hi = buffer_[lane_];
    const std::uint64_t lo = buffer_[lane_ + 1];
    lane_ += 2;
    return (hi << 32) | lo;
  }

  /// Uniform on the open interval (0, 1), 53 bits of resolution.
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() {
    static const boost::math::normal_distribution<double> standard;
    return boost::math::quantile(standard, uniform());
  }

  double exponential() { return -std::log(uniform()); }

  double laplace(double scale = 1.0) {
    const double u = uniform() - 0.5;
    return u < 0 ? scale * std::log1p(2.0 * u) : -scale * std::log1p(-2.0 * u);
  }

  double logistic(double scale = 1.0) {
    const double u = uniform();
    return scale * std::log(u / (1.0 - u));
  }

 private:
  void refill() {
    const PhiloxBlock ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                          static_cast<std::uint32_t>(stream_index_),
                          static_cast<std::uint32_t>(stream_index_ >> 32)};
    const PhiloxKey key{static_cast<std::uint32_t>(root_seed_), static_cast<std::uint32_t>(root_seed_ >> 32)};
    buffer_ = philox4x32_10(ctr, key);
    ++block_;
    lane_ = 0;
  }

  std::uint64_t root_seed_;
  std::uint64_t stream_index_;
  std::uint64_t block_ = 0;
  PhiloxBlock buffer_{};
  int lane_ = 4;
};

}  // namespace semieff::numerics
