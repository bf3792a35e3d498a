#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>

namespace gpcal {

/// Philox4x32-10 block function (Salmon et al., Random123). Exposed for known-answer tests.
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// SplitMix64 finalizer, used to turn (parent, child) ids into new stream ids.
std::uint64_t splitmix64(std::uint64_t x);

/// Counter-based random stream. The seed is the Philox key and the stream id occupies the
/// upper half of the counter, so every (seed, stream_id) pair owns a disjoint counter space.
/// Single-owner: hand a derive()'d child to another worker instead of sharing.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, std::uint64_t stream_id);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();

  /// Uniform on the open interval (0, 1).
  double uniform();

  double normal();

  /// Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n);

  /// Child stream keyed on this stream's identity, independent of how many draws were taken.
  [[nodiscard]] RandomStream derive(std::uint64_t child_id) const;

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::uint64_t stream_id() const { return stream_id_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace gpcal
