#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace smm {

std::uint64_t splitmix64(std::uint64_t x);

/// Key for a named sub-stream ("data", "perm", "init", ...) of a run seed.
std::uint64_t stream_key(std::uint64_t seed, std::string_view name, std::uint64_t index = 0);

/// Counter-based generator: the i-th draw is a pure function of (key, i),
/// so any stream can be re-derived without replaying earlier draws.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return splitmix64(key_ ^ splitmix64(counter_++)); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  bool bernoulli(double prob) { return uniform() < prob; }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Fisher-Yates permutation of {0..n-1}.
std::vector<std::uint32_t> random_permutation(std::size_t n, std::uint64_t key);

/// k distinct values from {0..n-1}, sorted ascending.
std::vector<std::uint32_t> sample_without_replacement(std::size_t n, std::size_t k, CounterRng& rng);

}  // namespace smm
