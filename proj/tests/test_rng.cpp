#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>

#include "smm/parallel.hpp"
#include "smm/rng.hpp"

using namespace smm;

TEST_CASE("counter rng is a pure function of key and counter") {
  CounterRng a(stream_key(7, "data")), b(stream_key(7, "data"));
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CounterRng c(stream_key(7, "perm"));
  CounterRng d(stream_key(8, "data"));
  CounterRng e(stream_key(7, "data"));
  CHECK(c.next_u64() != e.next_u64());
  CHECK(d.next_u64() != CounterRng(stream_key(7, "data")).next_u64());
  CHECK(stream_key(1, "perm", 0) != stream_key(1, "perm", 1));
}

TEST_CASE("uniform draws stay in [0, 1) and look uniform") {
  CounterRng rng(42);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.005);
}

TEST_CASE("normal draws have zero mean and unit variance") {
  CounterRng rng(3);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("below covers its range without bias") {
  CounterRng rng(11);
  std::vector<int> hist(7, 0);
  for (int i = 0; i < 70000; ++i) ++hist[rng.below(7)];
  for (int h : hist) CHECK(std::abs(h - 10000) < 500);
  CHECK(rng.below(1) == 0);
}

TEST_CASE("random permutation is a bijection and reproducible") {
  for (std::size_t n : {1u, 2u, 17u, 1000u}) {
    auto p = random_permutation(n, 99);
    CHECK(p == random_permutation(n, 99));
    std::vector<std::uint32_t> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::uint32_t> iota(n);
    std::iota(iota.begin(), iota.end(), 0u);
    CHECK(sorted == iota);
  }
  CHECK(random_permutation(1, 5) == std::vector<std::uint32_t>{0});
  CHECK(random_permutation(50, 1) != random_permutation(50, 2));
}

TEST_CASE("sampling without replacement returns sorted distinct indices") {
  CounterRng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(50);
    const std::size_t k = rng.below(n + 1);
    const auto s = sample_without_replacement(n, k, rng);
    REQUIRE(s.size() == k);
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(s[i] < n);
      if (i) CHECK(s[i - 1] < s[i]);
    }
  }
}

TEST_CASE("parallel_for visits every index once and propagates exceptions") {
  std::vector<std::atomic<int>> seen(1000);
  parallel_for(seen.size(), [&](std::size_t i) { seen[i]++; });
  for (auto& s : seen) CHECK(s.load() == 1);
  CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                    if (i == 3) throw std::runtime_error("boom");
                  }),
                  std::runtime_error);
  CHECK(worker_count() >= 1);
}
