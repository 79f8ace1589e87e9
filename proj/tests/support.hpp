#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "smm/rng.hpp"
#include "smm/types.hpp"

namespace smm::testing {

// Hand-rolled generators for the property tests.

inline ParamVec random_vec(CounterRng& rng, std::size_t n, double scale = 1.0) {
  ParamVec v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = scale * rng.normal();
  return v;
}

/// Vector with some exact zeros and ties, the awkward inputs for prox operators.
inline ParamVec awkward_vec(CounterRng& rng, std::size_t n, double scale = 1.0) {
  ParamVec v = random_vec(rng, n, scale);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double u = rng.uniform();
    if (u < 0.15) v[i] = 0.0;
    else if (u < 0.25 && i > 0) v[i] = -v[i - 1];
  }
  return v;
}

inline Sample random_sample(CounterRng& rng, std::size_t p, std::size_t nnz, bool unit = true) {
  Sample s;
  s.features.indices = sample_without_replacement(p, nnz, rng);
  s.features.values.resize(nnz);
  for (double& v : s.features.values) v = rng.normal();
  if (unit) {
    const double n = std::sqrt(s.features.squared_norm());
    for (double& v : s.features.values) v /= n;
  }
  s.label = rng.bernoulli(0.5) ? 1.0 : -1.0;
  return s;
}

inline Dataset random_dataset(std::uint64_t seed, std::size_t n, std::size_t p, std::size_t nnz, bool unit = true) {
  CounterRng rng(seed);
  Dataset d;
  d.p = p;
  for (std::size_t i = 0; i < n; ++i) d.samples.push_back(random_sample(rng, p, nnz, unit));
  return d;
}

inline double max_abs_diff(const ParamVec& a, const ParamVec& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace smm::testing
