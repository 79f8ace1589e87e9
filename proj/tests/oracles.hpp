#pragma once

#include <algorithm>
#include <cmath>

#include "smm/prox.hpp"
#include "smm/rng.hpp"

namespace smm::testing {

// Brute-force reference implementations for the prox operators.

/// Golden-section minimizer of a convex 1-D function on [lo, hi].
template <class F>
inline double golden_min(F f, double lo, double hi) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 300 && b - a > 1e-14; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

/// Projection onto the l1 ball by bisection on the threshold of the dual.
inline ParamVec l1_ball_oracle(const ParamVec& v, double radius) {
  if (v.lpNorm<1>() <= radius) return v;
  double lo = 0.0, hi = v.cwiseAbs().maxCoeff();
  auto shrunk = [&](double tau) {
    ParamVec u(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) u[i] = soft_threshold(v[i], tau);
    return u;
  };
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (shrunk(mid).lpNorm<1>() > radius) lo = mid;
    else hi = mid;
  }
  return shrunk(0.5 * (lo + hi));
}

/// Brute-force prox: per coordinate for separable penalties, per group via
/// the epigraph variable s = max |u_k| for GroupLinf.
inline ParamVec prox_oracle(const Regularizer& reg, const ParamVec& v, double t) {
  ParamVec u = v;
  const double span = v.cwiseAbs().maxCoeff() + 1.0;
  auto separable = [&](auto coord_penalty) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
      u[i] = golden_min([&](double x) { return 0.5 * (x - v[i]) * (x - v[i]) + t * coord_penalty(i, x); }, -span, span);
  };
  if (auto* r = std::get_if<L1>(&reg)) separable([&](Eigen::Index, double x) { return r->lambda * std::abs(x); });
  else if (auto* r = std::get_if<Ridge>(&reg)) separable([&](Eigen::Index, double x) { return r->lambda2 * x * x; });
  else if (auto* r = std::get_if<ElasticNet>(&reg))
    separable([&](Eigen::Index, double x) { return r->lambda * std::abs(x) + r->lambda2 * x * x; });
  else if (auto* r = std::get_if<WeightedL1>(&reg))
    separable([&](Eigen::Index i, double x) { return r->lambda * r->eta[i] * std::abs(x); });
  else {
    const auto& g = std::get<GroupLinf>(reg);
    const double shrink = 1.0 + 2.0 * t * g.gamma2;
    for (Eigen::Index i = 0; i < v.size(); ++i) u[i] = v[i] / shrink;
    for (const auto& group : g.groups) {
      auto clipped = [&](double s, std::size_t k) { return std::clamp(v[k] / shrink, -s, s); };
      auto h = [&](double s) {
        double val = t * g.gamma1 * s;
        for (std::size_t k : group) {
          const double x = clipped(s, k);
          val += 0.5 * (x - v[k]) * (x - v[k]) + t * g.gamma2 * x * x;
        }
        return val;
      };
      const double s = golden_min(h, 0.0, span);
      for (std::size_t k : group) u[k] = clipped(s, k);
    }
  }
  return u;
}

inline double prox_objective(const Regularizer& reg, const ParamVec& v, double t, const ParamVec& u) {
  return 0.5 * (u - v).squaredNorm() + t * penalty_value(reg, u);
}

inline Regularizer random_regularizer(CounterRng& rng, std::size_t dim) {
  switch (rng.below(5)) {
    case 0: return L1{rng.uniform(0.0, 2.0)};
    case 1: return Ridge{rng.uniform(0.0, 2.0)};
    case 2: return ElasticNet{rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)};
    case 3: {
      ParamVec eta(static_cast<Eigen::Index>(dim));
      for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = rng.uniform(0.0, 3.0);
      return WeightedL1{eta, rng.uniform(0.1, 1.0)};
    }
    default: {
      // Random disjoint groups, leaving some coordinates ungrouped.
      const auto perm = random_permutation(dim, rng.next_u64());
      GroupLinf g;
      std::size_t pos = 0;
      while (pos < dim) {
        const std::size_t len = 1 + rng.below(3);
        std::vector<std::size_t> group;
        for (std::size_t k = 0; k < len && pos < dim; ++k) group.push_back(perm[pos++]);
        if (rng.uniform() < 0.8) g.groups.push_back(group);
      }
      g.gamma1 = rng.uniform(0.0, 2.0);
      g.gamma2 = rng.uniform() < 0.5 ? 0.0 : rng.uniform(0.0, 1.0);
      return g;
    }
  }
}

}  // namespace smm::testing
