#pragma once

#include <string>
#include <variant>
#include <vector>

#include "smm/types.hpp"

namespace smm {

// Penalties psi and their exact proximal operators
//   prox_{t psi}(v) = argmin_u 0.5 ||u - v||^2 + t psi(u).
//
// Quadratic terms use the convention lambda2 * ||u||^2 (no 1/2 factor),
// matching gamma2 ||D||_F^2 in the structured dictionary penalty.

/// lambda ||u||_1. lambda = 0 is "no penalty".
struct L1 {
  double lambda = 0.0;
};

/// lambda2 ||u||^2.
struct Ridge {
  double lambda2 = 0.0;
};

/// lambda ||u||_1 + lambda2 ||u||^2.
struct ElasticNet {
  double lambda = 0.0;
  double lambda2 = 0.0;
};

/// lambda * sum_j eta_j |u_j|.
struct WeightedL1 {
  ParamVec eta;
  double lambda = 1.0;
};

/// gamma1 * sum_g max_{k in g} |u_k| + gamma2 ||u||^2 over disjoint groups.
/// Coordinates outside every group only see the gamma2 term.
struct GroupLinf {
  std::vector<std::vector<std::size_t>> groups;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
};

using Regularizer = std::variant<L1, Ridge, ElasticNet, WeightedL1, GroupLinf>;

/// Throws std::invalid_argument on negative parameters, non-finite weights,
/// overlapping groups, or indices >= dim.
void validate(const Regularizer& reg, std::size_t dim);

ParamVec prox(const Regularizer& reg, const ParamVec& v, double t);

/// Euclidean projection onto {u : ||u||_1 <= radius} (sort-and-threshold).
ParamVec project_l1_ball(const ParamVec& v, double radius);

/// Euclidean projection onto the probability simplex scaled by `total`.
ParamVec project_simplex(const ParamVec& v, double total = 1.0);

double penalty_value(const Regularizer& reg, const ParamVec& v);

/// Minimum-norm element of grad + d psi(at). Zero iff `at` is a stationary
/// point of <grad, .> + psi restricted to first-order terms; used both as an
/// observed Lipschitz estimate for f_n + psi and as a prox optimality residual.
ParamVec min_norm_subgradient(const Regularizer& reg, const ParamVec& at, const ParamVec& grad);

/// Scalar soft threshold sign(v) max(|v| - thr, 0).
inline double soft_threshold(double v, double thr) {
  if (v > thr) return v - thr;
  if (v < -thr) return v + thr;
  return 0.0;
}

/// True for L1 (any lambda).
bool is_plain_l1(const Regularizer& reg);
/// The lambda of an L1/ElasticNet penalty, 0 otherwise.
double l1_strength(const Regularizer& reg);

std::string describe(const Regularizer& reg);

/// Non-overlapping size x size tiles of a rows x cols pixel grid (row-major).
std::vector<std::vector<std::size_t>> tile_groups(std::size_t rows, std::size_t cols, std::size_t size);

}  // namespace smm
