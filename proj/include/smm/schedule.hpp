#pragma once

#include <cstdint>
#include <string>
#include <variant>

#include "smm/types.hpp"

namespace smm {

// Weight sequences w_n in (0, 1] driving the aggregate surrogate.

/// w_n = gamma / sqrt(horizon) for every n.
struct ConstantFiniteHorizon {
  double gamma = 1.0;
  std::uint64_t horizon = 1;
};

/// w_n = gamma / sqrt(n).
struct SqrtDecay {
  double gamma = 1.0;
};

/// w_n = sqrt((n0 + 1) / (n0 + n)).
struct TunedSqrt {
  std::uint64_t n0 = 0;
};

/// w_n = (1 + beta) / (1 + beta * n), beta = mu / rho.
struct StronglyConvex {
  double beta = 1.0;
};

using WeightSchedule = std::variant<ConstantFiniteHorizon, SqrtDecay, TunedSqrt, StronglyConvex>;

/// Raw schedule weight, clamped to (0, 1]. Throws std::invalid_argument for n == 0
/// or out-of-range schedule parameters.
double weight(const WeightSchedule& schedule, std::uint64_t n);

/// Weight as used by the solvers: weight(schedule, n), except that w_1 is
/// forced to 1 when force_unit_first is set.
double solver_weight(const WeightSchedule& schedule, std::uint64_t n, bool force_unit_first);

void validate(const WeightSchedule& schedule);
std::string describe(const WeightSchedule& schedule);

/// Symbolic check of each clause of the non-convex weight assumption:
/// non-increasing, w_1 = 1, sum w_n = inf, sum w_n^2 sqrt(n) < inf.
struct AssumptionReport {
  bool non_increasing = false;
  bool first_weight_is_one = false;
  bool sum_diverges = false;
  bool weighted_square_sum_finite = false;
  bool all() const {
    return non_increasing && first_weight_is_one && sum_diverges && weighted_square_sum_finite;
  }
};
AssumptionReport lint_nonconvex_weights(const WeightSchedule& schedule, bool force_unit_first);

enum class AveragingMode { None, Geometric, Normalized };

AveragingMode parse_averaging(const std::string& name);
std::string to_string(AveragingMode mode);

/// Both averaged iterates of the stochastic scheme.
///
/// geometric:  avg_n = (1 - w_{n+1}) avg_{n-1} + w_{n+1} theta_n, avg_0 = theta_0.
/// normalized: avg_n = sum_{k=1}^{n+1} w_k theta_{k-1} / sum_{k=1}^{n+1} w_k.
///
/// Both are maintained regardless of mode; mode only selects output().
class AveragingState {
 public:
  AveragingState() = default;
  AveragingState(AveragingMode mode, const ParamVec& theta0, double w1);

  /// Folds in theta_n with weight w_next = w_{n+1}.
  void update(const ParamVec& theta_n, double w_next);

  AveragingMode mode() const { return mode_; }
  const ParamVec& geometric() const { return geo_avg_; }
  const ParamVec& normalized() const { return norm_avg_; }
  double cumulative_weight() const { return cumulative_weight_; }

  /// The iterate reported for this mode; `current` is returned for None.
  const ParamVec& output(const ParamVec& current) const;

 private:
  AveragingMode mode_ = AveragingMode::None;
  ParamVec geo_avg_;
  ParamVec norm_avg_;
  double cumulative_weight_ = 0.0;
};

}  // namespace smm
