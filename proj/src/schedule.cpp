#include "smm/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace smm {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

double clamp_weight(double w) {
  if (!(w > 0.0)) throw std::invalid_argument("schedule produced a non-positive weight");
  return std::min(w, 1.0);
}

}  // namespace

void validate(const WeightSchedule& schedule) {
  std::visit(overloaded{
                 [](const ConstantFiniteHorizon& s) {
                   if (!(s.gamma > 0.0)) throw std::invalid_argument("schedule.gamma must be positive");
                   if (s.horizon == 0) throw std::invalid_argument("schedule.horizon must be positive");
                 },
                 [](const SqrtDecay& s) {
                   if (!(s.gamma > 0.0)) throw std::invalid_argument("schedule.gamma must be positive");
                 },
                 [](const TunedSqrt&) {},
                 [](const StronglyConvex& s) {
                   if (!(s.beta > 0.0 && s.beta <= 1.0))
                     throw std::invalid_argument("schedule.beta must lie in (0, 1]");
                 },
             },
             schedule);
}

double weight(const WeightSchedule& schedule, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("weight: n must be >= 1");
  validate(schedule);
  const double nd = static_cast<double>(n);
  return std::visit(
      overloaded{
          [](const ConstantFiniteHorizon& s) {
            return clamp_weight(s.gamma / std::sqrt(static_cast<double>(s.horizon)));
          },
          [nd](const SqrtDecay& s) { return clamp_weight(s.gamma / std::sqrt(nd)); },
          [nd](const TunedSqrt& s) {
            const double n0 = static_cast<double>(s.n0);
            return clamp_weight(std::sqrt((n0 + 1.0) / (n0 + nd)));
          },
          [nd](const StronglyConvex& s) { return clamp_weight((1.0 + s.beta) / (1.0 + s.beta * nd)); },
      },
      schedule);
}

double solver_weight(const WeightSchedule& schedule, std::uint64_t n, bool force_unit_first) {
  if (n == 1 && force_unit_first) return 1.0;
  return weight(schedule, n);
}

std::string describe(const WeightSchedule& schedule) {
  std::ostringstream os;
  os.precision(17);
  std::visit(overloaded{
                 [&](const ConstantFiniteHorizon& s) {
                   os << "constant(gamma=" << s.gamma << ",horizon=" << s.horizon << ")";
                 },
                 [&](const SqrtDecay& s) { os << "sqrt(gamma=" << s.gamma << ")"; },
                 [&](const TunedSqrt& s) { os << "tuned_sqrt(n0=" << s.n0 << ")"; },
                 [&](const StronglyConvex& s) { os << "strongly_convex(beta=" << s.beta << ")"; },
             },
             schedule);
  return os.str();
}

AssumptionReport lint_nonconvex_weights(const WeightSchedule& schedule, bool force_unit_first) {
  validate(schedule);
  AssumptionReport r;
  r.first_weight_is_one = solver_weight(schedule, 1, force_unit_first) == 1.0;
  std::visit(overloaded{
                 [&](const ConstantFiniteHorizon&) {
                   // Constant forever: w_n^2 sqrt(n) is not summable.
                   r.non_increasing = true;
                   r.sum_diverges = true;
                   r.weighted_square_sum_finite = false;
                 },
                 [&](const SqrtDecay&) {
                   // min(1, gamma/sqrt(n)) is non-increasing; w_n^2 sqrt(n) ~ 1/sqrt(n) is not summable.
                   r.non_increasing = true;
                   r.sum_diverges = true;
                   r.weighted_square_sum_finite = false;
                 },
                 [&](const TunedSqrt&) {
                   r.non_increasing = true;
                   r.sum_diverges = true;
                   r.weighted_square_sum_finite = false;
                 },
                 [&](const StronglyConvex&) {
                   // ~ 1/(beta n): harmonic sum diverges, n^{-3/2} summable.
                   r.non_increasing = true;
                   r.sum_diverges = true;
                   r.weighted_square_sum_finite = true;
                 },
             },
             schedule);
  return r;
}

AveragingMode parse_averaging(const std::string& name) {
  if (name == "none") return AveragingMode::None;
  if (name == "geometric") return AveragingMode::Geometric;
  if (name == "normalized") return AveragingMode::Normalized;
  throw ConfigError("unknown averaging mode '" + name + "' (expected none|geometric|normalized)");
}

std::string to_string(AveragingMode mode) {
  switch (mode) {
    case AveragingMode::None: return "none";
    case AveragingMode::Geometric: return "geometric";
    case AveragingMode::Normalized: return "normalized";
  }
  return "none";
}

AveragingState::AveragingState(AveragingMode mode, const ParamVec& theta0, double w1)
    : mode_(mode), geo_avg_(theta0), norm_avg_(theta0), cumulative_weight_(w1) {
  if (!(w1 > 0.0 && w1 <= 1.0)) throw std::invalid_argument("AveragingState: w_1 must lie in (0, 1]");
}

void AveragingState::update(const ParamVec& theta_n, double w_next) {
  if (!(w_next > 0.0 && w_next <= 1.0))
    throw std::invalid_argument("update_averages: weight must lie in (0, 1]");
  if (theta_n.size() != geo_avg_.size()) throw std::invalid_argument("update_averages: dimension mismatch");
  geo_avg_ = (1.0 - w_next) * geo_avg_ + w_next * theta_n;
  cumulative_weight_ += w_next;
  norm_avg_ += (w_next / cumulative_weight_) * (theta_n - norm_avg_);
}

const ParamVec& AveragingState::output(const ParamVec& current) const {
  switch (mode_) {
    case AveragingMode::Geometric: return geo_avg_;
    case AveragingMode::Normalized: return norm_avg_;
    case AveragingMode::None: break;
  }
  return current;
}

}  // namespace smm
