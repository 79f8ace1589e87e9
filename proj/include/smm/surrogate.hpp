#pragma once

#include <cstdint>
#include <limits>
#include <variant>

#include "smm/losses.hpp"
#include "smm/prox.hpp"
#include "smm/types.hpp"

namespace smm {

/// Recursively weighted proximal-gradient surrogate, kept in closed form:
///
///   gbar_n(theta) = (curvature / 2) ||theta||^2 - q_n' theta + const_n + c_n psi(theta)
///
/// with q_n = (1 - w_n) q_{n-1} + w_n (curvature theta_{n-1} - grad f_n(theta_{n-1}))
/// and c_n = (1 - w_n) c_{n-1} + w_n, c_0 = 0 (the initial anchor carries no psi).
///
/// q is stored as scale * raw so the (1 - w_n) shrink is O(1); only coordinates
/// where theta_prev or the gradient is nonzero are touched per update.
class AggregateSurrogate {
 public:
  /// gbar_0(theta) = (rho / 2) ||theta - theta0||^2.
  AggregateSurrogate(const ParamVec& theta0, double rho, Regularizer reg);

  /// Folds in the surrogate of f_n anchored at theta_prev. The full gradient
  /// is grad + grad_theta_coeff * theta_prev (the dense part carries a ridge
  /// term). Pass loss_value to keep const_n exact for value().
  void update(const SparseVec& grad, const ParamVec& theta_prev, double w, double grad_theta_coeff = 0.0,
              double loss_value = std::numeric_limits<double>::quiet_NaN());

  /// argmin gbar_n = prox_{c_n psi / curvature}(q_n / curvature).
  ParamVec minimize() const;

  /// gbar_n(theta). Throws std::logic_error unless every update supplied a loss value.
  double value(const ParamVec& theta) const;

  ParamVec anchor() const { return scale_ * raw_; }
  double curvature() const { return curvature_; }
  double penalty_weight() const { return penalty_weight_; }
  const Regularizer& regularizer() const { return reg_; }
  std::size_t dim() const { return static_cast<std::size_t>(raw_.size()); }
  std::uint64_t updates() const { return updates_; }

  /// Multiplier and raw storage, exposed for the renormalization tests.
  double scale() const { return scale_; }

  static constexpr std::uint64_t kRenormalizeEvery = 10000;
  static constexpr double kMinScale = 1e-150;

 private:
  void renormalize();

  ParamVec raw_;
  double scale_ = 1.0;
  double curvature_;
  Regularizer reg_;
  double penalty_weight_ = 0.0;
  double const_term_ = 0.0;
  bool const_valid_ = true;
  std::uint64_t updates_ = 0;
  std::uint64_t since_renormalize_ = 0;
};

// Single-sample surrogates g of f anchored at kappa.

/// f = loss; g = f(k) + grad f(k)'(theta - k) + L/2 ||theta - k||^2.
struct LipschitzGradientSurrogate {
  double L = 0.25;
};

/// f = loss + psi; g = Lipschitz-gradient surrogate of the loss + psi(theta).
struct ProximalGradientSurrogate {
  double L = 0.25;
  Regularizer reg = L1{0.0};
};

/// f = loss + lambda sum_j log(|theta_j| + eps); the concave log term is
/// linearized in |theta_j| at kappa, the loss uses a Lipschitz-gradient surrogate.
struct DcLogPenaltySurrogate {
  double L = 0.25;
  double lambda = 0.0;
  double epsilon = 0.01;
};

using SurrogateKind = std::variant<LipschitzGradientSurrogate, ProximalGradientSurrogate, DcLogPenaltySurrogate>;

/// g(theta) for the surrogate anchored at `anchor`.
double surrogate_value(const SurrogateKind& kind, const Loss& loss, const ParamVec& anchor, const ParamVec& theta,
                       const Sample& sample);

/// The function f the surrogate majorizes.
double surrogate_target(const SurrogateKind& kind, const Loss& loss, const ParamVec& theta, const Sample& sample);

/// Lipschitz constant of grad(g - f): L for the first two kinds,
/// L + lambda / eps^2 for the DC kind.
double surrogate_error_lipschitz(const SurrogateKind& kind);

/// eta_j = lambda / (|theta_prev_j| + epsilon): weights of the linearized log penalty.
ParamVec dc_reweight(const ParamVec& theta_prev, double epsilon, double lambda);

}  // namespace smm
