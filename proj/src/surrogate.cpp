#include "smm/surrogate.hpp"

#include <cmath>
#include <stdexcept>

namespace smm {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

AggregateSurrogate::AggregateSurrogate(const ParamVec& theta0, double rho, Regularizer reg)
    : raw_(rho * theta0), curvature_(rho), reg_(std::move(reg)), const_term_(0.5 * rho * theta0.squaredNorm()) {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw std::invalid_argument("aggregate curvature must be positive");
  validate(reg_, static_cast<std::size_t>(theta0.size()));
}

void AggregateSurrogate::renormalize() {
  raw_ *= scale_;
  scale_ = 1.0;
  since_renormalize_ = 0;
}

void AggregateSurrogate::update(const SparseVec& grad, const ParamVec& theta_prev, double w, double grad_theta_coeff,
                                double loss_value) {
  if (!(w > 0.0 && w <= 1.0)) throw std::invalid_argument("update_aggregate: weight must lie in (0, 1]");
  if (theta_prev.size() != raw_.size()) throw std::invalid_argument("update_aggregate: dimension mismatch");
  if (!grad.empty() && grad.indices.back() >= static_cast<std::size_t>(raw_.size()))
    throw std::invalid_argument("update_aggregate: gradient index out of range");

  if (w == 1.0) {
    raw_.setZero();
    scale_ = 1.0;
    since_renormalize_ = 0;
  } else {
    scale_ *= (1.0 - w);
    ++since_renormalize_;
    if (scale_ < kMinScale || since_renormalize_ >= kRenormalizeEvery) renormalize();
  }

  const double theta_coeff = curvature_ - grad_theta_coeff;
  const double step = w / scale_;
  if (theta_coeff != 0.0) {
    for (Eigen::Index j = 0; j < theta_prev.size(); ++j) {
      if (theta_prev[j] != 0.0) raw_[j] += step * (theta_coeff * theta_prev[j]);
    }
  }
  for (std::size_t k = 0; k < grad.indices.size(); ++k) raw_[grad.indices[k]] -= step * grad.values[k];

  penalty_weight_ = (1.0 - w) * penalty_weight_ + w;

  if (std::isnan(loss_value)) {
    const_valid_ = false;
  } else if (const_valid_) {
    // f(k) - grad'k + (L/2)||k||^2 with grad = sparse + coeff * k.
    const double sq = theta_prev.squaredNorm();
    const double grad_dot = grad.dot(theta_prev) + grad_theta_coeff * sq;
    const double c = loss_value - grad_dot + 0.5 * curvature_ * sq;
    const_term_ = (1.0 - w) * const_term_ + w * c;
  }
  ++updates_;
}

ParamVec AggregateSurrogate::minimize() const {
  const ParamVec v = (scale_ / curvature_) * raw_;
  if (penalty_weight_ == 0.0) return v;
  return prox(reg_, v, penalty_weight_ / curvature_);
}

double AggregateSurrogate::value(const ParamVec& theta) const {
  if (!const_valid_) throw std::logic_error("aggregate constant term not tracked (missing loss values)");
  const double quad = 0.5 * curvature_ * theta.squaredNorm() - scale_ * raw_.dot(theta) + const_term_;
  return quad + penalty_weight_ * penalty_value(reg_, theta);
}

namespace {

// f(k) + grad f(k)'(theta - k) + L/2 ||theta - k||^2 for the loss alone.
double linearized_loss(const Loss& loss, double L, const ParamVec& anchor, const ParamVec& theta,
                       const Sample& sample) {
  const LossValueGrad vg = loss.value_grad(anchor, sample);
  const ParamVec diff = theta - anchor;
  double lin = vg.grad.dot(diff);
  if (loss.ridge_mu != 0.0) lin += loss.ridge_mu * anchor.dot(diff);
  return vg.value + lin + 0.5 * L * diff.squaredNorm();
}

}  // namespace

double surrogate_value(const SurrogateKind& kind, const Loss& loss, const ParamVec& anchor, const ParamVec& theta,
                       const Sample& sample) {
  return std::visit(overloaded{
                        [&](const LipschitzGradientSurrogate& s) {
                          return linearized_loss(loss, s.L, anchor, theta, sample);
                        },
                        [&](const ProximalGradientSurrogate& s) {
                          return linearized_loss(loss, s.L, anchor, theta, sample) + penalty_value(s.reg, theta);
                        },
                        [&](const DcLogPenaltySurrogate& s) {
                          double pen = 0.0;
                          for (Eigen::Index j = 0; j < theta.size(); ++j) {
                            const double a = std::abs(anchor[j]) + s.epsilon;
                            pen += std::log(a) + (std::abs(theta[j]) - std::abs(anchor[j])) / a;
                          }
                          return linearized_loss(loss, s.L, anchor, theta, sample) + s.lambda * pen;
                        },
                    },
                    kind);
}

double surrogate_target(const SurrogateKind& kind, const Loss& loss, const ParamVec& theta, const Sample& sample) {
  return std::visit(overloaded{
                        [&](const LipschitzGradientSurrogate&) { return loss.value(theta, sample); },
                        [&](const ProximalGradientSurrogate& s) {
                          return loss.value(theta, sample) + penalty_value(s.reg, theta);
                        },
                        [&](const DcLogPenaltySurrogate& s) {
                          return loss.value(theta, sample) + log_penalty(theta, s.lambda, s.epsilon);
                        },
                    },
                    kind);
}

double surrogate_error_lipschitz(const SurrogateKind& kind) {
  return std::visit(overloaded{
                        [](const LipschitzGradientSurrogate& s) { return s.L; },
                        [](const ProximalGradientSurrogate& s) { return s.L; },
                        [](const DcLogPenaltySurrogate& s) { return s.L + s.lambda / (s.epsilon * s.epsilon); },
                    },
                    kind);
}

ParamVec dc_reweight(const ParamVec& theta_prev, double epsilon, double lambda) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("dc_reweight: epsilon must be positive");
  if (!(lambda >= 0.0)) throw std::invalid_argument("dc_reweight: lambda must be >= 0");
  ParamVec eta(theta_prev.size());
  for (Eigen::Index j = 0; j < theta_prev.size(); ++j) eta[j] = lambda / (std::abs(theta_prev[j]) + epsilon);
  return eta;
}

}  // namespace smm
