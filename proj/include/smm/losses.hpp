#pragma once

#include <string>

#include "smm/prox.hpp"
#include "smm/types.hpp"

namespace smm {

enum class LossKind { Logistic, Squared };

LossKind parse_loss_kind(const std::string& name);
std::string to_string(LossKind kind);

struct LossValueGrad {
  double value = 0.0;
  SparseVec grad;  ///< supported on the sample's nonzero features
};

/// log(1 + exp(-y x'theta)), stable for large |x'theta|. Labels must be +-1.
LossValueGrad logistic_value_grad(const ParamVec& theta, const Sample& sample);

/// 0.5 (x'theta - y)^2.
LossValueGrad squared_value_grad(const ParamVec& theta, const Sample& sample);

/// Per-sample gradient Lipschitz constant: ||x||^2 / 4 (logistic), ||x||^2 (squared).
double lipschitz_constant(LossKind kind, const Sample& sample);

/// Max per-sample Lipschitz constant over a dataset.
double max_lipschitz_constant(LossKind kind, const Dataset& data);

/// Per-sample loss, optionally augmented with (ridge_mu / 2) ||theta||^2 so
/// each f_n is ridge_mu-strongly convex.
struct Loss {
  LossKind kind = LossKind::Logistic;
  double ridge_mu = 0.0;

  /// Value and the sparse part of the gradient; the ridge part ridge_mu * theta
  /// is left to the caller.
  LossValueGrad value_grad(const ParamVec& theta, const Sample& sample) const;
  double value(const ParamVec& theta, const Sample& sample) const;
};

/// (1/N) sum_i f_i(theta) + psi(theta), summed in index order.
double batch_objective(const ParamVec& theta, const Dataset& data, const Regularizer& reg, const Loss& loss);

/// (1/N) sum_i f_i(theta), including the ridge term.
double batch_loss(const ParamVec& theta, const Dataset& data, const Loss& loss);

/// Dense gradient of batch_loss.
ParamVec batch_gradient(const ParamVec& theta, const Dataset& data, const Loss& loss, double* value = nullptr);

/// lambda * sum_j log(|theta_j| + epsilon).
double log_penalty(const ParamVec& theta, double lambda, double epsilon);

}  // namespace smm
