#include "smm/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace smm {
namespace {

void check_dim(const ParamVec& theta, const Sample& sample) {
  if (!sample.features.empty() && sample.features.indices.back() >= static_cast<std::size_t>(theta.size()))
    throw std::invalid_argument("feature index exceeds parameter dimension");
}

// log(1 + exp(z)) without overflow.
double log1p_exp(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

// 1 / (1 + exp(-z)).
double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

LossKind parse_loss_kind(const std::string& name) {
  if (name == "logistic") return LossKind::Logistic;
  if (name == "squared") return LossKind::Squared;
  throw ConfigError("unknown loss.kind '" + name + "' (expected logistic|squared)");
}

std::string to_string(LossKind kind) { return kind == LossKind::Logistic ? "logistic" : "squared"; }

LossValueGrad logistic_value_grad(const ParamVec& theta, const Sample& sample) {
  const double y = sample.label;
  if (y != 1.0 && y != -1.0) throw std::invalid_argument("logistic loss requires labels in {-1, +1}");
  check_dim(theta, sample);
  const double margin = y * sample.features.dot(theta);
  LossValueGrad out;
  out.value = log1p_exp(-margin);
  const double coeff = -y * sigmoid(-margin);
  out.grad.indices = sample.features.indices;
  out.grad.values.resize(sample.features.values.size());
  for (std::size_t k = 0; k < out.grad.values.size(); ++k) out.grad.values[k] = coeff * sample.features.values[k];
  return out;
}

LossValueGrad squared_value_grad(const ParamVec& theta, const Sample& sample) {
  check_dim(theta, sample);
  const double residual = sample.features.dot(theta) - sample.label;
  LossValueGrad out;
  out.value = 0.5 * residual * residual;
  out.grad.indices = sample.features.indices;
  out.grad.values.resize(sample.features.values.size());
  for (std::size_t k = 0; k < out.grad.values.size(); ++k) out.grad.values[k] = residual * sample.features.values[k];
  return out;
}

double lipschitz_constant(LossKind kind, const Sample& sample) {
  const double sq = sample.features.squared_norm();
  return kind == LossKind::Logistic ? 0.25 * sq : sq;
}

double max_lipschitz_constant(LossKind kind, const Dataset& data) {
  double mx = 0.0;
  for (const auto& s : data.samples) mx = std::max(mx, lipschitz_constant(kind, s));
  return mx;
}

LossValueGrad Loss::value_grad(const ParamVec& theta, const Sample& sample) const {
  LossValueGrad out =
      kind == LossKind::Logistic ? logistic_value_grad(theta, sample) : squared_value_grad(theta, sample);
  if (ridge_mu != 0.0) out.value += 0.5 * ridge_mu * theta.squaredNorm();
  return out;
}

double Loss::value(const ParamVec& theta, const Sample& sample) const {
  double v;
  if (kind == LossKind::Logistic) {
    const double y = sample.label;
    if (y != 1.0 && y != -1.0) throw std::invalid_argument("logistic loss requires labels in {-1, +1}");
    check_dim(theta, sample);
    v = log1p_exp(-y * sample.features.dot(theta));
  } else {
    check_dim(theta, sample);
    const double r = sample.features.dot(theta) - sample.label;
    v = 0.5 * r * r;
  }
  if (ridge_mu != 0.0) v += 0.5 * ridge_mu * theta.squaredNorm();
  return v;
}

double batch_loss(const ParamVec& theta, const Dataset& data, const Loss& loss) {
  if (data.empty()) throw std::invalid_argument("batch objective of an empty dataset");
  const Loss plain{loss.kind, 0.0};
  double sum = 0.0;
  for (const auto& s : data.samples) sum += plain.value(theta, s);
  double out = sum / static_cast<double>(data.size());
  if (loss.ridge_mu != 0.0) out += 0.5 * loss.ridge_mu * theta.squaredNorm();
  return out;
}

double batch_objective(const ParamVec& theta, const Dataset& data, const Regularizer& reg, const Loss& loss) {
  return batch_loss(theta, data, loss) + penalty_value(reg, theta);
}

ParamVec batch_gradient(const ParamVec& theta, const Dataset& data, const Loss& loss, double* value) {
  if (data.empty()) throw std::invalid_argument("batch gradient of an empty dataset");
  ParamVec grad = ParamVec::Zero(theta.size());
  double sum = 0.0;
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (const auto& s : data.samples) {
    const double z = s.features.dot(theta);
    double coeff;
    if (loss.kind == LossKind::Logistic) {
      const double y = s.label;
      if (y != 1.0 && y != -1.0) throw std::invalid_argument("logistic loss requires labels in {-1, +1}");
      const double margin = y * z;
      sum += log1p_exp(-margin);
      coeff = -y * sigmoid(-margin);
    } else {
      const double r = z - s.label;
      sum += 0.5 * r * r;
      coeff = r;
    }
    s.features.axpy_into(coeff * inv_n, grad);
  }
  if (loss.ridge_mu != 0.0) grad += loss.ridge_mu * theta;
  if (value) {
    *value = sum * inv_n;
    if (loss.ridge_mu != 0.0) *value += 0.5 * loss.ridge_mu * theta.squaredNorm();
  }
  return grad;
}

double log_penalty(const ParamVec& theta, double lambda, double epsilon) {
  double s = 0.0;
  for (Eigen::Index j = 0; j < theta.size(); ++j) s += std::log(std::abs(theta[j]) + epsilon);
  return lambda * s;
}

}  // namespace smm
