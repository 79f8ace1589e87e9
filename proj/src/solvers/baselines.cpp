#include <cmath>

#include "detail.hpp"

namespace smm {

RunRecord run_fobos(const SolverConfig& config, const Dataset& train, const Dataset* test) {
  validate(config);
  validate(config.reg, train.p);
  if (train.empty()) throw ConfigError("training set is empty");
  RunRecord rec;
  rec.rho = resolve_rho(config, train);
  const double mu = config.loss.ridge_mu;
  ParamVec theta = detail::initial_theta(config, train.p);
  ParamVec theta_prev = theta;
  AveragingState avg(config.averaging, theta, solver_weight(config.schedule, 1, config.force_unit_first_weight));
  detail::Recorder recorder(config, train, test, rec);
  detail::MinibatchGradient gradient(train.p);
  detail::SampleStream stream(config, train.size());

  recorder.record(0, 0.0, theta, 0.0, 0.0);
  const std::uint32_t* idx = nullptr;
  std::size_t count = 0;
  while (stream.next(idx, count)) {
    const std::uint64_t n = stream.step();
    theta_prev.swap(theta);
    const double w = solver_weight(config.schedule, n, config.force_unit_first_weight);
    const double eta = w / rec.rho;
    const detail::BatchGradient bg = gradient(config.loss, theta_prev, train, idx, count);
    ParamVec v = theta_prev;
    if (mu != 0.0) v -= (eta * mu) * theta_prev;
    bg.grad.axpy_into(-eta, v);
    theta = prox(config.reg, v, eta);
    const double step_norm = (theta - theta_prev).norm();
    avg.update(theta, solver_weight(config.schedule, n + 1, config.force_unit_first_weight));
    if (stream.should_record()) recorder.record(n, stream.epoch(), avg.output(theta), step_norm, w);
  }
  rec.steps = stream.step();
  rec.theta = std::move(theta);
  rec.theta_geometric = avg.geometric();
  rec.theta_normalized = avg.normalized();
  return rec;
}

RunRecord run_rda(const SolverConfig& config, const Dataset& train, const Dataset* test) {
  validate(config);
  validate(config.reg, train.p);
  if (train.empty()) throw ConfigError("training set is empty");
  RunRecord rec;
  rec.rho = resolve_rho(config, train);
  const double mu = config.loss.ridge_mu;
  ParamVec theta = detail::initial_theta(config, train.p);
  ParamVec theta_prev = theta;
  ParamVec gbar = ParamVec::Zero(theta.size());
  ParamVec g = ParamVec::Zero(theta.size());
  AveragingState avg(config.averaging, theta, 1.0);
  detail::Recorder recorder(config, train, test, rec);
  detail::MinibatchGradient gradient(train.p);
  detail::SampleStream stream(config, train.size());

  recorder.record(0, 0.0, theta, 0.0, 0.0);
  const std::uint32_t* idx = nullptr;
  std::size_t count = 0;
  while (stream.next(idx, count)) {
    const std::uint64_t n = stream.step();
    theta_prev.swap(theta);
    const detail::BatchGradient bg = gradient(config.loss, theta_prev, train, idx, count);
    g = mu * theta_prev;
    bg.grad.axpy_into(1.0, g);
    gbar += (g - gbar) / static_cast<double>(n);
    const double eta = config.rda_gamma * std::sqrt(static_cast<double>(n));
    theta = prox(config.reg, -eta * gbar, eta);
    const double step_norm = (theta - theta_prev).norm();
    avg.update(theta, 1.0 / static_cast<double>(n + 1));
    if (stream.should_record()) recorder.record(n, stream.epoch(), avg.output(theta), step_norm, eta);
  }
  rec.steps = stream.step();
  rec.theta = std::move(theta);
  rec.theta_geometric = avg.geometric();
  rec.theta_normalized = avg.normalized();
  return rec;
}

}  // namespace smm
