#include <cmath>

#include "detail.hpp"
#include "smm/surrogate.hpp"

namespace smm {
namespace {

// Min-norm element of grad + mu theta + d(sum_j eta_j |theta_j|).
double weighted_subgradient_norm(const ParamVec& theta, const SparseVec& grad, double mu, const ParamVec& eta) {
  double sq = 0.0;
  std::size_t k = 0;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    double g = mu * theta[j];
    if (k < grad.indices.size() && grad.indices[k] == static_cast<std::uint32_t>(j)) g += grad.values[k++];
    double s;
    if (theta[j] > 0.0) s = g + eta[j];
    else if (theta[j] < 0.0) s = g - eta[j];
    else s = soft_threshold(g, eta[j]);
    sq += s * s;
  }
  return std::sqrt(sq);
}

}  // namespace

RunRecord run_online_dc(const SolverConfig& config, const Dataset& train, const Dataset* test,
                        const StepObserver& observer) {
  validate(config);
  if (train.empty()) throw ConfigError("training set is empty");
  RunRecord rec;
  rec.rho = resolve_rho(config, train);
  const double rho = rec.rho;
  const double mu = config.loss.ridge_mu;
  const double lambda = l1_strength(config.reg);
  ParamVec theta = detail::initial_theta(config, train.p);
  ParamVec theta_prev = theta;
  AggregateSurrogate agg(theta, rho, L1{0.0});
  ParamVec W = ParamVec::Zero(theta.size());
  AveragingState avg(config.averaging, theta, solver_weight(config.schedule, 1, config.force_unit_first_weight));
  detail::Recorder recorder(config, train, test, rec);
  detail::StabilityMonitor stability(config, rho);
  detail::MinibatchGradient gradient(train.p);
  detail::SampleStream stream(config, train.size());

  recorder.record(0, 0.0, theta, 0.0, 0.0);
  const std::uint32_t* idx = nullptr;
  std::size_t count = 0;
  while (stream.next(idx, count)) {
    const std::uint64_t n = stream.step();
    theta_prev.swap(theta);
    const double w = solver_weight(config.schedule, n, config.force_unit_first_weight);
    const detail::BatchGradient bg = gradient(config.loss, theta_prev, train, idx, count);
    const ParamVec eta = dc_reweight(theta_prev, config.dc_epsilon, lambda);
    agg.update(bg.grad, theta_prev, w, mu);
    W = (1.0 - w) * W + w * eta;
    const ParamVec q = agg.anchor();
    for (Eigen::Index j = 0; j < theta.size(); ++j) theta[j] = soft_threshold(q[j] / rho, W[j] / rho);

    stability.observe_subgradient(weighted_subgradient_norm(theta_prev, bg.grad, mu, eta));
    const double step_norm = (theta - theta_prev).norm();
    stability.check(n, step_norm, w, rec);
    if (observer) observer(StepView{n, w, theta, theta_prev, avg, stability.r_hat(), rho});

    avg.update(theta, solver_weight(config.schedule, n + 1, config.force_unit_first_weight));
    if (stream.should_record()) recorder.record(n, stream.epoch(), avg.output(theta), step_norm, w);
  }
  rec.steps = stream.step();
  rec.r_hat = stability.r_hat();
  rec.theta = std::move(theta);
  rec.theta_geometric = avg.geometric();
  rec.theta_normalized = avg.normalized();
  return rec;
}

}  // namespace smm
