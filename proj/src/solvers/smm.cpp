#include <algorithm>
#include <cmath>

#include "detail.hpp"
#include "smm/surrogate.hpp"

namespace smm {
namespace {

RunRecord run_smm_dense(const SolverConfig& config, const Dataset& train, const Dataset* test,
                        const StepObserver& observer) {
  RunRecord rec;
  rec.rho = resolve_rho(config, train);
  const double mu = config.loss.ridge_mu;
  ParamVec theta = detail::initial_theta(config, train.p);
  ParamVec theta_prev = theta;
  AggregateSurrogate agg(theta, rec.rho, config.reg);
  AveragingState avg(config.averaging, theta, solver_weight(config.schedule, 1, config.force_unit_first_weight));
  detail::Recorder recorder(config, train, test, rec);
  detail::StabilityMonitor stability(config, rec.rho);
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
    agg.update(bg.grad, theta_prev, w, mu, bg.value);
    theta = agg.minimize();

    stability.observe_subgradient(detail::composite_subgradient_norm(config.reg, theta_prev, bg.grad, mu));
    const double step_norm = (theta - theta_prev).norm();
    stability.check(n, step_norm, w, rec);
    if (observer) observer(StepView{n, w, theta, theta_prev, avg, stability.r_hat(), rec.rho});

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

// Lazy l1 mode. Between touches, a coordinate with zero gradient follows
//   |q| -> |q| - w_k lambda   while |q| > lambda,
//   |q| -> (1 - w_k) |q|      afterwards,
// so it is caught up in closed form from prefix sums of w_k and log(1 - w_k).
class LazyState {
 public:
  LazyState(std::size_t p, double rho, double lambda) : q_(ParamVec::Zero(p)), last_(p, 1), rho_(rho), lambda_(lambda) {
    S_ = {0.0, 0.0};
    P_ = {0.0, 0.0};
  }

  ParamVec& q() { return q_; }

  void push_weight(double w) {
    S_.push_back(S_.back() + w);
    P_.push_back(P_.back() + std::log1p(-w));
  }

  /// Brings q_j up to date after step `target`.
  void catch_up(std::size_t j, std::uint64_t target) {
    const std::uint64_t t = last_[j];
    if (t >= target) return;
    last_[j] = target;
    double a = std::abs(q_[j]);
    if (a == 0.0 || lambda_ == 0.0) return;
    const double sign = q_[j] > 0.0 ? 1.0 : -1.0;
    // Step i is linear while S[i-1] - S[t] < (a - lambda) / lambda.
    std::uint64_t m = t;
    if (a > lambda_) {
      const double limit = (a - lambda_) / lambda_;
      std::uint64_t lo = t + 1, hi = target;
      while (lo <= hi) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        if (S_[mid - 1] - S_[t] < limit) {
          m = mid;
          lo = mid + 1;
        } else {
          hi = mid - 1;
        }
      }
      a -= lambda_ * (S_[m] - S_[t]);
    }
    if (m < target) a *= std::exp(P_[target] - P_[m]);
    q_[j] = sign * a;
  }

  double theta_of(std::size_t j) const { return soft_threshold(q_[j], lambda_) / rho_; }

  void touch(std::size_t j, std::uint64_t n) { last_[j] = n; }

  ParamVec materialize(std::uint64_t n) {
    ParamVec theta(q_.size());
    for (Eigen::Index j = 0; j < q_.size(); ++j) {
      catch_up(static_cast<std::size_t>(j), n);
      theta[j] = theta_of(static_cast<std::size_t>(j));
    }
    return theta;
  }

 private:
  ParamVec q_;
  std::vector<std::uint64_t> last_;
  std::vector<double> S_, P_;
  double rho_;
  double lambda_;
};

RunRecord run_smm_lazy(const SolverConfig& config, const Dataset& train, const Dataset* test) {
  RunRecord rec;
  rec.rho = resolve_rho(config, train);
  const double rho = rec.rho;
  const double lambda = l1_strength(config.reg);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const ParamVec theta0 = detail::initial_theta(config, train.p);
  LazyState state(train.p, rho, lambda);
  detail::Recorder recorder(config, train, test, rec);
  detail::MinibatchGradient gradient(train.p);
  detail::SampleStream stream(config, train.size());

  recorder.record(0, 0.0, theta0, 0.0, 0.0);
  ParamVec theta = theta0;  // kept current only on touched coordinates
  std::vector<std::uint32_t> support;
  const std::uint32_t* idx = nullptr;
  std::size_t count = 0;
  while (stream.next(idx, count)) {
    const std::uint64_t n = stream.step();
    const double w = solver_weight(config.schedule, n, config.force_unit_first_weight);
    if (n == 1) {
      if (w != 1.0) throw ConfigError("solver.lazy needs w_1 = 1");
      const detail::BatchGradient bg = gradient(config.loss, theta0, train, idx, count);
      state.q() = rho * theta0;
      for (std::size_t k = 0; k < bg.grad.nnz(); ++k) state.q()[bg.grad.indices[k]] -= bg.grad.values[k];
      for (Eigen::Index j = 0; j < theta.size(); ++j) theta[j] = state.theta_of(static_cast<std::size_t>(j));
    } else {
      if (!(w < 1.0)) throw ConfigError("solver.lazy needs w_n < 1 for n >= 2");
      state.push_weight(w);
      support.clear();
      for (std::size_t b = 0; b < count; ++b) {
        const auto& ix = train.samples[idx[b]].features.indices;
        support.insert(support.end(), ix.begin(), ix.end());
      }
      std::sort(support.begin(), support.end());
      support.erase(std::unique(support.begin(), support.end()), support.end());
      for (std::uint32_t j : support) {
        state.catch_up(j, n - 1);
        theta[j] = state.theta_of(j);
      }
      const detail::BatchGradient bg = gradient(config.loss, theta, train, idx, count);
      std::size_t k = 0;
      for (std::uint32_t j : support) {
        double g = 0.0;
        if (k < bg.grad.nnz() && bg.grad.indices[k] == j) g = bg.grad.values[k++];
        state.q()[j] = (1.0 - w) * state.q()[j] + w * (rho * theta[j] - g);
        state.touch(j, n);
        theta[j] = state.theta_of(j);
      }
    }
    if (stream.should_record()) {
      theta = state.materialize(n);
      recorder.record(n, stream.epoch(), theta, nan, w);
    }
  }
  rec.steps = stream.step();
  rec.theta = rec.steps > 0 ? state.materialize(rec.steps) : theta0;
  rec.theta_geometric = rec.theta;
  rec.theta_normalized = rec.theta;
  return rec;
}

}  // namespace

RunRecord run_smm(const SolverConfig& config, const Dataset& train, const Dataset* test, const StepObserver& observer) {
  validate(config);
  validate(config.reg, train.p);
  if (train.empty()) throw ConfigError("training set is empty");
  if (config.lazy) return run_smm_lazy(config, train, test);
  return run_smm_dense(config, train, test, observer);
}

}  // namespace smm
