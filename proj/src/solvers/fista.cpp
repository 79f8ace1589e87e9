#include <cmath>

#include "detail.hpp"
#include "smm/surrogate.hpp"

namespace smm {
namespace detail {

FistaResult fista(const Dataset& data, const Loss& loss, const Regularizer& reg, const ParamVec& x0,
                  const FistaOptions& o, const std::function<bool(std::uint64_t, const ParamVec&, double)>& on_iter) {
  if (!(o.L0 > 0.0)) throw ConfigError("FISTA needs a positive Lipschitz constant");
  FistaResult res;
  ParamVec x = x0;
  ParamVec y = x0;
  double t = 1.0;
  double L = o.L0;
  double F = batch_loss(x, data, loss) + penalty_value(reg, x);
  for (std::uint64_t k = 1; k <= o.max_iters; ++k) {
    double fy = 0.0;
    const ParamVec g = batch_gradient(y, data, loss, &fy);
    ParamVec x_new;
    double f_new = 0.0;
    if (o.backtracking) {
      L = std::max(L * 0.9, 1e-12);
      for (int tries = 0;; ++tries) {
        x_new = prox(reg, y - g / L, 1.0 / L);
        const ParamVec d = x_new - y;
        f_new = batch_loss(x_new, data, loss);
        if (f_new <= fy + g.dot(d) + 0.5 * L * d.squaredNorm() + 1e-15 * std::abs(fy) || tries >= 60) break;
        L *= 2.0;
      }
    } else {
      x_new = prox(reg, y - g / L, 1.0 / L);
      f_new = batch_loss(x_new, data, loss);
    }
    const double F_new = f_new + penalty_value(reg, x_new);
    if (!std::isfinite(F_new)) throw NumericalError("FISTA objective became non-finite at iteration " + std::to_string(k));
    if (k >= 2 && F_new > F + 1e-12) ++res.monotonicity_violations;

    const double t_new = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    if (o.restart && F_new > F) {
      t = 1.0;
      y = x_new;
    } else {
      y = x_new + ((t - 1.0) / t_new) * (x_new - x);
      t = t_new;
    }
    const double change = std::abs(F - F_new);
    x = std::move(x_new);
    F = F_new;
    res.iterations = k;
    if (on_iter && on_iter(k, x, F)) {
      res.converged = true;
      break;
    }
    if (o.tol > 0.0 && change <= o.tol * std::max(1.0, std::abs(F))) {
      res.converged = true;
      break;
    }
  }
  res.theta = std::move(x);
  res.objective = F;
  return res;
}

}  // namespace detail

RunRecord run_fista(const SolverConfig& config, const Dataset& train, const Dataset* test) {
  validate(config);
  validate(config.reg, train.p);
  if (train.empty()) throw ConfigError("training set is empty");
  RunRecord rec;
  rec.rho = resolve_rho(config, train);
  detail::Recorder recorder(config, train, test, rec);
  const ParamVec x0 = detail::initial_theta(config, train.p);
  recorder.record(0, 0.0, x0, 0.0, 0.0);
  detail::FistaOptions o;
  o.L0 = rec.rho;
  o.backtracking = config.fista_backtracking;
  o.restart = config.fista_restart;
  o.tol = config.fista_tol;
  o.max_iters = config.max_steps > 0 ? std::min(config.max_steps, config.epochs) : config.epochs;
  ParamVec prev = x0;
  const auto res = detail::fista(train, config.loss, config.reg, x0, o,
                                 [&](std::uint64_t k, const ParamVec& x, double) {
                                   recorder.record(k, static_cast<double>(k), x, (x - prev).norm(), 1.0 / o.L0);
                                   prev = x;
                                   return false;
                                 });
  if (res.monotonicity_violations > 0)
    rec.warnings.push_back("FISTA objective increased at " + std::to_string(res.monotonicity_violations) +
                           " iteration(s) after the second");
  rec.steps = res.iterations;
  rec.theta = res.theta;
  rec.theta_geometric = res.theta;
  rec.theta_normalized = res.theta;
  return rec;
}

ReferenceSolution solve_reference(const Dataset& data, const Loss& loss, const Regularizer& reg, double tol,
                                  std::uint64_t max_iters, const ParamVec& warm_start) {
  if (data.empty()) throw ConfigError("reference solve needs data");
  validate(reg, data.p);
  detail::FistaOptions o;
  o.L0 = max_lipschitz_constant(loss.kind, data) + loss.ridge_mu;
  if (!(o.L0 > 0.0)) o.L0 = 1.0;
  o.backtracking = true;
  o.restart = true;
  o.tol = 0.0;
  o.max_iters = max_iters;
  ParamVec x0 = warm_start.size() ? warm_start : ParamVec::Zero(static_cast<Eigen::Index>(data.p));
  // Stop after several consecutive iterations with relative change below tol.
  ReferenceSolution out;
  int quiet = 0;
  double last = std::numeric_limits<double>::infinity();
  ParamVec best = x0;
  double best_F = std::numeric_limits<double>::infinity();
  const auto res = detail::fista(data, loss, reg, x0, o, [&](std::uint64_t, const ParamVec& x, double F) {
    if (F < best_F) {
      best_F = F;
      best = x;
    }
    quiet = std::abs(last - F) <= tol * std::max(1.0, std::abs(F)) ? quiet + 1 : 0;
    last = F;
    return quiet >= 5;
  });
  out.converged = res.converged;
  out.iterations = res.iterations;
  out.theta = std::move(best);
  out.objective = best_F;
  return out;
}

RunRecord run_batch_dc(const SolverConfig& config, const Dataset& train, const Dataset* test) {
  validate(config);
  if (train.empty()) throw ConfigError("training set is empty");
  RunRecord rec;
  rec.rho = resolve_rho(config, train);
  const double lambda = l1_strength(config.reg);
  detail::Recorder recorder(config, train, test, rec);
  ParamVec theta = detail::initial_theta(config, train.p);
  recorder.record(0, 0.0, theta, 0.0, 0.0);
  double epochs = 0.0;
  double prev_obj = run_objective(config, theta, train);
  for (std::size_t r = 1; r <= config.dc_rounds; ++r) {
    const WeightedL1 reg{dc_reweight(theta, config.dc_epsilon, lambda), 1.0};
    detail::FistaOptions o;
    o.L0 = rec.rho;
    o.backtracking = true;
    o.restart = true;
    o.tol = 1e-8;
    o.max_iters = 500;
    const auto res = detail::fista(train, config.loss, reg, theta, o);
    if (!res.converged)
      rec.warnings.push_back("round " + std::to_string(r) + ": inner FISTA hit 500 iterations before tolerance 1e-8");
    const double step_norm = (res.theta - theta).norm();
    theta = res.theta;
    epochs += static_cast<double>(res.iterations);
    recorder.record(r, epochs, theta, step_norm, 1.0);
    const double obj = rec.rows.back().train_obj;
    if (obj > prev_obj + 1e-9)
      rec.warnings.push_back("round " + std::to_string(r) + ": DC objective increased by " + std::to_string(obj - prev_obj));
    rec.round_objectives.push_back(obj);
    prev_obj = obj;
  }
  rec.steps = config.dc_rounds;
  rec.theta = theta;
  rec.theta_geometric = theta;
  rec.theta_normalized = theta;
  return rec;
}

}  // namespace smm
