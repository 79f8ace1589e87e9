#include "smm/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <json.hpp>

#include "smm/data_io.hpp"
#include "smm/parallel.hpp"
#include "smm/rng.hpp"
#include "smm/surrogate.hpp"

namespace smm {
namespace {

struct Reference {
  ParamVec theta;
  double f_star = 0.0;
  double dist2 = 0.0;  // ||theta* - theta0||^2
};

ParamVec start_point(const RateProblem& problem) {
  return problem.theta0.size() ? problem.theta0 : ParamVec::Zero(static_cast<Eigen::Index>(problem.data.p));
}

Reference reference_for(const RateProblem& problem) {
  const ReferenceSolution ref = solve_reference(problem.data, problem.loss, problem.reg);
  Reference out;
  out.theta = ref.theta;
  out.f_star = ref.objective;
  out.dist2 = (ref.theta - start_point(problem)).squaredNorm();
  return out;
}

enum class Observed { AveragedNormalized, GeometricPlusDistance };

struct SeedResult {
  std::vector<double> observed;
  double r_hat = 0.0;
  std::uint64_t violations = 0;
  std::vector<MetricsRow> rows;
};

// Runs one SMM seed and records the observed gap at each (sorted) step in `at`.
SeedResult run_seed(const RateProblem& problem, const SolverConfig& config, const std::vector<std::uint64_t>& at,
                    const Reference& ref, Observed what) {
  SeedResult out;
  out.observed.assign(at.size(), std::numeric_limits<double>::quiet_NaN());
  std::size_t next = 0;
  const StepObserver observer = [&](const StepView& v) {
    while (next < at.size() && at[next] < v.n) ++next;
    if (next >= at.size() || at[next] != v.n) return;
    if (what == Observed::AveragedNormalized) {
      out.observed[next] =
          batch_objective(v.averages.normalized(), problem.data, problem.reg, problem.loss) - ref.f_star;
    } else {
      out.observed[next] = batch_objective(v.averages.geometric(), problem.data, problem.reg, problem.loss) -
                           ref.f_star + 0.5 * v.rho * (ref.theta - v.theta).squaredNorm();
    }
  };
  const RunRecord rec = run_smm(config, problem.data, nullptr, observer);
  out.r_hat = rec.r_hat;
  out.violations = rec.stability_violations;
  out.rows = rec.rows;
  return out;
}

struct MultiSeed {
  std::vector<double> mean;  // per entry of `at`
  double r_hat = 0.0;
  std::uint64_t violations = 0;
  std::vector<std::vector<MetricsRow>> rows;
};

MultiSeed run_seeds(const RateProblem& problem, SolverConfig config, const std::vector<std::uint64_t>& at,
                    const Reference& ref, Observed what, std::size_t seeds) {
  std::vector<SeedResult> results(seeds);
  parallel_for(seeds, [&](std::size_t s) {
    SolverConfig c = config;
    c.seed = s + 1;
    results[s] = run_seed(problem, c, at, ref, what);
  });
  MultiSeed out;
  out.mean.assign(at.size(), 0.0);
  for (const SeedResult& r : results) {
    for (std::size_t i = 0; i < at.size(); ++i) out.mean[i] += r.observed[i];
    out.r_hat = std::max(out.r_hat, r.r_hat);
    out.violations += r.violations;
    out.rows.push_back(r.rows);
  }
  for (double& m : out.mean) m /= static_cast<double>(seeds);
  return out;
}

SolverConfig base_config(const RateProblem& problem, const RateCheckOptions& o, std::uint64_t steps) {
  SolverConfig c;
  c.solver = SolverKind::SMM;
  c.loss = problem.loss;
  c.reg = problem.reg;
  c.theta0 = problem.theta0;
  c.max_steps = steps;
  c.epochs = (steps + problem.data.size() - 1) / problem.data.size();
  c.record_time = false;
  c.enforce_stability = o.enforce_stability;
  c.stability_r_scale = o.stability_r_scale;
  c.stability_rho_scale = o.stability_rho_scale;
  return c;
}

void require_seeds(const RateCheckOptions& o) {
  if (o.seeds < 10) throw ConfigError("rate checks need at least 10 seeds");
  if (o.checkpoints.empty()) throw ConfigError("rate checks need checkpoints");
}

std::vector<std::uint64_t> sorted_unique(std::vector<std::uint64_t> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

double index_of(const std::vector<std::uint64_t>& v, std::uint64_t x) {
  return static_cast<double>(std::lower_bound(v.begin(), v.end(), x) - v.begin());
}

void finish(BoundCheck& check, double slack) {
  check.pass = true;
  for (const Checkpoint& cp : check.checkpoints) {
    if (!std::isfinite(cp.bound) || !std::isfinite(cp.observed) || cp.observed > cp.bound * slack) check.pass = false;
  }
}

}  // namespace

RateProblem make_rate_problem(const RateProblemOptions& o) {
  SyntheticLogregOptions g;
  g.p = o.p;
  g.n = o.n;
  g.k_true = o.k_true;
  g.noise = o.noise;
  g.density = o.density;
  g.seed = o.seed;
  RateProblem problem;
  problem.data = generate_synthetic_logreg(g).train;
  problem.loss = Loss{LossKind::Logistic, o.ridge_mu};
  problem.reg = L1{o.lambda};
  return problem;
}

BoundCheck check_constant_weights(const RateProblem& problem, double gamma, std::uint64_t horizon, const RateCheckOptions& o) {
  require_seeds(o);
  const auto at = sorted_unique(o.checkpoints);
  if (at.back() > horizon) throw ConfigError("checkpoints must not exceed the horizon");
  const ConstantFiniteHorizon schedule{gamma, horizon};
  validate(WeightSchedule(schedule));
  const Reference ref = reference_for(problem);
  const double L = max_lipschitz_constant(problem.loss.kind, problem.data) + problem.loss.ridge_mu;

  SolverConfig c = base_config(problem, o, at.back());
  c.schedule = schedule;
  c.averaging = AveragingMode::Normalized;
  c.force_unit_first_weight = false;
  c.rho = L;
  const MultiSeed ms = run_seeds(problem, c, at, ref, Observed::AveragedNormalized, o.seeds);

  BoundCheck check;
  check.check = "prop31";
  double sw = 0.0, sw2 = 0.0;
  std::size_t i = 0;
  for (std::uint64_t n = 1; n <= at.back(); ++n) {
    const double w = weight(schedule, n);
    sw += w;
    sw2 += w * w;
    if (n == at[i]) {
      const double bound = (L * ref.dist2 + ms.r_hat * ms.r_hat / L * sw2) / (2.0 * sw);
      check.checkpoints.push_back({n, ms.mean[i], bound});
      ++i;
    }
  }
  check.stability_violations = ms.violations;
  check.seed_rows = ms.rows;
  check.constants = {{"L", L},         {"rho", L},           {"R_hat", ms.r_hat},
                     {"f_star", ref.f_star}, {"dist_theta_star", std::sqrt(ref.dist2)},
                     {"gamma", gamma}, {"horizon", static_cast<double>(horizon)},
                     {"seeds", static_cast<double>(o.seeds)}, {"slack", o.slack},
                     {"stability_violations", static_cast<double>(ms.violations)}};
  finish(check, o.slack);
  return check;
}

BoundCheck check_sqrt_weights(const RateProblem& problem, double gamma, const RateCheckOptions& o) {
  require_seeds(o);
  const auto at = sorted_unique(o.checkpoints);
  if (at.front() < 2) throw ConfigError("the decreasing-weight bound is checked for n >= 2");
  const SqrtDecay schedule{gamma};
  validate(WeightSchedule(schedule));
  const Reference ref = reference_for(problem);
  const double L = max_lipschitz_constant(problem.loss.kind, problem.data) + problem.loss.ridge_mu;

  SolverConfig c = base_config(problem, o, at.back());
  c.schedule = schedule;
  c.averaging = AveragingMode::Normalized;
  c.force_unit_first_weight = false;
  c.rho = L;
  const MultiSeed ms = run_seeds(problem, c, at, ref, Observed::AveragedNormalized, o.seeds);

  BoundCheck check;
  check.check = "cor32";
  for (std::size_t i = 0; i < at.size(); ++i) {
    const double n = static_cast<double>(at[i]);
    const double bound = L * ref.dist2 / (2.0 * gamma * std::sqrt(n)) +
                         ms.r_hat * ms.r_hat * gamma * (1.0 + std::log(n)) / (2.0 * L * std::sqrt(n));
    check.checkpoints.push_back({at[i], ms.mean[i], bound});
  }
  check.stability_violations = ms.violations;
  check.seed_rows = ms.rows;
  check.constants = {{"L", L},         {"rho", L},           {"R_hat", ms.r_hat},
                     {"f_star", ref.f_star}, {"dist_theta_star", std::sqrt(ref.dist2)},
                     {"gamma", gamma}, {"seeds", static_cast<double>(o.seeds)}, {"slack", o.slack},
                     {"stability_violations", static_cast<double>(ms.violations)}};
  finish(check, o.slack);
  return check;
}

BoundCheck check_strongly_convex(const RateProblem& problem, const RateCheckOptions& o, std::uint64_t slope_lo,
                        std::uint64_t slope_hi, double max_slope) {
  require_seeds(o);
  const double mu = problem.loss.ridge_mu;
  if (!(mu > 0.0)) throw ConfigError("the strongly convex check needs a ridge-augmented loss (mu > 0)");
  if (!(slope_lo < slope_hi)) throw ConfigError("slope window is empty");
  const Reference ref = reference_for(problem);
  const double L = max_lipschitz_constant(problem.loss.kind, problem.data);
  const double rho = L + mu;
  const double beta = mu / rho;

  std::vector<std::uint64_t> slope_points;
  const int k = 10;
  for (int i = 0; i <= k; ++i) {
    const double t = static_cast<double>(i) / k;
    slope_points.push_back(static_cast<std::uint64_t>(std::llround(
        std::exp(std::log(static_cast<double>(slope_lo)) * (1 - t) + std::log(static_cast<double>(slope_hi)) * t))));
  }
  std::vector<std::uint64_t> all = o.checkpoints;
  all.insert(all.end(), slope_points.begin(), slope_points.end());
  all = sorted_unique(all);

  SolverConfig c = base_config(problem, o, all.back());
  c.schedule = StronglyConvex{beta};
  c.averaging = AveragingMode::Geometric;
  c.force_unit_first_weight = true;
  c.rho = rho;
  const MultiSeed ms = run_seeds(problem, c, all, ref, Observed::GeometricPlusDistance, o.seeds);

  BoundCheck check;
  check.check = "prop33";
  const double scale = std::max(2.0 * ms.r_hat * ms.r_hat / mu, rho * ref.dist2);
  for (std::uint64_t n : sorted_unique(o.checkpoints)) {
    const double obs = ms.mean[static_cast<std::size_t>(index_of(all, n))];
    check.checkpoints.push_back({n, obs, scale / (beta * static_cast<double>(n) + 1.0)});
  }
  std::vector<double> xs, ys;
  for (std::uint64_t n : slope_points) {
    xs.push_back(static_cast<double>(n));
    ys.push_back(ms.mean[static_cast<std::size_t>(index_of(all, n))]);
  }
  const double slope = fit_loglog_slope(xs, ys, 0.0, static_cast<double>(slope_lo), static_cast<double>(slope_hi));
  check.stability_violations = ms.violations;
  check.seed_rows = ms.rows;
  check.constants = {{"L", L},
                     {"mu", mu},
                     {"rho", rho},
                     {"beta", beta},
                     {"R_hat", ms.r_hat},
                     {"f_star", ref.f_star},
                     {"dist_theta_star", std::sqrt(ref.dist2)},
                     {"seeds", static_cast<double>(o.seeds)},
                     {"slack", o.slack},
                     {"slope", slope},
                     {"max_slope", max_slope},
                     {"stability_violations", static_cast<double>(ms.violations)}};
  finish(check, o.slack);
  if (!(slope <= max_slope)) {
    check.pass = false;
    check.notes.push_back("log-log slope " + std::to_string(slope) + " exceeds " + std::to_string(max_slope));
  }
  return check;
}

BoundCheck check_stability(const RateProblem& convex, const RateProblem& strongly_convex, double gamma,
                           std::uint64_t horizon, const RateCheckOptions& o) {
  RateCheckOptions plain = o;
  plain.enforce_stability = false;
  plain.stability_r_scale = 1.0;
  plain.stability_rho_scale = 1.0;
  RateCheckOptions corrupted = plain;
  corrupted.stability_r_scale = 0.5;
  corrupted.stability_rho_scale = 2.0;

  BoundCheck check;
  check.check = "stability";
  std::uint64_t violations = 0, control = 0;
  const auto tally = [&](const RateCheckOptions& opt, std::uint64_t& into) {
    into += check_constant_weights(convex, gamma, horizon, opt).stability_violations;
    into += check_sqrt_weights(convex, std::min(gamma, 1.0), opt).stability_violations;
    into += check_strongly_convex(strongly_convex, opt).stability_violations;
  };
  tally(plain, violations);
  tally(corrupted, control);
  check.stability_violations = violations;
  check.constants = {{"violations", static_cast<double>(violations)},
                     {"control_violations", static_cast<double>(control)},
                     {"seeds", static_cast<double>(o.seeds)}};
  check.pass = violations == 0 && control > 0;
  if (control == 0) check.notes.push_back("corrupted control (R/2, 2 rho) did not trip");
  return check;
}

double fit_loglog_slope(const std::vector<double>& n, const std::vector<double>& value, double offset, double n_lo,
                        double n_hi) {
  if (n.size() != value.size()) throw std::invalid_argument("fit_loglog_slope: size mismatch");
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double v = value[i] - offset;
    if (n[i] < n_lo || n[i] > n_hi || !(n[i] > 0.0) || !(v > 0.0)) continue;
    xs.push_back(std::log(n[i]));
    ys.push_back(std::log(v));
  }
  if (xs.size() < 2) return 0.0;
  const double k = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= k;
  my /= k;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

double fit_loglog_slope(const std::vector<MetricsRow>& rows, const std::string& column, double offset, double n_lo,
                        double n_hi) {
  std::vector<double> n, v;
  for (const MetricsRow& r : rows) {
    n.push_back(static_cast<double>(r.iter));
    if (column == "train_obj") v.push_back(r.train_obj);
    else if (column == "test_obj") v.push_back(r.test_obj);
    else if (column == "step_norm") v.push_back(r.step_norm);
    else if (column == "w_n") v.push_back(r.w_n);
    else if (column == "nnz") v.push_back(static_cast<double>(r.nnz));
    else throw ConfigError("unknown metrics column '" + column + "'");
  }
  return fit_loglog_slope(n, v, offset, n_lo, n_hi);
}

bool SurrogateSuiteReport::pass() const {
  return std::all_of(kinds.begin(), kinds.end(), [](const SurrogateKindReport& k) { return k.pass(); });
}

SurrogateSuiteReport surrogate_property_suite(LossKind loss_kind, const Regularizer& reg, std::uint64_t trials,
                                              std::uint64_t seed, double L_scale, double dc_lambda,
                                              double dc_epsilon) {
  constexpr std::size_t p = 8;
  validate(reg, p);
  SurrogateSuiteReport report;
  report.L_scale = L_scale;
  const Loss loss{loss_kind, 0.0};
  const char* names[] = {"lipschitz_gradient", "proximal_gradient", "dc_log_penalty"};
  for (int kind_index = 0; kind_index < 3; ++kind_index) {
    SurrogateKindReport kr;
    kr.kind = names[kind_index];
    CounterRng rng(stream_key(seed, "surrogates", static_cast<std::uint64_t>(kind_index)));
    for (std::uint64_t t = 0; t < trials; ++t) {
      Sample s;
      const std::size_t nnz = 1 + rng.below(p);
      s.features.indices = sample_without_replacement(p, nnz, rng);
      s.features.values.resize(nnz);
      for (double& v : s.features.values) v = rng.normal();
      const double norm = std::sqrt(s.features.squared_norm());
      const double target = rng.bernoulli(0.5) ? 1.0 : rng.uniform(0.1, 3.0);
      for (double& v : s.features.values) v *= target / norm;
      s.label = loss_kind == LossKind::Logistic ? (rng.bernoulli(0.5) ? 1.0 : -1.0) : rng.normal();
      const ParamVec x = s.features.to_dense(p);

      const double kscale = std::array<double, 3>{0.01, 1.0, 5.0}[rng.below(3)];
      ParamVec kappa(p);
      for (std::size_t j = 0; j < p; ++j) kappa[static_cast<Eigen::Index>(j)] = kscale * rng.normal();
      if (rng.bernoulli(0.3))
        for (std::size_t j = 0; j < p; ++j)
          if (rng.bernoulli(0.5)) kappa[static_cast<Eigen::Index>(j)] = 0.0;
      if (rng.bernoulli(0.3)) kappa -= (x.dot(kappa) / x.squaredNorm()) * x;  // margin near zero

      ParamVec dir(p);
      if (rng.bernoulli(0.35)) {
        dir = (rng.bernoulli(0.5) ? 1.0 : -1.0) * x / x.norm();
      } else {
        for (std::size_t j = 0; j < p; ++j) dir[static_cast<Eigen::Index>(j)] = rng.normal();
        dir.normalize();
      }
      const double step = std::exp(rng.uniform(std::log(1e-4), std::log(10.0)));
      const ParamVec theta = kappa + step * dir;

      const double L = L_scale * lipschitz_constant(loss_kind, s);
      SurrogateKind kind;
      if (kind_index == 0) kind = LipschitzGradientSurrogate{L};
      else if (kind_index == 1) kind = ProximalGradientSurrogate{L, reg};
      else kind = DcLogPenaltySurrogate{L, dc_lambda, dc_epsilon};

      const double g = surrogate_value(kind, loss, kappa, theta, s);
      const double f = surrogate_target(kind, loss, theta, s);
      const double g0 = surrogate_value(kind, loss, kappa, kappa, s);
      const double f0 = surrogate_target(kind, loss, kappa, s);
      const double env = 0.5 * surrogate_error_lipschitz(kind) * (theta - kappa).squaredNorm();
      ++kr.trials;
      if (g < f - 1e-10) {
        ++kr.majorization_failures;
        kr.worst_majorization = std::max(kr.worst_majorization, f - g);
      }
      if (std::abs(g0 - f0) > 1e-12) ++kr.tangency_failures;
      if (std::abs(g - f) > env + 1e-10) {
        ++kr.envelope_failures;
        kr.worst_envelope = std::max(kr.worst_envelope, std::abs(g - f) - env);
      }
    }
    report.kinds.push_back(kr);
  }
  return report;
}

namespace {

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(format_real(v)); }

}  // namespace

std::string to_json(const BoundCheck& check) {
  nlohmann::json j;
  j["check"] = check.check;
  j["pass"] = check.pass;
  j["checkpoints"] = nlohmann::json::array();
  for (const Checkpoint& cp : check.checkpoints)
    j["checkpoints"].push_back({{"n", cp.n}, {"observed", number(cp.observed)}, {"bound", number(cp.bound)}});
  j["constants"] = nlohmann::json::object();
  for (const auto& [k, v] : check.constants) j["constants"][k] = number(v);
  if (!check.notes.empty()) j["notes"] = check.notes;
  return j.dump(2);
}

std::string to_json(const SurrogateSuiteReport& report) {
  nlohmann::json j;
  j["check"] = "surrogates";
  j["pass"] = report.pass();
  j["checkpoints"] = nlohmann::json::array();
  j["constants"] = {{"L_scale", report.L_scale}};
  j["kinds"] = nlohmann::json::array();
  for (const SurrogateKindReport& k : report.kinds) {
    j["kinds"].push_back({{"kind", k.kind},
                          {"trials", k.trials},
                          {"majorization_failures", k.majorization_failures},
                          {"tangency_failures", k.tangency_failures},
                          {"envelope_failures", k.envelope_failures},
                          {"worst_majorization", k.worst_majorization},
                          {"worst_envelope", k.worst_envelope},
                          {"pass", k.pass()}});
  }
  return j.dump(2);
}

}  // namespace smm
