#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "smm/losses.hpp"
#include "smm/prox.hpp"
#include "smm/solvers.hpp"
#include "smm/types.hpp"

namespace smm {

/// A finite training problem for the rate checks; the empirical risk stands in
/// for the expected cost.
struct RateProblem {
  Dataset data;
  Loss loss;
  Regularizer reg = L1{0.0};
  ParamVec theta0;  ///< empty means zeros
};

struct RateProblemOptions {
  std::size_t p = 50;
  std::size_t n = 10000;
  std::size_t k_true = 10;
  double noise = 0.1;
  double density = 0.2;
  double lambda = 1e-3;
  double ridge_mu = 0.0;
  std::uint64_t seed = 1;
};

RateProblem make_rate_problem(const RateProblemOptions& options);

struct Checkpoint {
  std::uint64_t n = 0;
  double observed = 0.0;
  double bound = 0.0;
};

struct BoundCheck {
  std::string check;
  bool pass = false;
  std::vector<Checkpoint> checkpoints;
  std::map<std::string, double> constants;
  std::vector<std::string> notes;
  std::uint64_t stability_violations = 0;
  /// Per-seed metric rows (seed order), for reproducibility comparisons.
  std::vector<std::vector<MetricsRow>> seed_rows;
};

struct RateCheckOptions {
  std::size_t seeds = 20;
  std::vector<std::uint64_t> checkpoints = {100, 1000, 10000};
  double slack = 1.05;
  /// Runs count stability violations instead of aborting.
  bool enforce_stability = false;
  double stability_r_scale = 1.0;
  double stability_rho_scale = 1.0;
};

/// Constant weights w_k = gamma / sqrt(horizon), normalized averaging, rho = L.
/// Observed: seed mean of f(theta_bar_{n-1}) - f*; bound:
///   (L ||theta* - theta0||^2 + (R^2 / L) sum_{k<=n} w_k^2) / (2 sum_{k<=n} w_k).
BoundCheck check_constant_weights(const RateProblem& problem, double gamma, std::uint64_t horizon,
                        const RateCheckOptions& options = {});

/// w_n = gamma / sqrt(n); bound L ||theta* - theta0||^2 / (2 gamma sqrt n) + R^2 gamma (1 + log n) / (2 L sqrt n).
BoundCheck check_sqrt_weights(const RateProblem& problem, double gamma, const RateCheckOptions& options = {});

/// Ridge-augmented loss (mu = loss.ridge_mu > 0), rho = L + mu, beta = mu / rho,
/// w_n = (1 + beta) / (1 + beta n), geometric averaging. Observed:
/// f(theta_hat_{n-1}) - f* + (rho / 2) ||theta* - theta_n||^2; bound
/// max(2 R^2 / mu, rho ||theta* - theta0||^2) / (beta n + 1). Also requires the
/// log-log slope of the observed gap over [slope_lo, slope_hi] to be <= max_slope.
BoundCheck check_strongly_convex(const RateProblem& problem, const RateCheckOptions& options = {},
                        std::uint64_t slope_lo = 1000, std::uint64_t slope_hi = 10000, double max_slope = -0.8);

/// Zero violations of ||theta_n - theta_{n-1}|| <= 2 R w_n / rho over all three
/// rate configurations, and the corrupted control (R / 2, 2 rho) must trip.
BoundCheck check_stability(const RateProblem& convex, const RateProblem& strongly_convex, double gamma,
                           std::uint64_t horizon, const RateCheckOptions& options = {});

/// Least-squares slope of log(value - offset) against log(n) over n in [n_lo, n_hi].
/// Entries with value - offset <= 0 are skipped; fewer than two points give 0.
double fit_loglog_slope(const std::vector<double>& n, const std::vector<double>& value, double offset = 0.0,
                        double n_lo = 0.0, double n_hi = std::numeric_limits<double>::infinity());

/// Slope of a metrics column ("train_obj", "test_obj", "step_norm", ...) against iter.
double fit_loglog_slope(const std::vector<MetricsRow>& rows, const std::string& column, double offset,
                        double n_lo, double n_hi);

struct SurrogateKindReport {
  std::string kind;
  std::uint64_t trials = 0;
  std::uint64_t majorization_failures = 0;  ///< g < f - 1e-10
  std::uint64_t tangency_failures = 0;      ///< |g(kappa) - f(kappa)| > 1e-12
  std::uint64_t envelope_failures = 0;      ///< |g - f| > (L/2)||theta - kappa||^2 + 1e-10
  double worst_majorization = 0.0;
  double worst_envelope = 0.0;
  bool pass() const { return majorization_failures == 0 && tangency_failures == 0 && envelope_failures == 0; }
};

struct SurrogateSuiteReport {
  std::vector<SurrogateKindReport> kinds;
  double L_scale = 1.0;
  bool pass() const;
};

/// Randomized Def.-style membership checks for the Lipschitz-gradient,
/// proximal-gradient and DC log-penalty surrogates. L_scale multiplies the
/// per-sample constant (0.5 is the negative control).
SurrogateSuiteReport surrogate_property_suite(LossKind loss_kind, const Regularizer& reg, std::uint64_t trials,
                                              std::uint64_t seed, double L_scale = 1.0, double dc_lambda = 0.1,
                                              double dc_epsilon = 0.01);

/// {check, pass, checkpoints: [{n, observed, bound}], constants}.
std::string to_json(const BoundCheck& check);
std::string to_json(const SurrogateSuiteReport& report);

}  // namespace smm
