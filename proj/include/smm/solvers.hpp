#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "smm/data_io.hpp"
#include "smm/losses.hpp"
#include "smm/prox.hpp"
#include "smm/schedule.hpp"
#include "smm/types.hpp"

namespace smm {

enum class SolverKind { SMM, FOBOS, RDA, FISTA, BatchDC, OnlineDC };

SolverKind parse_solver_kind(const std::string& name);
std::string to_string(SolverKind kind);

struct SolverConfig {
  SolverKind solver = SolverKind::SMM;
  WeightSchedule schedule = TunedSqrt{0};
  AveragingMode averaging = AveragingMode::None;
  std::uint64_t epochs = 1;
  std::size_t minibatch = 1;
  std::uint64_t seed = 0;
  Loss loss;
  Regularizer reg = L1{0.0};

  /// Surrogate curvature; 0 picks max per-sample Lipschitz constant + ridge_mu.
  double rho = 0.0;
  /// Steps between metric rows; 0 means a tenth of an epoch.
  std::uint64_t eval_every = 0;
  /// Stop after this many steps (0 = run all epochs).
  std::uint64_t max_steps = 0;
  bool force_unit_first_weight = true;
  bool record_time = true;
  ParamVec theta0;  ///< empty means zeros

  double dc_epsilon = 0.01;
  std::size_t dc_rounds = 5;

  /// RDA: eta_n = rda_gamma * sqrt(n).
  double rda_gamma = 1.0;

  /// FISTA: stop when the relative objective change drops below this (0 = never).
  double fista_tol = 0.0;
  bool fista_backtracking = false;
  bool fista_restart = false;

  /// SMM with psi in {none, l1}: skip coordinates outside each sample's support.
  bool lazy = false;

  /// Throw NumericalError on a stability-lemma violation instead of counting it.
  bool enforce_stability = true;
  /// Multipliers applied to R-hat and rho inside the stability check only
  /// (negative controls).
  double stability_r_scale = 1.0;
  double stability_rho_scale = 1.0;
};

/// Throws ConfigError on inconsistent settings.
void validate(const SolverConfig& config);

/// What a step observer sees after step n. `averages` has not yet absorbed theta_n,
/// so it holds the averaged iterates at n - 1.
struct StepView {
  std::uint64_t n;
  double w;
  const ParamVec& theta;
  const ParamVec& theta_prev;
  const AveragingState& averages;
  double r_hat;
  double rho;
};
using StepObserver = std::function<void(const StepView&)>;

struct RunRecord {
  std::vector<MetricsRow> rows;
  ParamVec theta;
  ParamVec theta_geometric;
  ParamVec theta_normalized;
  std::uint64_t steps = 0;
  double rho = 0.0;
  double r_hat = 0.0;
  std::uint64_t stability_checks = 0;
  std::uint64_t stability_violations = 0;
  double max_stability_ratio = 0.0;  ///< max ||theta_n - theta_{n-1}|| / (2 R w_n / rho)
  std::vector<double> round_objectives;  ///< BatchDC, one entry per round
  std::vector<std::string> warnings;

  const ParamVec& output(AveragingMode mode) const;
};

/// Objective that the given config minimizes: loss + psi, or loss + lambda
/// sum log(|theta| + eps) for the DC solvers.
double run_objective(const SolverConfig& config, const ParamVec& theta, const Dataset& data);

/// Curvature used by the stochastic solvers for this config and training set.
double resolve_rho(const SolverConfig& config, const Dataset& train);

RunRecord run_smm(const SolverConfig& config, const Dataset& train, const Dataset* test = nullptr,
                  const StepObserver& observer = {});
RunRecord run_fobos(const SolverConfig& config, const Dataset& train, const Dataset* test = nullptr);
RunRecord run_rda(const SolverConfig& config, const Dataset& train, const Dataset* test = nullptr);
/// One full-gradient iteration per epoch.
RunRecord run_fista(const SolverConfig& config, const Dataset& train, const Dataset* test = nullptr);
RunRecord run_batch_dc(const SolverConfig& config, const Dataset& train, const Dataset* test = nullptr);
RunRecord run_online_dc(const SolverConfig& config, const Dataset& train, const Dataset* test = nullptr,
                        const StepObserver& observer = {});

/// Dispatches on config.solver.
RunRecord run_solver(const SolverConfig& config, const Dataset& train, const Dataset* test = nullptr);

struct ReferenceSolution {
  ParamVec theta;
  double objective = 0.0;
  std::uint64_t iterations = 0;
  bool converged = false;
};

/// High-accuracy FISTA (backtracking + adaptive restart) on loss + psi.
ReferenceSolution solve_reference(const Dataset& data, const Loss& loss, const Regularizer& reg,
                                  double tol = 1e-12, std::uint64_t max_iters = 20000,
                                  const ParamVec& warm_start = ParamVec());

/// One SMM pass over `subsample` per candidate with TunedSqrt(n0); returns the
/// candidate with the lowest end-of-pass objective (ties go to the smaller n0).
std::uint64_t tune_n0(const std::vector<std::uint64_t>& candidates, const Dataset& subsample,
                      const SolverConfig& config);

/// Uniform subsample of ceil(fraction * N) samples in index order, from the "tune" stream.
Dataset subsample(const Dataset& data, double fraction, std::uint64_t seed);

}  // namespace smm
