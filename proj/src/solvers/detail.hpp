#pragma once

#include <chrono>
#include <cstdint>
#include <vector>

#include "smm/solvers.hpp"

namespace smm::detail {

class Clock {
 public:
  explicit Clock(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double elapsed() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

std::uint64_t count_nnz(const ParamVec& v);

/// Appends metric rows; throws NumericalError on a non-finite training objective.
class Recorder {
 public:
  Recorder(const SolverConfig& config, const Dataset& train, const Dataset* test, RunRecord& record);
  void record(std::uint64_t iter, double epoch, const ParamVec& theta, double step_norm, double w);

 private:
  const SolverConfig& config_;
  const Dataset& train_;
  const Dataset* test_;
  RunRecord& record_;
  Clock clock_;
};

/// Averaged sparse loss gradient (ridge part excluded) and averaged loss value
/// over samples idx[0..count).
struct BatchGradient {
  SparseVec grad;
  double value = 0.0;
};

class MinibatchGradient {
 public:
  explicit MinibatchGradient(std::size_t dim) : acc_(ParamVec::Zero(static_cast<Eigen::Index>(dim))) {}
  BatchGradient operator()(const Loss& loss, const ParamVec& theta, const Dataset& data, const std::uint32_t* idx,
                           std::size_t count);

 private:
  ParamVec acc_;
  std::vector<std::uint32_t> touched_;
};

/// Norm of the min-norm element of grad + ridge_mu * theta + d psi(theta).
double composite_subgradient_norm(const Regularizer& reg, const ParamVec& theta, const SparseVec& grad,
                                  double ridge_mu);

/// Running max of the composite subgradient norm and the per-step check
/// ||theta_n - theta_{n-1}|| <= 2 R w_n / rho.
class StabilityMonitor {
 public:
  StabilityMonitor(const SolverConfig& config, double rho) : config_(config), rho_(rho) {}
  void observe_subgradient(double norm) { r_hat_ = std::max(r_hat_, norm); }
  void check(std::uint64_t n, double step_norm, double w, RunRecord& record);
  double r_hat() const { return r_hat_; }

 private:
  const SolverConfig& config_;
  double rho_;
  double r_hat_ = 0.0;
};

/// Cycles through per-epoch permutations in chunks of `minibatch`.
class SampleStream {
 public:
  SampleStream(const SolverConfig& config, std::size_t n);
  /// Next chunk, or false once the step budget is exhausted.
  bool next(const std::uint32_t*& idx, std::size_t& count);
  std::uint64_t step() const { return step_; }
  std::uint64_t total_steps() const { return total_; }
  /// Samples consumed so far divided by N.
  double epoch() const;
  bool should_record() const;

 private:
  const SolverConfig& config_;
  std::size_t n_;
  std::size_t steps_per_epoch_;
  std::uint64_t total_;
  std::uint64_t eval_every_;
  std::uint64_t step_ = 0;
  std::uint64_t epoch_index_ = 0;
  std::size_t offset_ = 0;
  std::uint64_t consumed_ = 0;
  std::vector<std::uint32_t> perm_;
};

ParamVec initial_theta(const SolverConfig& config, std::size_t dim);

struct FistaOptions {
  double L0 = 1.0;
  bool backtracking = false;
  bool restart = false;
  double tol = 0.0;
  std::uint64_t max_iters = 1;
};

struct FistaResult {
  ParamVec theta;
  double objective = 0.0;
  std::uint64_t iterations = 0;
  bool converged = false;
  std::uint64_t monotonicity_violations = 0;
};

/// Accelerated proximal gradient on batch_loss + reg. on_iter(k, x_k, F(x_k)) runs after
/// each iteration; returning true stops the solve and marks it converged.
FistaResult fista(const Dataset& data, const Loss& loss, const Regularizer& reg, const ParamVec& x0,
                  const FistaOptions& options,
                  const std::function<bool(std::uint64_t, const ParamVec&, double)>& on_iter = {});

}  // namespace smm::detail
