#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "detail.hpp"
#include "smm/rng.hpp"

namespace smm {

SolverKind parse_solver_kind(const std::string& name) {
  if (name == "smm") return SolverKind::SMM;
  if (name == "fobos") return SolverKind::FOBOS;
  if (name == "rda") return SolverKind::RDA;
  if (name == "fista") return SolverKind::FISTA;
  if (name == "batch_dc") return SolverKind::BatchDC;
  if (name == "online_dc") return SolverKind::OnlineDC;
  throw ConfigError("unknown solver '" + name + "' (smm, fobos, rda, fista, batch_dc, online_dc)");
}

std::string to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::SMM: return "smm";
    case SolverKind::FOBOS: return "fobos";
    case SolverKind::RDA: return "rda";
    case SolverKind::FISTA: return "fista";
    case SolverKind::BatchDC: return "batch_dc";
    case SolverKind::OnlineDC: return "online_dc";
  }
  return "?";
}

void validate(const SolverConfig& c) {
  if (c.epochs < 1) throw ConfigError("solver.epochs must be >= 1");
  if (c.minibatch < 1) throw ConfigError("solver.minibatch must be >= 1");
  try {
    validate(c.schedule);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(c.rho >= 0.0) || !std::isfinite(c.rho)) throw ConfigError("solver.rho must be >= 0");
  if (!(c.loss.ridge_mu >= 0.0)) throw ConfigError("loss.ridge_mu must be >= 0");
  if (c.solver == SolverKind::SMM && std::holds_alternative<StronglyConvex>(c.schedule) && !(c.loss.ridge_mu > 0.0))
    throw ConfigError("the strongly convex schedule needs loss.ridge_mu > 0");
  const bool dc = c.solver == SolverKind::BatchDC || c.solver == SolverKind::OnlineDC;
  if (dc) {
    if (!is_plain_l1(c.reg)) throw ConfigError("DC solvers take reg.kind = l1 (lambda scales the log penalty)");
    if (!(c.dc_epsilon > 0.0)) throw ConfigError("solver.dc_epsilon must be > 0");
    if (c.dc_rounds < 1) throw ConfigError("solver.dc_rounds must be >= 1");
  }
  if (!(c.rda_gamma > 0.0)) throw ConfigError("solver.rda_gamma must be > 0");
  if (!(c.fista_tol >= 0.0)) throw ConfigError("fista.tol must be >= 0");
  if (c.lazy) {
    if (c.solver != SolverKind::SMM) throw ConfigError("solver.lazy applies to smm only");
    if (!is_plain_l1(c.reg)) throw ConfigError("solver.lazy needs reg.kind = l1 or none");
    if (c.loss.ridge_mu != 0.0) throw ConfigError("solver.lazy does not support loss.ridge_mu");
    if (c.averaging != AveragingMode::None) throw ConfigError("solver.lazy does not support averaging");
  }
  if (!(c.stability_r_scale > 0.0) || !(c.stability_rho_scale > 0.0))
    throw ConfigError("stability scales must be positive");
}

const ParamVec& RunRecord::output(AveragingMode mode) const {
  switch (mode) {
    case AveragingMode::Geometric: return theta_geometric;
    case AveragingMode::Normalized: return theta_normalized;
    case AveragingMode::None: break;
  }
  return theta;
}

double run_objective(const SolverConfig& config, const ParamVec& theta, const Dataset& data) {
  if (config.solver == SolverKind::BatchDC || config.solver == SolverKind::OnlineDC)
    return batch_loss(theta, data, config.loss) + log_penalty(theta, l1_strength(config.reg), config.dc_epsilon);
  return batch_objective(theta, data, config.reg, config.loss);
}

double resolve_rho(const SolverConfig& config, const Dataset& train) {
  if (config.rho > 0.0) return config.rho;
  const double L = max_lipschitz_constant(config.loss.kind, train) + config.loss.ridge_mu;
  if (!(L > 0.0)) throw ConfigError("training data has no nonzero features; cannot pick a curvature");
  return L;
}

RunRecord run_solver(const SolverConfig& config, const Dataset& train, const Dataset* test) {
  switch (config.solver) {
    case SolverKind::SMM: return run_smm(config, train, test);
    case SolverKind::FOBOS: return run_fobos(config, train, test);
    case SolverKind::RDA: return run_rda(config, train, test);
    case SolverKind::FISTA: return run_fista(config, train, test);
    case SolverKind::BatchDC: return run_batch_dc(config, train, test);
    case SolverKind::OnlineDC: return run_online_dc(config, train, test);
  }
  throw ConfigError("unknown solver");
}

Dataset subsample(const Dataset& data, double fraction, std::uint64_t seed) {
  if (data.empty()) throw ConfigError("cannot subsample an empty dataset");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("subsample fraction must lie in (0, 1]");
  const auto k = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(data.size()))));
  CounterRng rng(stream_key(seed, "tune"));
  Dataset out;
  out.p = data.p;
  out.name = data.name + "-subsample";
  for (std::uint32_t i : sample_without_replacement(data.size(), std::min(k, data.size()), rng))
    out.samples.push_back(data.samples[i]);
  return out;
}

std::uint64_t tune_n0(const std::vector<std::uint64_t>& candidates, const Dataset& sub, const SolverConfig& config) {
  if (candidates.empty()) throw ConfigError("tune_n0: no candidates");
  if (sub.empty()) throw ConfigError("tune_n0: empty subsample");
  std::vector<std::uint64_t> sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  std::uint64_t best = sorted.front();
  double best_obj = std::numeric_limits<double>::infinity();
  for (std::uint64_t n0 : sorted) {
    SolverConfig c = config;
    c.solver = SolverKind::SMM;
    c.schedule = TunedSqrt{n0};
    c.epochs = 1;
    c.max_steps = 0;
    c.record_time = false;
    c.eval_every = std::numeric_limits<std::uint64_t>::max();
    const RunRecord rec = run_smm(c, sub);
    const double obj = run_objective(c, rec.output(c.averaging), sub);
    if (obj < best_obj) {
      best_obj = obj;
      best = n0;
    }
  }
  return best;
}

namespace detail {

std::uint64_t count_nnz(const ParamVec& v) {
  std::uint64_t n = 0;
  for (Eigen::Index j = 0; j < v.size(); ++j) n += v[j] != 0.0;
  return n;
}

Recorder::Recorder(const SolverConfig& config, const Dataset& train, const Dataset* test, RunRecord& record)
    : config_(config), train_(train), test_(test), record_(record), clock_(config.record_time) {}

void Recorder::record(std::uint64_t iter, double epoch, const ParamVec& theta, double step_norm, double w) {
  MetricsRow row;
  row.iter = iter;
  row.epoch = epoch;
  row.train_obj = run_objective(config_, theta, train_);
  if (!std::isfinite(row.train_obj)) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "non-finite objective at iteration %llu (w_n = %.17g)",
                  static_cast<unsigned long long>(iter), w);
    throw NumericalError(buf);
  }
  row.test_obj = test_ && !test_->empty() ? run_objective(config_, theta, *test_)
                                           : std::numeric_limits<double>::quiet_NaN();
  row.nnz = count_nnz(theta);
  row.elapsed_s = clock_.elapsed();
  row.step_norm = step_norm;
  row.w_n = w;
  record_.rows.push_back(row);
}

BatchGradient MinibatchGradient::operator()(const Loss& loss, const ParamVec& theta, const Dataset& data,
                                            const std::uint32_t* idx, std::size_t count) {
  BatchGradient out;
  if (count == 1) {
    LossValueGrad vg = loss.value_grad(theta, data.samples[idx[0]]);
    out.grad = std::move(vg.grad);
    out.value = vg.value;
    return out;
  }
  touched_.clear();
  for (std::size_t b = 0; b < count; ++b) {
    const LossValueGrad vg = loss.value_grad(theta, data.samples[idx[b]]);
    out.value += vg.value;
    for (std::size_t k = 0; k < vg.grad.indices.size(); ++k) {
      const std::uint32_t j = vg.grad.indices[k];
      touched_.push_back(j);
      acc_[j] += vg.grad.values[k];
    }
  }
  std::sort(touched_.begin(), touched_.end());
  touched_.erase(std::unique(touched_.begin(), touched_.end()), touched_.end());
  const double inv = static_cast<double>(count);
  out.grad.indices = touched_;
  out.grad.values.resize(touched_.size());
  for (std::size_t k = 0; k < touched_.size(); ++k) {
    out.grad.values[k] = acc_[touched_[k]] / inv;
    acc_[touched_[k]] = 0.0;
  }
  out.value /= inv;
  return out;
}

double composite_subgradient_norm(const Regularizer& reg, const ParamVec& theta, const SparseVec& grad,
                                  double ridge_mu) {
  if (is_plain_l1(reg)) {
    const double lambda = l1_strength(reg);
    double sq = 0.0;
    std::size_t k = 0;
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      double g = ridge_mu * theta[j];
      if (k < grad.indices.size() && grad.indices[k] == static_cast<std::uint32_t>(j)) g += grad.values[k++];
      double s;
      if (theta[j] > 0.0) s = g + lambda;
      else if (theta[j] < 0.0) s = g - lambda;
      else s = soft_threshold(g, lambda);
      sq += s * s;
    }
    return std::sqrt(sq);
  }
  ParamVec full = ridge_mu * theta;
  grad.axpy_into(1.0, full);
  return min_norm_subgradient(reg, theta, full).norm();
}

void StabilityMonitor::check(std::uint64_t n, double step_norm, double w, RunRecord& record) {
  const double r = r_hat_ * config_.stability_r_scale;
  const double rho = rho_ * config_.stability_rho_scale;
  const double nominal = 2.0 * r * w / rho;
  const double bound = nominal * (1.0 + 1e-12) + 1e-300;
  ++record.stability_checks;
  if (nominal > 0.0) record.max_stability_ratio = std::max(record.max_stability_ratio, step_norm / nominal);
  else if (step_norm > 0.0) record.max_stability_ratio = std::numeric_limits<double>::infinity();
  if (step_norm > bound) {
    ++record.stability_violations;
    if (config_.enforce_stability) {
      char buf[200];
      std::snprintf(buf, sizeof buf, "stability bound violated at iteration %llu: step %.17g > 2Rw/rho = %.17g",
                    static_cast<unsigned long long>(n), step_norm, nominal);
      throw NumericalError(buf);
    }
  }
}

SampleStream::SampleStream(const SolverConfig& config, std::size_t n) : config_(config), n_(n) {
  if (n == 0) throw ConfigError("training set is empty");
  steps_per_epoch_ = (n + config.minibatch - 1) / config.minibatch;
  total_ = config.epochs * steps_per_epoch_;
  if (config.max_steps > 0) total_ = std::min<std::uint64_t>(total_, config.max_steps);
  eval_every_ = config.eval_every > 0 ? config.eval_every : std::max<std::uint64_t>(1, steps_per_epoch_ / 10);
}

bool SampleStream::next(const std::uint32_t*& idx, std::size_t& count) {
  if (step_ >= total_) return false;
  if (perm_.empty() || offset_ >= n_) {
    if (!perm_.empty()) ++epoch_index_;
    perm_ = epoch_stream(n_, epoch_index_, config_.seed);
    offset_ = 0;
  }
  count = std::min(config_.minibatch, n_ - offset_);
  idx = perm_.data() + offset_;
  offset_ += count;
  consumed_ += count;
  ++step_;
  return true;
}

double SampleStream::epoch() const { return static_cast<double>(consumed_) / static_cast<double>(n_); }

bool SampleStream::should_record() const { return step_ % eval_every_ == 0 || step_ == total_; }

ParamVec initial_theta(const SolverConfig& config, std::size_t dim) {
  if (config.theta0.size() == 0) return ParamVec::Zero(static_cast<Eigen::Index>(dim));
  if (static_cast<std::size_t>(config.theta0.size()) != dim) throw ConfigError("theta0 has the wrong dimension");
  return config.theta0;
}

}  // namespace detail
}  // namespace smm
