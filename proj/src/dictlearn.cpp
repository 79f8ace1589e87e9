#include "smm/dictlearn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "smm/parallel.hpp"
#include "smm/rng.hpp"

namespace smm {
namespace {

void check_coding_params(double lambda1, double lambda2) {
  if (!(lambda1 >= 0.0)) throw std::invalid_argument("encode: lambda1 must be >= 0");
  if (!(lambda2 > 0.0)) throw std::invalid_argument("encode: lambda2 must be > 0 in dictionary mode");
}

constexpr std::size_t kMaxSweeps = 100000;

}  // namespace

Eigen::VectorXd encode_gram(const Eigen::MatrixXd& G, const Eigen::VectorXd& Dtx, double lambda1, double lambda2,
                            double tol, std::size_t* sweeps) {
  check_coding_params(lambda1, lambda2);
  const Eigen::Index K = Dtx.size();
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(K);
  Eigen::VectorXd Ga = Eigen::VectorXd::Zero(K);
  std::size_t s = 0;
  for (; s < kMaxSweeps; ++s) {
    for (Eigen::Index j = 0; j < K; ++j) {
      const double denom = G(j, j) + lambda2;
      const double rho_j = Dtx[j] - Ga[j] + G(j, j) * alpha[j];
      const double a = soft_threshold(rho_j, lambda1) / denom;
      const double delta = a - alpha[j];
      if (delta != 0.0) {
        Ga += delta * G.col(j);
        alpha[j] = a;
      }
    }
    double kkt = 0.0;
    for (Eigen::Index j = 0; j < K; ++j) {
      const double g = Ga[j] - Dtx[j] + lambda2 * alpha[j];
      const double v = alpha[j] != 0.0 ? std::abs(g + (alpha[j] > 0 ? lambda1 : -lambda1))
                                       : std::max(std::abs(g) - lambda1, 0.0);
      kkt = std::max(kkt, v);
    }
    if (kkt <= tol) {
      ++s;
      break;
    }
  }
  if (sweeps) *sweeps = s;
  return alpha;
}

Code encode(const Eigen::VectorXd& x, const Dictionary& D, double lambda1, double lambda2, double tol) {
  if (x.size() != D.rows()) throw std::invalid_argument("encode: signal and dictionary sizes differ");
  const Eigen::MatrixXd G = D.transpose() * D;
  const Eigen::VectorXd Dtx = D.transpose() * x;
  Code c;
  c.alpha = encode_gram(G, Dtx, lambda1, lambda2, tol, &c.sweeps);
  c.residual_norm = (x - D * c.alpha).norm();
  return c;
}

double coding_objective(const Eigen::VectorXd& x, const Dictionary& D, const Eigen::VectorXd& alpha, double lambda1,
                        double lambda2) {
  return 0.5 * (x - D * alpha).squaredNorm() + lambda1 * alpha.lpNorm<1>() + 0.5 * lambda2 * alpha.squaredNorm();
}

double coding_kkt_residual(const Eigen::VectorXd& x, const Dictionary& D, const Eigen::VectorXd& alpha,
                           double lambda1, double lambda2) {
  const Eigen::VectorXd g = -D.transpose() * (x - D * alpha) + lambda2 * alpha;
  double kkt = 0.0;
  for (Eigen::Index j = 0; j < alpha.size(); ++j) {
    const double v = alpha[j] != 0.0 ? std::abs(g[j] + (alpha[j] > 0 ? lambda1 : -lambda1))
                                     : std::max(std::abs(g[j]) - lambda1, 0.0);
    kkt = std::max(kkt, v);
  }
  return kkt;
}

double dict_loss(const Eigen::VectorXd& x, const Dictionary& D, double lambda1, double lambda2) {
  return coding_objective(x, D, encode(x, D, lambda1, lambda2).alpha, lambda1, lambda2);
}

Eigen::MatrixXd dict_grad(const Eigen::VectorXd& x, const Dictionary& D, const Code& code) {
  return -(x - D * code.alpha) * code.alpha.transpose();
}

double dict_lipschitz(const std::vector<Code>& codes, double lambda2) {
  double m = 0.0;
  for (const Code& c : codes) m = std::max(m, c.alpha.squaredNorm());
  return m + lambda2;
}

double dict_penalty(const GroupLinf& penalty, const Dictionary& D) {
  if (penalty.gamma1 == 0.0 && penalty.gamma2 == 0.0) return 0.0;
  double total = 0.0;
  const Regularizer reg = penalty;
  for (Eigen::Index k = 0; k < D.cols(); ++k) total += penalty_value(reg, D.col(k));
  return total;
}

DictAggregate::DictAggregate(const Dictionary& D0, double rho0, GroupLinf penalty)
    : Q_(rho0 * D0), curvature_(rho0), penalty_(std::move(penalty)) {
  if (!(rho0 > 0.0)) throw std::invalid_argument("dictionary curvature must be positive");
  validate(Regularizer(penalty_), static_cast<std::size_t>(D0.rows()));
}

void DictAggregate::update(const Eigen::MatrixXd& grad, const Dictionary& D_prev, double w, double L) {
  if (!(L > 0.0)) throw std::invalid_argument("dictionary curvature must be positive");
  if (!(w > 0.0 && w <= 1.0)) throw std::invalid_argument("weight must lie in (0, 1]");
  Q_ = (1.0 - w) * Q_ + w * (L * D_prev - grad);
  curvature_ = (1.0 - w) * curvature_ + w * L;
  penalty_weight_ = (1.0 - w) * penalty_weight_ + w;
}

Dictionary DictAggregate::minimize() const {
  Dictionary D = Q_ / curvature_;
  if (penalty_weight_ == 0.0 || (penalty_.gamma1 == 0.0 && penalty_.gamma2 == 0.0)) return D;
  const Regularizer reg = penalty_;
  const double t = penalty_weight_ / curvature_;
  for (Eigen::Index k = 0; k < D.cols(); ++k) D.col(k) = prox(reg, D.col(k), t);
  return D;
}

namespace {

struct BatchCodes {
  std::vector<Code> codes;
  double mean_loss = 0.0;
};

BatchCodes encode_batch(const Eigen::MatrixXd& batch, const Dictionary& D, double lambda1, double lambda2) {
  const Eigen::MatrixXd G = D.transpose() * D;
  const Eigen::MatrixXd DtX = D.transpose() * batch;
  BatchCodes out;
  out.codes.resize(static_cast<std::size_t>(batch.cols()));
  std::vector<double> losses(out.codes.size());
  parallel_for(out.codes.size(), [&](std::size_t i) {
    const auto c = static_cast<Eigen::Index>(i);
    Code& code = out.codes[i];
    code.alpha = encode_gram(G, DtX.col(c), lambda1, lambda2, 1e-9, &code.sweeps);
    const Eigen::VectorXd r = batch.col(c) - D * code.alpha;
    code.residual_norm = r.norm();
    losses[i] = 0.5 * r.squaredNorm() + lambda1 * code.alpha.lpNorm<1>() + 0.5 * lambda2 * code.alpha.squaredNorm();
  });
  for (double l : losses) out.mean_loss += l;
  out.mean_loss /= static_cast<double>(losses.size());
  return out;
}

}  // namespace

DictStep dict_step(DictAggregate& agg, const Eigen::MatrixXd& batch, const Dictionary& D_prev, double w,
                   double lambda1, double lambda2) {
  if (batch.cols() == 0) throw std::invalid_argument("dict_step: empty batch");
  if (batch.rows() != D_prev.rows()) throw std::invalid_argument("dict_step: signal size mismatch");
  const BatchCodes prev = encode_batch(batch, D_prev, lambda1, lambda2);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(D_prev.rows(), D_prev.cols());
  for (std::size_t i = 0; i < prev.codes.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    grad.noalias() -= (batch.col(c) - D_prev * prev.codes[i].alpha) * prev.codes[i].alpha.transpose();
  }
  grad /= static_cast<double>(batch.cols());

  DictStep step;
  step.loss_prev = prev.mean_loss;
  step.L = dict_lipschitz(prev.codes, lambda2);
  for (;;) {
    DictAggregate trial = agg;
    trial.update(grad, D_prev, w, step.L);
    Dictionary D = trial.minimize();
    const Eigen::MatrixXd diff = D - D_prev;
    step.surrogate_new = step.loss_prev + (grad.array() * diff.array()).sum() + 0.5 * step.L * diff.squaredNorm();
    step.loss_new = encode_batch(batch, D, lambda1, lambda2).mean_loss;
    const double slack = 1e-12 * std::max(1.0, std::abs(step.loss_new));
    if (step.surrogate_new + slack >= step.loss_new || step.doublings >= 40) {
      step.majorized = step.surrogate_new + slack >= step.loss_new;
      agg = std::move(trial);
      step.D = std::move(D);
      return step;
    }
    step.L *= 2.0;
    ++step.doublings;
  }
}

Eigen::MatrixXd extract_patches(const Eigen::MatrixXd& image, std::size_t size, std::size_t stride) {
  if (size == 0 || stride == 0) throw std::invalid_argument("extract_patches: size and stride must be positive");
  const auto H = static_cast<std::size_t>(image.rows());
  const auto W = static_cast<std::size_t>(image.cols());
  if (H < size || W < size) return Eigen::MatrixXd(size * size, 0);
  const std::size_t nr = (H - size) / stride + 1;
  const std::size_t nc = (W - size) / stride + 1;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(size * size), static_cast<Eigen::Index>(nr * nc));
  Eigen::Index col = 0;
  for (std::size_t r = 0; r < nr; ++r) {
    for (std::size_t c = 0; c < nc; ++c, ++col) {
      for (std::size_t i = 0; i < size; ++i)
        for (std::size_t j = 0; j < size; ++j)
          out(static_cast<Eigen::Index>(i * size + j), col) =
              image(static_cast<Eigen::Index>(r * stride + i), static_cast<Eigen::Index>(c * stride + j));
    }
  }
  return out;
}

namespace {

Eigen::MatrixXd center_patches(const Eigen::MatrixXd& signals) {
  Eigen::MatrixXd X = signals;
  for (Eigen::Index i = 0; i < X.cols(); ++i) X.col(i).array() -= X.col(i).mean();
  return X;
}

}  // namespace

Eigen::MatrixXd whitening_matrix(const Eigen::MatrixXd& signals, bool remove_patch_mean, double eigen_floor) {
  if (signals.cols() == 0) throw std::invalid_argument("whitening needs at least one signal");
  const Eigen::MatrixXd X = remove_patch_mean ? center_patches(signals) : signals;
  const Eigen::MatrixXd C = (X * X.transpose()) / static_cast<double>(X.cols());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
  if (eig.info() != Eigen::Success) throw NumericalError("whitening: eigendecomposition failed");
  const Eigen::VectorXd scale = eig.eigenvalues().cwiseMax(eigen_floor).cwiseSqrt().cwiseInverse();
  return eig.eigenvectors() * scale.asDiagonal() * eig.eigenvectors().transpose();
}

Eigen::MatrixXd whiten_patches(const Eigen::MatrixXd& signals, bool remove_patch_mean, double eigen_floor) {
  const Eigen::MatrixXd W = whitening_matrix(signals, remove_patch_mean, eigen_floor);
  return W * (remove_patch_mean ? center_patches(signals) : signals);
}

Eigen::MatrixXd synthetic_patches(std::size_t side, std::size_t count, std::uint64_t seed, std::size_t n_atoms,
                                  std::size_t sparsity, double noise) {
  if (side == 0 || n_atoms == 0) throw std::invalid_argument("synthetic_patches: empty geometry");
  if (sparsity > n_atoms) throw std::invalid_argument("synthetic_patches: sparsity exceeds the atom bank");
  const auto m = static_cast<Eigen::Index>(side * side);
  CounterRng rng(stream_key(seed, "data"));
  Eigen::MatrixXd bank(m, static_cast<Eigen::Index>(n_atoms));
  const double s = static_cast<double>(side);
  for (std::size_t a = 0; a < n_atoms; ++a) {
    const double cx = rng.uniform(0.2 * s, 0.8 * s), cy = rng.uniform(0.2 * s, 0.8 * s);
    const double sigma = rng.uniform(0.08 * s, 0.2 * s);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double freq = rng.uniform(0.05, 0.25);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < side; ++i) {
      for (std::size_t j = 0; j < side; ++j) {
        const double dx = static_cast<double>(j) - cx, dy = static_cast<double>(i) - cy;
        const double u = dx * std::cos(angle) + dy * std::sin(angle);
        bank(static_cast<Eigen::Index>(i * side + j), static_cast<Eigen::Index>(a)) =
            std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma)) *
            std::cos(2.0 * std::numbers::pi * freq * u + phase);
      }
    }
    bank.col(static_cast<Eigen::Index>(a)).normalize();
  }
  Eigen::MatrixXd out(m, static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
    for (std::uint32_t a : sample_without_replacement(n_atoms, sparsity, rng))
      x += rng.normal() * bank.col(static_cast<Eigen::Index>(a));
    for (Eigen::Index r = 0; r < m; ++r) x[r] += noise * rng.normal();
    out.col(static_cast<Eigen::Index>(i)) = x;
  }
  return out;
}

Dictionary random_dictionary(std::size_t m, std::size_t K, std::uint64_t seed) {
  CounterRng rng(stream_key(seed, "init"));
  Dictionary D(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(K));
  for (Eigen::Index k = 0; k < D.cols(); ++k) {
    for (Eigen::Index r = 0; r < D.rows(); ++r) D(r, k) = rng.normal();
    D.col(k).normalize();
  }
  return D;
}

DictRecord train_dictionary(const Eigen::MatrixXd& signals, const DictConfig& config, const Dictionary* initial) {
  const auto N = static_cast<std::size_t>(signals.cols());
  const auto m = static_cast<std::size_t>(signals.rows());
  if (N == 0 || m == 0) throw ConfigError("dictionary learning needs a non-empty signal set");
  if (config.K == 0) throw ConfigError("dict.k must be >= 1");
  if (config.minibatch == 0) throw ConfigError("minibatch must be >= 1");
  if (config.epochs == 0) throw ConfigError("epochs must be >= 1");
  if (!(config.lambda2 > 0.0)) throw ConfigError("lambda2 must be > 0 for dictionary learning");
  if (!(config.lambda1 >= 0.0)) throw ConfigError("lambda1 must be >= 0");
  try {
    validate(config.schedule);
    validate(Regularizer(config.penalty), m);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  Dictionary D = initial ? *initial : random_dictionary(m, config.K, config.seed);
  if (static_cast<std::size_t>(D.rows()) != m || static_cast<std::size_t>(D.cols()) != config.K)
    throw ConfigError("initial dictionary has the wrong shape");

  DictRecord rec;
  DictAggregate agg(D, 1.0, config.penalty);
  const auto start = std::chrono::steady_clock::now();
  const std::size_t steps_per_epoch = (N + config.minibatch - 1) / config.minibatch;
  const std::uint64_t eval_every =
      config.eval_every > 0 ? config.eval_every : std::max<std::uint64_t>(1, steps_per_epoch / 10);
  std::uint64_t n = 0;
  for (std::uint64_t e = 0; e < config.epochs; ++e) {
    const auto perm = epoch_stream(N, e, config.seed);
    double epoch_sum = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      ++n;
      const std::size_t lo = s * config.minibatch;
      const std::size_t b = std::min(config.minibatch, N - lo);
      Eigen::MatrixXd batch(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(b));
      for (std::size_t i = 0; i < b; ++i) batch.col(static_cast<Eigen::Index>(i)) = signals.col(perm[lo + i]);
      const double w = solver_weight(config.schedule, n, config.force_unit_first_weight);
      const double phi_prev = dict_penalty(config.penalty, D);
      DictStep st = dict_step(agg, batch, D, w, config.lambda1, config.lambda2);
      const double obj = st.loss_prev + phi_prev;
      if (!std::isfinite(obj) || !st.D.allFinite())
        throw NumericalError("dictionary objective became non-finite at iteration " + std::to_string(n));
      epoch_sum += obj;
      rec.max_doublings = std::max(rec.max_doublings, st.doublings);
      if (!st.majorized) ++rec.majorization_failures;
      const double step_norm = (st.D - D).norm();
      D = std::move(st.D);
      if (n % eval_every == 0 || s + 1 == steps_per_epoch) {
        MetricsRow row;
        row.iter = n;
        row.epoch = static_cast<double>(e) + static_cast<double>(std::min(N, lo + b)) / static_cast<double>(N);
        row.train_obj = obj;
        row.test_obj = std::numeric_limits<double>::quiet_NaN();
        row.nnz = static_cast<std::uint64_t>((D.array() != 0.0).count());
        row.elapsed_s =
            config.record_time ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() : 0.0;
        row.step_norm = step_norm;
        row.w_n = w;
        rec.rows.push_back(row);
      }
    }
    rec.epoch_means.push_back(epoch_sum / static_cast<double>(steps_per_epoch));
  }
  rec.steps = n;
  rec.D = std::move(D);
  return rec;
}

std::size_t atoms_with_zero_group(const Dictionary& D, const std::vector<std::vector<std::size_t>>& groups) {
  std::size_t count = 0;
  for (Eigen::Index k = 0; k < D.cols(); ++k) {
    for (const auto& g : groups) {
      bool zero = !g.empty();
      for (std::size_t j : g) zero = zero && D(static_cast<Eigen::Index>(j), k) == 0.0;
      if (zero) {
        ++count;
        break;
      }
    }
  }
  return count;
}

}  // namespace smm
