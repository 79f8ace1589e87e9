#pragma once

#include <cstdint>
#include <vector>

#include "smm/data_io.hpp"
#include "smm/prox.hpp"
#include "smm/schedule.hpp"
#include "smm/types.hpp"

namespace smm {

/// m x K, atoms in columns. No norm constraint; the penalty regularizes it.
using Dictionary = Eigen::MatrixXd;

struct Code {
  Eigen::VectorXd alpha;
  double residual_norm = 0.0;  ///< ||x - D alpha||
  std::size_t sweeps = 0;
};

/// argmin_a 0.5 ||x - D a||^2 + lambda1 ||a||_1 + (lambda2 / 2) ||a||^2 by cyclic
/// coordinate descent until the KKT residual is below tol. Requires lambda2 > 0.
Code encode(const Eigen::VectorXd& x, const Dictionary& D, double lambda1, double lambda2, double tol = 1e-9);

/// Same, with G = D'D and Dtx = D'x precomputed.
Eigen::VectorXd encode_gram(const Eigen::MatrixXd& G, const Eigen::VectorXd& Dtx, double lambda1, double lambda2,
                            double tol = 1e-9, std::size_t* sweeps = nullptr);

/// Elastic-net objective at a given code.
double coding_objective(const Eigen::VectorXd& x, const Dictionary& D, const Eigen::VectorXd& alpha, double lambda1,
                        double lambda2);

/// Largest KKT violation of the elastic-net problem at alpha.
double coding_kkt_residual(const Eigen::VectorXd& x, const Dictionary& D, const Eigen::VectorXd& alpha,
                           double lambda1, double lambda2);

/// l(x, D) = min over codes of coding_objective.
double dict_loss(const Eigen::VectorXd& x, const Dictionary& D, double lambda1, double lambda2);

/// grad_D l(x, D) = -(x - D alpha) alpha' at the optimal code.
Eigen::MatrixXd dict_grad(const Eigen::VectorXd& x, const Dictionary& D, const Code& code);

/// max over the batch of ||alpha||^2 + lambda2.
double dict_lipschitz(const std::vector<Code>& codes, double lambda2);

/// phi(D): the column-wise structured penalty.
double dict_penalty(const GroupLinf& penalty, const Dictionary& D);

/// Matrix analogue of the aggregate surrogate:
///   Q_n = (1 - w) Q_{n-1} + w (L_n D_{n-1} - grad_n),  Lbar_n = (1 - w) Lbar_{n-1} + w L_n,
///   c_n = (1 - w) c_{n-1} + w, with minimizer D_n = prox_{c_n phi / Lbar_n}(Q_n / Lbar_n) column-wise.
class DictAggregate {
 public:
  DictAggregate(const Dictionary& D0, double rho0, GroupLinf penalty);

  void update(const Eigen::MatrixXd& grad, const Dictionary& D_prev, double w, double L);
  Dictionary minimize() const;

  const Eigen::MatrixXd& Q() const { return Q_; }
  double curvature() const { return curvature_; }
  double penalty_weight() const { return penalty_weight_; }
  const GroupLinf& penalty() const { return penalty_; }

 private:
  Eigen::MatrixXd Q_;
  double curvature_;
  double penalty_weight_ = 0.0;
  GroupLinf penalty_;
};

struct DictStep {
  Dictionary D;
  double L = 0.0;                   ///< accepted per-batch curvature
  std::size_t doublings = 0;
  double loss_prev = 0.0;           ///< mean l(x_i, D_prev) over the batch
  double loss_new = 0.0;            ///< mean l(x_i, D_n)
  double surrogate_new = 0.0;       ///< g_n(D_n)
  bool majorized = true;
};

/// One online step on the batch (signals in columns): encode at D_prev, average
/// gradients, fold into the aggregate with L from dict_lipschitz doubled until
/// g_n(D_n) >= mean l(x_i, D_n) (at most 40 doublings).
DictStep dict_step(DictAggregate& agg, const Eigen::MatrixXd& batch, const Dictionary& D_prev, double w,
                   double lambda1, double lambda2);

/// Overlapping size x size patches at the given stride, flattened row-major, as columns.
Eigen::MatrixXd extract_patches(const Eigen::MatrixXd& image, std::size_t size, std::size_t stride);

/// ZCA matrix of the second-moment matrix of the (optionally per-patch centered) signals.
Eigen::MatrixXd whitening_matrix(const Eigen::MatrixXd& signals, bool remove_patch_mean = true,
                                 double eigen_floor = 1e-8);

/// Per-patch mean removal (optional) followed by ZCA whitening.
Eigen::MatrixXd whiten_patches(const Eigen::MatrixXd& signals, bool remove_patch_mean = true,
                               double eigen_floor = 1e-8);

/// side*side patches, each a sparse combination of `sparsity` localized Gabor-like
/// atoms (from a bank of n_atoms) plus Gaussian noise; not whitened.
Eigen::MatrixXd synthetic_patches(std::size_t side, std::size_t count, std::uint64_t seed, std::size_t n_atoms = 64,
                                  std::size_t sparsity = 3, double noise = 0.05);

/// Seeded Gaussian columns scaled to unit norm ("init" stream).
Dictionary random_dictionary(std::size_t m, std::size_t K, std::uint64_t seed);

struct DictConfig {
  std::size_t K = 32;
  double lambda1 = 0.15;
  double lambda2 = 0.01;
  GroupLinf penalty;  ///< groups over the m pixels of one atom
  std::size_t minibatch = 100;
  std::uint64_t epochs = 5;
  std::uint64_t seed = 0;
  WeightSchedule schedule = TunedSqrt{0};
  bool force_unit_first_weight = true;
  std::uint64_t eval_every = 0;  ///< steps between rows; 0 means a tenth of an epoch
  bool record_time = true;
};

struct DictRecord {
  Dictionary D;
  std::vector<MetricsRow> rows;
  std::vector<double> epoch_means;  ///< mean over each epoch's steps of batch loss + phi at D_{n-1}
  std::uint64_t steps = 0;
  std::size_t max_doublings = 0;
  std::uint64_t majorization_failures = 0;
};

DictRecord train_dictionary(const Eigen::MatrixXd& signals, const DictConfig& config,
                            const Dictionary* initial = nullptr);

/// Atoms having at least one group that is exactly zero.
std::size_t atoms_with_zero_group(const Dictionary& D, const std::vector<std::vector<std::size_t>>& groups);

}  // namespace smm
