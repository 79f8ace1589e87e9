#include <doctest.h>

#include <cmath>

#include "smm/dictlearn.hpp"
#include "support.hpp"

using namespace smm;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd gaussian_matrix(CounterRng& rng, Eigen::Index rows, Eigen::Index cols) {
  MatrixXd M(rows, cols);
  for (Eigen::Index i = 0; i < M.size(); ++i) M.data()[i] = rng.normal();
  return M;
}

/// Proximal gradient on the elastic-net coding problem.
VectorXd coding_oracle(const VectorXd& x, const MatrixXd& D, double l1, double l2, int iters) {
  const double L = D.operatorNorm() * D.operatorNorm() + l2;
  VectorXd a = VectorXd::Zero(D.cols());
  for (int k = 0; k < iters; ++k) {
    const VectorXd g = D.transpose() * (D * a - x) + l2 * a;
    a -= g / L;
    for (Eigen::Index j = 0; j < a.size(); ++j) a[j] = soft_threshold(a[j], l1 / L);
  }
  return a;
}

MatrixXd covariance(const MatrixXd& X) { return X * X.transpose() / static_cast<double>(X.cols()); }

}  // namespace

TEST_CASE("encode: zero signal gives a zero code") {
  CounterRng rng(1);
  const MatrixXd D = gaussian_matrix(rng, 8, 5);
  const Code c = encode(VectorXd::Zero(8), D, 0.1, 0.01);
  CHECK(c.alpha == VectorXd::Zero(5));
  CHECK(c.residual_norm == 0.0);
}

TEST_CASE("encode: orthonormal dictionary is separable") {
  CounterRng rng(2);
  const MatrixXd Q = gaussian_matrix(rng, 10, 4).householderQr().householderQ() * MatrixXd::Identity(10, 4);
  const VectorXd x = testing::random_vec(rng, 10);
  const double l1 = 0.3, l2 = 0.05;
  const Code c = encode(x, Q, l1, l2);
  for (Eigen::Index j = 0; j < 4; ++j)
    CHECK(c.alpha[j] == doctest::Approx(soft_threshold(Q.col(j).dot(x), l1) / (1.0 + l2)).epsilon(1e-12));
}

TEST_CASE("encode rejects a zero ridge and mismatched sizes") {
  CHECK_THROWS_AS(encode(VectorXd::Ones(3), MatrixXd::Identity(3, 3), 0.1, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(encode(VectorXd::Ones(4), MatrixXd::Identity(3, 3), 0.1, 0.1), std::invalid_argument);
}

TEST_CASE("property: codes satisfy KKT and match the proximal-gradient oracle") {
  CounterRng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index m = 6 + static_cast<Eigen::Index>(rng.below(10)), K = 3 + static_cast<Eigen::Index>(rng.below(12));
    const MatrixXd D = gaussian_matrix(rng, m, K) / std::sqrt(static_cast<double>(m));
    const VectorXd x = testing::random_vec(rng, static_cast<std::size_t>(m));
    const double l1 = rng.uniform(0.01, 0.3), l2 = rng.uniform(0.01, 0.2);
    const Code c = encode(x, D, l1, l2);
    CHECK(coding_kkt_residual(x, D, c.alpha, l1, l2) <= 1e-8);
    const VectorXd oracle = coding_oracle(x, D, l1, l2, 100000);
    CHECK(std::abs(coding_objective(x, D, c.alpha, l1, l2) - coding_objective(x, D, oracle, l1, l2)) <= 1e-9);
    CHECK(dict_loss(x, D, l1, l2) == doctest::Approx(coding_objective(x, D, c.alpha, l1, l2)).epsilon(1e-14));
    CHECK(c.residual_norm == doctest::Approx((x - D * c.alpha).norm()).epsilon(1e-12));
  }
}

TEST_CASE("gram encoding matches direct encoding") {
  CounterRng rng(4);
  const MatrixXd D = gaussian_matrix(rng, 12, 7);
  const VectorXd x = testing::random_vec(rng, 12);
  std::size_t sweeps = 0;
  const VectorXd a = encode_gram(D.transpose() * D, D.transpose() * x, 0.2, 0.1, 1e-9, &sweeps);
  CHECK(testing::max_abs_diff(a, encode(x, D, 0.2, 0.1).alpha) <= 1e-9);
  CHECK(sweeps >= 1);
}

TEST_CASE("dict_grad vanishes for a zero code or zero residual") {
  CounterRng rng(5);
  const MatrixXd D = gaussian_matrix(rng, 6, 3);
  const VectorXd x = testing::random_vec(rng, 6);
  Code zero;
  zero.alpha = VectorXd::Zero(3);
  CHECK(dict_grad(x, D, zero) == MatrixXd::Zero(6, 3));
  Code exact;
  exact.alpha = testing::random_vec(rng, 3);
  CHECK(dict_grad(D * exact.alpha, D, exact).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("property: dict_grad matches finite differences of the re-encoded loss") {
  CounterRng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    const MatrixXd D = gaussian_matrix(rng, 8, 5) / std::sqrt(8.0);
    const VectorXd x = testing::random_vec(rng, 8);
    const double l1 = 0.1, l2 = 0.05;
    const MatrixXd G = dict_grad(x, D, encode(x, D, l1, l2, 1e-13));
    for (int k = 0; k < 20; ++k) {
      const Eigen::Index i = static_cast<Eigen::Index>(rng.below(8)), j = static_cast<Eigen::Index>(rng.below(5));
      const double h = 1e-5;
      MatrixXd Dp = D, Dm = D;
      Dp(i, j) += h;
      Dm(i, j) -= h;
      const double fd = (dict_loss(x, Dp, l1, l2) - dict_loss(x, Dm, l1, l2)) / (2 * h);
      CHECK(std::abs(fd - G(i, j)) <= 1e-5 * std::max(1.0, std::abs(G(i, j))));
    }
    const MatrixXd dir = gaussian_matrix(rng, 8, 5);
    const double h = 1e-5;
    const double dd = (dict_loss(x, D + h * dir, l1, l2) - dict_loss(x, D - h * dir, l1, l2)) / (2 * h);
    const double inner = (G.array() * dir.array()).sum();
    CHECK(std::abs(dd - inner) <= 1e-4 * std::max(1.0, std::abs(inner)));
  }
}

TEST_CASE("dict_lipschitz examples") {
  Code a;
  a.alpha = VectorXd::Zero(3);
  CHECK(dict_lipschitz({a, a}, 0.01) == 0.01);
  Code b;
  b.alpha = (VectorXd(2) << 2.0, 0.0).finished();
  CHECK(dict_lipschitz({b}, 0.01) == doctest::Approx(4.01).epsilon(1e-15));
  CHECK(dict_lipschitz({a, b}, 0.01) == doctest::Approx(4.01).epsilon(1e-15));
}

TEST_CASE("dict penalty sums the column penalties") {
  CounterRng rng(7);
  const MatrixXd D = gaussian_matrix(rng, 4, 3);
  const GroupLinf g{{{0, 1}, {2, 3}}, 0.5, 0.1};
  double expect = 0.0;
  for (Eigen::Index k = 0; k < 3; ++k)
    expect += 0.5 * (std::max(std::abs(D(0, k)), std::abs(D(1, k))) + std::max(std::abs(D(2, k)), std::abs(D(3, k)))) +
              0.1 * D.col(k).squaredNorm();
  CHECK(dict_penalty(g, D) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(dict_penalty(GroupLinf{}, D) == 0.0);
}

TEST_CASE("dict aggregate recursion") {
  CounterRng rng(8);
  const MatrixXd D0 = gaussian_matrix(rng, 4, 2), G1 = gaussian_matrix(rng, 4, 2), D1 = gaussian_matrix(rng, 4, 2);
  DictAggregate agg(D0, 1.0, GroupLinf{});
  CHECK(agg.minimize() == D0);
  agg.update(G1, D1, 0.25, 3.0);
  CHECK((agg.Q() - (0.75 * D0 + 0.25 * (3.0 * D1 - G1))).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK(agg.curvature() == 0.75 + 0.75);
  CHECK(agg.penalty_weight() == 0.25);
  CHECK_THROWS_AS(agg.update(G1, D1, 0.5, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(agg.update(G1, D1, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(DictAggregate(D0, 0.0, GroupLinf{}), std::invalid_argument);
}

TEST_CASE("dict_step without penalty and unit weight is a gradient step") {
  CounterRng rng(9);
  const MatrixXd D = gaussian_matrix(rng, 6, 4) / std::sqrt(6.0);
  const VectorXd x = testing::random_vec(rng, 6);
  DictAggregate agg(D, 1.0, GroupLinf{});
  const DictStep st = dict_step(agg, x, D, 1.0, 0.1, 0.01);
  const MatrixXd grad = dict_grad(x, D, encode(x, D, 0.1, 0.01));
  CHECK((st.D - (D - grad / st.L)).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(st.majorized);
  CHECK(st.loss_new <= st.surrogate_new + 1e-9);
}

TEST_CASE("dict_step: a batch of copies equals the single signal") {
  CounterRng rng(10);
  const MatrixXd D = gaussian_matrix(rng, 6, 4) / std::sqrt(6.0);
  const VectorXd x = testing::random_vec(rng, 6);
  MatrixXd copies(6, 5);
  for (int b = 0; b < 5; ++b) copies.col(b) = x;
  const GroupLinf pen{{{0, 1}, {2, 3}}, 0.05, 0.01};
  DictAggregate a1(D, 1.0, pen), a5(D, 1.0, pen);
  const DictStep s1 = dict_step(a1, x, D, 0.7, 0.1, 0.01);
  const DictStep s5 = dict_step(a5, copies, D, 0.7, 0.1, 0.01);
  CHECK(s1.L == s5.L);
  CHECK((s1.D - s5.D).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("property: dict_step majorizes at the new dictionary") {
  CounterRng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd signals = synthetic_patches(4, 20, 100 + trial, 8, 2, 0.05);
    MatrixXd D = random_dictionary(16, 6, trial);
    const GroupLinf pen{tile_groups(4, 4, 2), rng.uniform(0.0, 0.1), rng.uniform(0.0, 0.05)};
    DictAggregate agg(D, 1.0, pen);
    for (int n = 1; n <= 5; ++n) {
      const MatrixXd batch = signals.middleCols(4 * (n - 1), 4);
      const DictStep st = dict_step(agg, batch, D, n == 1 ? 1.0 : 1.0 / std::sqrt(n), 0.15, 0.01);
      CHECK(st.majorized);
      CHECK(st.surrogate_new >= st.loss_new - 1e-9);
      CHECK(st.L >= dict_lipschitz({}, 0.01));
      D = st.D;
    }
  }
}

TEST_CASE("patch extraction counts and layout") {
  MatrixXd img(5, 6);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = static_cast<double>(i);
  CHECK(extract_patches(MatrixXd::Zero(20, 20), 20, 20).cols() == 1);
  CHECK(extract_patches(MatrixXd::Zero(40, 40), 20, 20).cols() == 4);
  CHECK(extract_patches(img, 3, 1).cols() == (5 - 3 + 1) * (6 - 3 + 1));
  CHECK(extract_patches(img, 6, 1).cols() == 0);
  const MatrixXd P = extract_patches(img, 2, 1);
  // Second patch starts at row 0, column 1; entries are row-major within the patch.
  CHECK(P(0, 1) == img(0, 1));
  CHECK(P(1, 1) == img(0, 2));
  CHECK(P(2, 1) == img(1, 1));
  CHECK(P(3, 1) == img(1, 2));
  CHECK_THROWS(extract_patches(img, 0, 1));
}

TEST_CASE("whitening: white data is a fixed point") {
  const Eigen::Index m = 5;
  MatrixXd X(m, 2 * m);
  X.setZero();
  for (Eigen::Index j = 0; j < m; ++j) {
    X(j, 2 * j) = std::sqrt(static_cast<double>(m));
    X(j, 2 * j + 1) = -std::sqrt(static_cast<double>(m));
  }
  // Second-moment matrix is (1 / 2m) * 2m I = I.
  CHECK((covariance(X) - MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((whiten_patches(X, false) - X).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("whitening: constant patch maps to zero") {
  CounterRng rng(12);
  MatrixXd X = gaussian_matrix(rng, 9, 100);
  X.col(17).setConstant(3.5);
  const MatrixXd W = whiten_patches(X, true);
  CHECK(W.col(17).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("whitening decorrelates") {
  CounterRng rng(13);
  const Eigen::Index m = 9;
  const MatrixXd mix = gaussian_matrix(rng, m, m);
  const MatrixXd X = mix * gaussian_matrix(rng, m, 10 * m);
  const MatrixXd C = covariance(whiten_patches(X, false));
  const MatrixXd off = C - MatrixXd(C.diagonal().asDiagonal());
  CHECK(off.cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((C.diagonal().array() - 1.0).abs().maxCoeff() <= 1e-3);

  // With per-patch centering the all-ones direction is removed, so the
  // whitened covariance is the projector I - 11'/m.
  const MatrixXd Cc = covariance(whiten_patches(X, true));
  const MatrixXd P = MatrixXd::Identity(m, m) - MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m));
  CHECK((Cc - P).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("synthetic patches and random dictionaries are seeded") {
  const MatrixXd a = synthetic_patches(6, 50, 3), b = synthetic_patches(6, 50, 3);
  CHECK(a.rows() == 36);
  CHECK(a.cols() == 50);
  CHECK(a == b);
  CHECK(a != synthetic_patches(6, 50, 4));
  const MatrixXd D = random_dictionary(10, 4, 1);
  CHECK(D == random_dictionary(10, 4, 1));
  for (Eigen::Index k = 0; k < 4; ++k) CHECK(std::abs(D.col(k).norm() - 1.0) <= 1e-12);
}

TEST_CASE("training: epoch means decrease and rows are well formed") {
  const MatrixXd signals = whiten_patches(synthetic_patches(6, 600, 5, 24, 3, 0.05));
  DictConfig cfg;
  cfg.K = 16;
  cfg.minibatch = 20;
  cfg.epochs = 4;
  cfg.penalty = GroupLinf{tile_groups(6, 6, 2), 0.01, 0.001};
  cfg.record_time = false;
  const DictRecord r = train_dictionary(signals, cfg);
  REQUIRE(r.epoch_means.size() == 4);
  for (std::size_t e = 1; e < 4; ++e) CHECK(r.epoch_means[e] <= r.epoch_means[e - 1]);
  CHECK(r.majorization_failures == 0);
  CHECK(r.steps == 120);
  CHECK(r.rows.back().iter == 120);
  for (std::size_t k = 1; k < r.rows.size(); ++k) CHECK(r.rows[k].iter > r.rows[k - 1].iter);
  const DictRecord again = train_dictionary(signals, cfg);
  CHECK(again.D == r.D);
  CHECK(again.rows == r.rows);
}

TEST_CASE("training validates its configuration") {
  const MatrixXd signals = synthetic_patches(4, 10, 1);
  DictConfig cfg;
  cfg.lambda2 = 0.0;
  CHECK_THROWS_AS(train_dictionary(signals, cfg), ConfigError);
  cfg.lambda2 = 0.01;
  const Dictionary wrong = MatrixXd::Zero(3, 3);
  CHECK_THROWS_AS(train_dictionary(signals, cfg, &wrong), ConfigError);
}

TEST_CASE("zero-group counting") {
  MatrixXd D = MatrixXd::Ones(4, 3);
  D(0, 1) = D(1, 1) = 0.0;
  D(2, 2) = 0.0;
  CHECK(atoms_with_zero_group(D, {{0, 1}, {2, 3}}) == 1);
  D(3, 2) = 0.0;
  CHECK(atoms_with_zero_group(D, {{0, 1}, {2, 3}}) == 2);
}
