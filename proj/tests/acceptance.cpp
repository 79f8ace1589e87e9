// Acceptance run: one PASS/FAIL line per criterion, exit status 0 iff all pass.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "smm/data_io.hpp"
#include "smm/dictlearn.hpp"
#include "smm/harness.hpp"
#include "smm/solvers.hpp"
#include "smm/surrogate.hpp"
#include "support.hpp"

using namespace smm;
namespace fs = std::filesystem;

namespace {

const fs::path kOut = fs::current_path() / "acceptance_out";

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* format, ...) {
  char buf[1024];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

int failures = 0;

void criterion(int id, const char* title, double limit_s, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool pass = v.pass;
  if (limit_s > 0 && secs >= limit_s) {
    pass = false;
    v.detail += fmt("; runtime limit %.0f s exceeded", limit_s);
  }
  if (!pass) ++failures;
  std::printf("criterion %2d %s  %s  [%.1f s%s]  %s\n", id, pass ? "PASS" : "FAIL", title, secs,
              limit_s > 0 ? fmt(" < %.0f s", limit_s).c_str() : "", v.detail.c_str());
  std::fflush(stdout);
}

std::string metrics_text(const std::vector<MetricsRow>& rows, const std::string& comment) {
  std::ostringstream out;
  write_metrics(out, rows, comment);
  return out.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string checkpoints_text(const BoundCheck& c) {
  std::string s;
  for (const Checkpoint& cp : c.checkpoints) s += fmt(" n=%llu %.3g<=%.3g", static_cast<unsigned long long>(cp.n), cp.observed, cp.bound);
  return s;
}

// ---- rate problems (criteria 2-5) ----

RateProblem convex_problem() {
  RateProblemOptions o;
  o.p = 50;
  o.n = 10000;
  o.lambda = 1e-3;
  o.seed = 1;
  return make_rate_problem(o);
}

RateProblem ridge_problem() {
  RateProblemOptions o;
  o.p = 50;
  o.n = 10000;
  o.lambda = 0.0;
  o.ridge_mu = 0.1;
  o.seed = 1;
  return make_rate_problem(o);
}

RateCheckOptions rate_options() {
  RateCheckOptions o;
  o.seeds = 20;
  o.checkpoints = {100, 1000, 10000};
  o.slack = 1.05;
  return o;
}

constexpr double kGamma = 1.0;
constexpr std::uint64_t kHorizon = 10000;

// ---- criterion 7 ----

struct OneEpochSetup {
  Dataset data;
  SolverConfig smm;
  double f_star = 0.0;
};

OneEpochSetup one_epoch_setup() {
  SyntheticLogregOptions g;
  g.p = 1000;
  g.n = 100000;
  g.density = 0.01;
  g.k_true = 100;
  g.noise = 0.05;
  g.seed = 7;
  OneEpochSetup s;
  s.data = generate_synthetic_logreg(g).train;
  s.smm.solver = SolverKind::SMM;
  s.smm.reg = L1{1e-4};
  s.smm.epochs = 1;
  s.smm.lazy = true;
  s.smm.record_time = false;
  s.smm.seed = 7;
  const Dataset sub = subsample(s.data, 0.05, s.smm.seed);
  s.smm.schedule = TunedSqrt{tune_n0({0, 10, 100, 1000, 10000}, sub, s.smm)};
  return s;
}

// ---- criterion 8 ----

struct DcOutcome {
  double batch = 0.0;
  double online = 0.0;
  double round_change = 0.0;  ///< |F(round 3) - F(round 5)|
  std::vector<MetricsRow> online_rows;
};

DcOutcome dc_run(std::uint64_t seed) {
  SyntheticLogregOptions g;
  g.p = 200;
  g.n = 10000;
  g.density = 0.1;
  g.k_true = 100;
  g.noise = 0.05;
  g.seed = seed;
  const Dataset d = generate_synthetic_logreg(g).train;
  SolverConfig c;
  c.reg = L1{1e-5};
  c.dc_epsilon = 0.01;
  c.dc_rounds = 5;
  c.record_time = false;
  c.seed = seed;
  c.solver = SolverKind::BatchDC;
  const RunRecord batch = run_batch_dc(c, d);
  c.solver = SolverKind::OnlineDC;
  c.epochs = 10;
  c.schedule = TunedSqrt{100};
  const RunRecord online = run_online_dc(c, d);
  DcOutcome out;
  out.batch = run_objective(c, batch.theta, d);
  out.online = run_objective(c, online.theta, d);
  out.round_change = std::abs(batch.round_objectives.at(2) - batch.round_objectives.at(4));
  out.online_rows = online.rows;
  return out;
}

// ---- criterion 9 ----

Eigen::MatrixXd dict_signals() { return whiten_patches(synthetic_patches(20, 10000, 1)); }

DictConfig dict_config(double gamma1) {
  DictConfig c;
  c.K = 32;
  c.lambda1 = 0.15;
  c.lambda2 = 0.01;
  c.minibatch = 100;
  c.epochs = 5;
  c.seed = 1;
  c.record_time = false;
  c.penalty = GroupLinf{tile_groups(20, 20, 2), gamma1, 0.0};
  return c;
}

bool non_increasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) return false;
  return true;
}

std::string means_text(const std::vector<double>& v) {
  std::string s;
  for (double m : v) s += fmt(" %.6f", m);
  return s;
}

}  // namespace

int main() {
  fs::create_directories(kOut);
  std::printf("acceptance run, artifacts in %s\n", kOut.string().c_str());

  criterion(1, "surrogate property suite, 1e4 trials per kind", 30, [] {
    const auto good = surrogate_property_suite(LossKind::Logistic, L1{0.1}, 10000, 1);
    const auto control = surrogate_property_suite(LossKind::Logistic, L1{0.1}, 10000, 1, 0.5);
    std::string d;
    for (const auto& k : good.kinds)
      d += fmt("%s %llu/%llu/%llu fails; ", k.kind.c_str(), static_cast<unsigned long long>(k.majorization_failures),
               static_cast<unsigned long long>(k.tangency_failures), static_cast<unsigned long long>(k.envelope_failures));
    d += fmt("halved-L control %s", control.pass() ? "did NOT fail" : "fails");
    return Verdict{good.pass() && !control.pass(), d};
  });

  const RateProblem convex = convex_problem();
  const RateProblem ridge = ridge_problem();
  BoundCheck c2, c3, c4;

  criterion(2, "constant-weight bound, 20 seeds", 120, [&] {
    c2 = check_constant_weights(convex, kGamma, kHorizon, rate_options());
    return Verdict{c2.pass, "observed<=bound:" + checkpoints_text(c2)};
  });

  criterion(3, "gamma/sqrt(n) bound with the log factor, 20 seeds", 120, [&] {
    c3 = check_sqrt_weights(convex, kGamma, rate_options());
    return Verdict{c3.pass, "observed<=bound:" + checkpoints_text(c3)};
  });

  criterion(4, "strongly convex bound with geometric averaging, 20 seeds", 120, [&] {
    c4 = check_strongly_convex(ridge, rate_options());
    return Verdict{c4.pass, "observed<=bound:" + checkpoints_text(c4) +
                                fmt("; slope over [1e3,1e4] %.3f <= -0.8", c4.constants.at("slope"))};
  });

  criterion(5, "stability lemma at every SMM iteration of criteria 2-4", 0, [&] {
    const std::uint64_t violations = c2.stability_violations + c3.stability_violations + c4.stability_violations;
    RateCheckOptions corrupted = rate_options();
    corrupted.stability_r_scale = 0.5;
    corrupted.stability_rho_scale = 2.0;
    const std::uint64_t control = check_constant_weights(convex, kGamma, kHorizon, corrupted).stability_violations +
                                  check_sqrt_weights(convex, kGamma, corrupted).stability_violations +
                                  check_strongly_convex(ridge, corrupted).stability_violations;
    return Verdict{violations == 0 && control > 0,
                   fmt("%llu violations over 3 x 20 runs; corrupted control (R/2, 2 rho) trips %llu times",
                       static_cast<unsigned long long>(violations), static_cast<unsigned long long>(control))};
  });

  criterion(6, "oracle equivalences", 0, [] {
    bool ok = true;
    std::string d;

    // Unit weights: the aggregate is the last surrogate, so SMM is proximal SGD.
    SyntheticLogregOptions g;
    g.p = 20;
    g.n = 1000;
    g.k_true = 6;
    g.density = 0.3;
    g.noise = 0.1;
    g.seed = 11;
    const Dataset data = generate_synthetic_logreg(g).train;
    int exact = 0;
    const std::vector<Regularizer> regs = {L1{0.01}, ElasticNet{0.01, 0.05}, GroupLinf{{{0, 1, 2}, {5, 6}, {9}}, 0.02, 0.0}};
    for (const Regularizer& reg : regs) {
      SolverConfig c;
      c.reg = reg;
      c.rho = 0.25;
      c.record_time = false;
      c.schedule = ConstantFiniteHorizon{std::sqrt(1000.0), 1000};
      const RunRecord r = run_smm(c, data);
      ParamVec theta = ParamVec::Zero(20);
      for (std::uint32_t i : epoch_stream(data.size(), 0, c.seed)) {
        const ParamVec grad = c.loss.value_grad(theta, data.samples[i]).grad.to_dense(20);
        theta = prox(reg, theta - grad / 0.25, 1.0 / 0.25);
      }
      exact += r.steps == 1000 && r.theta == theta;
    }
    ok = ok && exact == 3;
    d += fmt("prox-SGD bitwise %d/3; ", exact);

    // Recursive aggregate against the explicit sum of w_n^i-weighted terms.
    CounterRng rng(21);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const std::size_t p = 5;
      const double rho = rng.uniform(0.25, 2.0);
      const Loss loss{LossKind::Logistic, 0.0};
      const ParamVec t0 = testing::random_vec(rng, p);
      AggregateSurrogate agg(t0, rho, L1{0.01});
      std::vector<ParamVec> terms = {rho * t0};
      std::vector<double> w = {0.0};
      ParamVec theta = t0;
      for (std::size_t n = 1; n <= 5; ++n) {
        const Sample s = testing::random_sample(rng, p, 1 + rng.below(p));
        w.push_back(rng.uniform(0.05, 1.0));
        terms.push_back(rho * theta - loss.value_grad(theta, s).grad.to_dense(p));
        agg.update(loss.value_grad(theta, s).grad, theta, w.back());
        theta = agg.minimize();
      }
      ParamVec q = ParamVec::Zero(static_cast<Eigen::Index>(p));
      for (std::size_t i = 0; i <= 5; ++i) {
        double coeff = i == 0 ? 1.0 : w[i];
        for (std::size_t k = i + 1; k <= 5; ++k) coeff *= 1.0 - w[k];
        q += coeff * terms[i];
      }
      worst = std::max(worst, testing::max_abs_diff(agg.anchor(), q));
    }
    ok = ok && worst <= 1e-12;
    d += fmt("aggregate vs explicit sum max err %.2e; ", worst);

    // Prox operators and the l1-ball projection against brute force.
    double prox_err = 0.0, ball_err = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Regularizer reg = testing::random_regularizer(rng, 5);
      const ParamVec v = testing::awkward_vec(rng, 5, 2.0);
      const double t = rng.uniform(0.05, 2.0);
      prox_err = std::max(prox_err, testing::max_abs_diff(prox(reg, v, t), testing::prox_oracle(reg, v, t)));
      const double radius = rng.uniform(0.1, 3.0);
      ball_err = std::max(ball_err, testing::max_abs_diff(project_l1_ball(v, radius), testing::l1_ball_oracle(v, radius)));
    }
    ok = ok && prox_err <= 1e-6 && ball_err <= 1e-6;
    d += fmt("prox max err %.2e, l1-ball max err %.2e over 100 5-dim instances", prox_err, ball_err);
    return Verdict{ok, d};
  });

  criterion(7, "one SMM epoch is within 5% of the optimum, fixed-step FISTA is not after 5", 180, [] {
    const OneEpochSetup s = one_epoch_setup();
    const ReferenceSolution ref = solve_reference(s.data, s.smm.loss, s.smm.reg, 1e-12, 20000);
    const RunRecord smm = run_smm(s.smm, s.data);
    const double smm_gap = (run_objective(s.smm, smm.theta, s.data) - ref.objective) / ref.objective;

    SolverConfig f = s.smm;
    f.solver = SolverKind::FISTA;
    f.lazy = false;
    f.epochs = 5;
    const RunRecord fista = run_fista(f, s.data);
    const double fista_gap = (fista.rows.back().train_obj - ref.objective) / ref.objective;

    // How long fixed-step FISTA actually takes to reach SMM's one-epoch gap.
    f.epochs = 2000;
    f.eval_every = 1;
    const RunRecord long_fista = run_fista(f, s.data);
    std::string needed = "> 2000";
    for (const MetricsRow& row : long_fista.rows)
      if ((row.train_obj - ref.objective) / ref.objective <= smm_gap) {
        needed = std::to_string(row.iter);
        break;
      }
    const std::uint64_t n0 = std::get<TunedSqrt>(s.smm.schedule).n0;
    return Verdict{ref.converged && smm_gap <= 0.05 && fista_gap > 0.05,
                   fmt("f*=%.6f; SMM (tuned n0=%llu) gap %.4f <= 0.05; FISTA gap after 5 epochs %.4f > 0.05; ",
                       ref.objective, static_cast<unsigned long long>(n0), smm_gap, fista_gap) +
                       "FISTA epochs to reach SMM's gap: " + needed};
  });

  criterion(8, "batch DC settles by round 3, online DC is no worse in median, 11 seeds", 180, [] {
    std::vector<double> batch, online, diff;
    double worst_change = 0.0;
    int wins = 0;
    for (std::uint64_t seed = 1; seed <= 11; ++seed) {
      const DcOutcome o = dc_run(seed);
      batch.push_back(o.batch);
      online.push_back(o.online);
      diff.push_back(o.online - o.batch);
      worst_change = std::max(worst_change, o.round_change);
      wins += o.online <= o.batch;
    }
    const double mb = median(batch), mo = median(online);
    return Verdict{worst_change < 1e-6 && mo <= mb,
                   fmt("max |F3 - F5| %.2e < 1e-6; median online %.6f <= median batch %.6f; median diff %.2e; "
                       "online no worse on %d/11",
                       worst_change, mo, mb, median(diff), wins)};
  });

  criterion(9, "structured dictionary learning on 1e4 whitened 20x20 patches", 300, [] {
    const Eigen::MatrixXd X = dict_signals();
    bool ok = true;
    std::string d;

    const DictRecord plain = train_dictionary(X, dict_config(0.0));
    ok = ok && non_increasing(plain.epoch_means) && plain.epoch_means.size() == 5;
    d += "epoch means (gamma1=0):" + means_text(plain.epoch_means) + "; ";

    // Relative error of dict_grad against central differences of the coding loss.
    CounterRng rng(9);
    double num = 0.0, den = 0.0;
    for (int k = 0; k < 5; ++k) {
      const Eigen::VectorXd x = X.col(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(X.cols()))));
      const Eigen::MatrixXd G = dict_grad(x, plain.D, encode(x, plain.D, 0.15, 0.01, 1e-13));
      for (int e = 0; e < 20; ++e) {
        const auto i = static_cast<Eigen::Index>(rng.below(400));
        const auto j = static_cast<Eigen::Index>(rng.below(32));
        const double h = 1e-5;
        Dictionary Dp = plain.D, Dm = plain.D;
        Dp(i, j) += h;
        Dm(i, j) -= h;
        const double fd = (dict_loss(x, Dp, 0.15, 0.01) - dict_loss(x, Dm, 0.15, 0.01)) / (2 * h);
        num += (fd - G(i, j)) * (fd - G(i, j));
        den += G(i, j) * G(i, j);
      }
    }
    const double rel = std::sqrt(num / den);
    ok = ok && rel <= 1e-4;
    d += fmt("dict_grad finite-difference rel err %.2e <= 1e-4; ", rel);

    double gamma1 = 1e-3;
    std::size_t zero_atoms = 0;
    DictRecord found;
    for (int doubling = 0; doubling < 20; ++doubling, gamma1 *= 2) {
      found = train_dictionary(X, dict_config(gamma1));
      zero_atoms = atoms_with_zero_group(found.D, dict_config(gamma1).penalty.groups);
      if (2 * zero_atoms >= 32) break;
    }
    ok = ok && 2 * zero_atoms >= 32 && non_increasing(found.epoch_means);
    d += fmt("gamma1=%.3g by doubling: %zu/32 atoms with a zero 2x2 group; epoch means:", gamma1, zero_atoms) +
         means_text(found.epoch_means);
    save(kOut / "dict_gamma.txt", fmt("%.17g\n", gamma1));
    return Verdict{ok, d};
  });

  criterion(10, "reruns with the same seed give byte-identical metric files", 0, [&] {
    // First pass: write artifacts from fresh runs; second pass: rerun and compare bytes.
    const auto produce = [&](const std::string& tag) {
      std::vector<fs::path> files;
      const auto put = [&](const std::string& name, const std::string& text) {
        files.push_back(kOut / (name + "." + tag + ".csv"));
        save(files.back(), text);
      };
      const BoundCheck b2 = check_constant_weights(convex, kGamma, kHorizon, rate_options());
      std::string all;
      for (const auto& rows : b2.seed_rows) all += metrics_text(rows, "constant weights");
      put("rates_constant", all);
      const BoundCheck b4 = check_strongly_convex(ridge, rate_options());
      all.clear();
      for (const auto& rows : b4.seed_rows) all += metrics_text(rows, "strongly convex");
      put("rates_strongly_convex", all);

      const OneEpochSetup s = one_epoch_setup();
      put("one_epoch_smm", metrics_text(run_smm(s.smm, s.data).rows, "smm one epoch"));
      put("online_dc_seed1", metrics_text(dc_run(1).online_rows, "online dc"));

      const DictRecord rec = train_dictionary(dict_signals(), dict_config(0.1));
      put("dict", metrics_text(rec.rows, "dictionary"));
      return files;
    };
    const auto first = produce("run1");
    const auto second = produce("run2");
    int identical = 0;
    for (std::size_t i = 0; i < first.size(); ++i) {
      const std::string a = slurp(first[i]), b = slurp(second[i]);
      identical += !a.empty() && a == b;
    }
    return Verdict{identical == static_cast<int>(first.size()),
                   fmt("%d/%zu metric files byte-identical (rates x2, SMM, online DC, dictionary)", identical,
                       first.size())};
  });

  std::printf("acceptance: %s (%d failing)\n", failures == 0 ? "ALL PASS" : "FAIL", failures);
  return failures == 0 ? 0 : 1;
}
