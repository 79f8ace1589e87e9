// smm: command-line front end for the stochastic MM toolkit.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "smm/config.hpp"
#include "smm/data_io.hpp"
#include "smm/dictlearn.hpp"
#include "smm/harness.hpp"
#include "smm/solvers.hpp"

namespace fs = std::filesystem;
using namespace smm;

namespace {

struct Common {
  std::vector<std::string> config_files;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config_files, "Key-value config file (repeatable; later files win)");
  app->add_option("--set", c.overrides, "Override one key: section.key=value (repeatable)");
}

// Files first, then explicit flags, then --set.
CliConfig build_config(const Common& c, const std::vector<std::pair<std::string, std::string>>& flags) {
  CliConfig cfg;
  for (const auto& f : c.config_files) cfg.load_file(f);
  for (const auto& [k, v] : flags) cfg.set(k, v);
  for (const auto& o : c.overrides) cfg.apply_override(o);
  return cfg;
}

template <class T>
void flag_value(CLI::Option* opt, const std::string& key, const T& value,
                std::vector<std::pair<std::string, std::string>>& flags) {
  if (opt->count() == 0) return;
  if constexpr (std::is_same_v<T, std::string>) flags.emplace_back(key, value);
  else if constexpr (std::is_same_v<T, double>) flags.emplace_back(key, format_real(value));
  else flags.emplace_back(key, std::to_string(value));
}

std::string provenance(const std::string& command, const CliConfig& cfg, std::uint64_t seed) {
  return "smm " + command + " seed=" + std::to_string(seed) + " " + cfg.echo();
}

LibsvmOptions libsvm_options(const CliConfig& cfg, std::size_t min_dim = 0) {
  LibsvmOptions o;
  o.normalize = cfg.get_bool("data.normalize");
  o.zero_to_minus_one = cfg.get_bool("data.zero_to_minus_one");
  o.min_dim = min_dim;
  return o;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  out << text;
}

// ---- generate ----

int cmd_generate(const CliConfig& cfg, const std::string& out, const std::string& test_out) {
  if (out.empty()) throw ConfigError("generate needs --out");
  const std::uint64_t seed = cfg.get_uint("generate.seed");
  const std::string header = provenance("generate", cfg, seed);
  const std::string& kind = cfg.get("generate.kind");
  if (kind == "logreg") {
    SyntheticLogregOptions o;
    o.p = cfg.get_uint("generate.p");
    o.n = cfg.get_uint("generate.n");
    o.n_test = cfg.get_uint("generate.n_test");
    o.k_true = cfg.get_uint("generate.k_true");
    o.noise = cfg.get_real("generate.noise");
    o.density = cfg.get_real("generate.density");
    o.seed = seed;
    SyntheticLogreg data;
    try {
      data = generate_synthetic_logreg(o);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const auto write = [&](const std::string& path, const Dataset& d) {
      std::ofstream f(path);
      if (!f) throw ConfigError("cannot open '" + path + "' for writing");
      f << "# " << header << '\n';
      serialize_libsvm(f, d);
    };
    write(out, data.train);
    if (!test_out.empty()) write(test_out, data.test);
    std::printf("wrote %zu samples (p = %zu) to %s\n", data.train.size(), o.p, out.c_str());
    return 0;
  }
  if (kind == "patches") {
    const std::size_t side = cfg.get_uint("generate.side");
    Eigen::MatrixXd X = synthetic_patches(side, cfg.get_uint("generate.n"), seed, cfg.get_uint("generate.atoms"),
                                          cfg.get_uint("generate.sparsity"), cfg.get_real("generate.noise"));
    if (cfg.get_bool("generate.whiten")) X = whiten_patches(X);
    write_patches(out, X);
    std::printf("wrote %ld patches (m = %ld) to %s\n", static_cast<long>(X.cols()), static_cast<long>(X.rows()),
                out.c_str());
    return 0;
  }
  throw ConfigError("unknown generate.kind '" + kind + "' (logreg, patches)");
}

// ---- train ----

struct Loaded {
  Dataset train;
  Dataset test;
  bool has_test = false;
};

Loaded load_data(const CliConfig& cfg) {
  if (cfg.get("data.train").empty()) throw ConfigError("no training data (--data or data.train)");
  Loaded l;
  l.train = load_libsvm(cfg.get("data.train"), libsvm_options(cfg));
  if (l.train.empty()) throw ConfigError("training file '" + cfg.get("data.train") + "' has no samples");
  if (!cfg.get("data.test").empty()) {
    l.test = load_libsvm(cfg.get("data.test"), libsvm_options(cfg, l.train.p));
    l.has_test = true;
    if (l.test.p > l.train.p) {
      l.train.p = l.test.p;
    }
  }
  return l;
}

SolverConfig prepared_solver_config(const CliConfig& cfg, const Dataset& train) {
  SolverConfig s = make_solver_config(cfg, train);
  if (cfg.get_bool("solver.tune_n0")) {
    if (!std::holds_alternative<TunedSqrt>(s.schedule)) throw ConfigError("solver.tune_n0 needs schedule.kind = tuned_sqrt");
    const Dataset sub = subsample(train, cfg.get_real("solver.tune_fraction"), s.seed);
    s.schedule = TunedSqrt{tune_n0(cfg.get_uint_list("solver.n0_candidates"), sub, s)};
  }
  return s;
}

int cmd_train(const CliConfig& cfg, const std::string& out, const std::string& model_out) {
  const Loaded data = load_data(cfg);
  const SolverConfig s = prepared_solver_config(cfg, data.train);
  const RunRecord rec = run_solver(s, data.train, data.has_test ? &data.test : nullptr);
  std::string header = provenance("train", cfg, s.seed);
  if (const auto* t = std::get_if<TunedSqrt>(&s.schedule)) header += " effective_n0=" + std::to_string(t->n0);
  if (!out.empty()) write_metrics(out, rec.rows, header);
  if (!model_out.empty()) write_model(model_out, rec.output(s.averaging), header);
  for (const auto& w : rec.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  const MetricsRow& last = rec.rows.back();
  std::printf("%s: %llu steps, train_obj %.10g, nnz %llu\n", to_string(s.solver).c_str(),
              static_cast<unsigned long long>(rec.steps), last.train_obj, static_cast<unsigned long long>(last.nnz));
  return 0;
}

// ---- dict ----

Eigen::MatrixXd patches_from_images(const std::string& dir, const CliConfig& cfg) {
  if (!fs::is_directory(dir)) throw ConfigError("'" + dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError("no .pgm files in '" + dir + "'");
  const std::size_t size = cfg.get_uint("dict.patch_size");
  const std::size_t stride = cfg.get_uint("dict.stride");
  std::vector<Eigen::MatrixXd> parts;
  Eigen::Index total = 0;
  for (const auto& f : files) {
    parts.push_back(extract_patches(read_pgm(f.string()), size, stride));
    total += parts.back().cols();
  }
  if (total == 0) throw ConfigError("images are smaller than the patch size");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(size * size), total);
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    X.middleCols(at, p.cols()) = p;
    at += p.cols();
  }
  return cfg.get_bool("dict.whiten") ? whiten_patches(X) : X;
}

int cmd_dict(const CliConfig& cfg, const std::string& patches, const std::string& images, const std::string& dict_out,
             const std::string& init, const std::string& out) {
  if (patches.empty() == images.empty()) throw ConfigError("dict needs exactly one of --patches or --images");
  const Eigen::MatrixXd X = patches.empty() ? patches_from_images(images, cfg) : read_patches(patches);
  const DictConfig d = make_dict_config(cfg, static_cast<std::size_t>(X.rows()));
  Dictionary D0;
  if (!init.empty()) D0 = read_dictionary(init);
  const DictRecord rec = train_dictionary(X, d, init.empty() ? nullptr : &D0);
  const std::string header = provenance("dict", cfg, d.seed);
  if (!dict_out.empty()) write_dictionary(dict_out, rec.D, header);
  if (!out.empty()) write_metrics(out, rec.rows, header);
  std::printf("dictionary %ldx%ld, %llu steps, epoch means:", static_cast<long>(rec.D.rows()),
              static_cast<long>(rec.D.cols()), static_cast<unsigned long long>(rec.steps));
  for (double m : rec.epoch_means) std::printf(" %.8g", m);
  std::printf("\natoms with a zero group: %zu/%ld\n", atoms_with_zero_group(rec.D, d.penalty.groups),
              static_cast<long>(rec.D.cols()));
  return 0;
}

// ---- rates ----

int cmd_rates(const CliConfig& cfg, const std::string& check, const std::string& out) {
  RateCheckOptions o;
  o.seeds = cfg.get_uint("rates.seeds");
  const std::uint64_t horizon = cfg.get_uint("rates.horizon");
  o.checkpoints.clear();
  for (std::uint64_t n = 100; n <= horizon; n *= 10) o.checkpoints.push_back(n);
  if (o.checkpoints.empty() || o.checkpoints.back() != horizon) o.checkpoints.push_back(horizon);

  RateProblemOptions po;
  po.p = cfg.get_uint("rates.p");
  po.n = cfg.get_uint("rates.n");
  po.lambda = cfg.get_real("rates.lambda");
  po.seed = cfg.get_uint("rates.seed");
  const double gamma = cfg.get_real("rates.gamma");
  const auto strongly_convex = [&] {
    RateProblemOptions s = po;
    s.ridge_mu = cfg.get_real("rates.mu");
    s.lambda = 0.0;
    return make_rate_problem(s);
  };

  std::string json;
  bool pass = false;
  if (check == "surrogates") {
    const auto report = surrogate_property_suite(LossKind::Logistic, L1{cfg.get_real("reg.lambda") > 0 ? cfg.get_real("reg.lambda") : 0.1},
                                                 cfg.get_uint("rates.trials"), cfg.get_uint("rates.seed"));
    json = to_json(report);
    pass = report.pass();
  } else {
    BoundCheck result;
    if (check == "prop31") result = check_constant_weights(make_rate_problem(po), gamma, horizon, o);
    else if (check == "cor32") result = check_sqrt_weights(make_rate_problem(po), std::min(gamma, 1.0), o);
    else if (check == "prop33") result = check_strongly_convex(strongly_convex(), o);
    else if (check == "stability") result = check_stability(make_rate_problem(po), strongly_convex(), gamma, horizon, o);
    else throw ConfigError("unknown check '" + check + "' (prop31, cor32, prop33, stability, surrogates)");
    json = to_json(result);
    pass = result.pass;
  }
  if (!out.empty()) write_text(out, json + "\n");
  std::printf("%s\n", json.c_str());
  return pass ? 0 : 2;
}

// ---- compare ----

int cmd_compare(const Common& common, const std::vector<std::pair<std::string, std::string>>& flags,
                const std::string& out) {
  std::vector<std::string> files = common.config_files;
  if (files.empty()) files.emplace_back();
  struct Entry {
    CliConfig cfg;
    std::string label;
  };
  std::vector<Entry> entries;
  for (const auto& f : files) {
    Common one;
    if (!f.empty()) one.config_files = {f};
    one.overrides = common.overrides;
    Entry e{build_config(one, flags), ""};
    e.label = e.cfg.get("solver.label").empty() ? e.cfg.get("solver.kind") : e.cfg.get("solver.label");
    entries.push_back(std::move(e));
  }
  std::vector<Loaded> data;
  for (const auto& e : entries) data.push_back(load_data(e.cfg));
  for (std::size_t i = 1; i < data.size(); ++i)
    if (data[i].train.p != data[0].train.p)
      throw ConfigError("configs disagree on the problem dimension (" + std::to_string(data[0].train.p) + " vs " +
                        std::to_string(data[i].train.p) + ")");

  std::string csv = "solver,epochs,train_obj,test_obj,nnz,elapsed_s\n";
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const CliConfig& cfg = entries[i].cfg;
    const auto checkpoints = cfg.get_uint_list("compare.epochs");
    const std::uint64_t seeds = std::max<std::uint64_t>(1, cfg.get_uint("compare.seeds"));
    for (std::uint64_t epochs : checkpoints) {
      double train = 0, test = 0, nnz = 0, elapsed = 0;
      for (std::uint64_t s = 0; s < seeds; ++s) {
        CliConfig run = cfg;
        run.set("solver.epochs", std::to_string(epochs));
        run.set("solver.seed", std::to_string(cfg.get_uint("solver.seed") + s));
        const SolverConfig sc = prepared_solver_config(run, data[i].train);
        const RunRecord rec = run_solver(sc, data[i].train, data[i].has_test ? &data[i].test : nullptr);
        const MetricsRow& last = rec.rows.back();
        train += last.train_obj;
        test += last.test_obj;
        nnz += static_cast<double>(last.nnz);
        elapsed += last.elapsed_s;
      }
      const double k = static_cast<double>(seeds);
      csv += entries[i].label + "," + std::to_string(epochs) + "," + format_real(train / k) + "," +
             format_real(test / k) + "," + format_real(nnz / k) + "," + format_real(elapsed / k) + "\n";
    }
  }
  std::string header = "# smm compare";
  for (std::size_t i = 0; i < entries.size(); ++i)
    header += " | config[" + std::to_string(i) + "] seed=" + entries[i].cfg.get("solver.seed") + " " + entries[i].cfg.echo();
  const std::string text = header + "\n" + csv;
  if (out.empty()) std::fputs(text.c_str(), stdout);
  else write_text(out, text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic majorization-minimization toolkit"};
  app.require_subcommand(1);
  std::vector<std::pair<std::string, std::string>> flags;

  // generate
  Common gen_common;
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
  add_common(gen, gen_common);
  std::string gen_kind, gen_out, gen_test_out;
  std::size_t gen_p = 0, gen_n = 0, gen_n_test = 0, gen_k = 0, gen_side = 0;
  double gen_noise = 0, gen_density = 0;
  std::uint64_t gen_seed = 0;
  auto* o_kind = gen->add_option("--kind", gen_kind, "logreg (LIBSVM text) or patches (binary patch file)");
  gen->add_option("--out", gen_out, "Output path")->required();
  gen->add_option("--test-out", gen_test_out, "Held-out LIBSVM output (logreg)");
  auto* o_p = gen->add_option("--p", gen_p, "Feature dimension");
  auto* o_n = gen->add_option("--n", gen_n, "Number of training samples / patches");
  auto* o_nt = gen->add_option("--n-test", gen_n_test, "Number of held-out samples");
  auto* o_k = gen->add_option("--k-true", gen_k, "Nonzeros in the ground-truth model");
  auto* o_noise = gen->add_option("--noise", gen_noise, "Label flip probability (patch noise level for patches)");
  auto* o_density = gen->add_option("--density", gen_density, "Fraction of nonzero features per sample");
  auto* o_seed = gen->add_option("--seed", gen_seed, "Seed");
  auto* o_side = gen->add_option("--side", gen_side, "Patch side length (patches)");

  // train
  Common train_common;
  auto* train = app.add_subcommand("train", "Run one solver and write metrics");
  add_common(train, train_common);
  std::string tr_solver, tr_data, tr_test, tr_out, tr_model;
  auto* o_solver = train->add_option("--solver", tr_solver, "smm, fobos, rda, fista, batch_dc, online_dc");
  auto* o_data = train->add_option("--data", tr_data, "Training set (LIBSVM)");
  auto* o_test = train->add_option("--test-data", tr_test, "Test set (LIBSVM)");
  train->add_option("--out", tr_out, "Metrics CSV");
  train->add_option("--model-out", tr_model, "Model file");

  // dict
  Common dict_common;
  auto* dict = app.add_subcommand("dict", "Online structured dictionary learning");
  add_common(dict, dict_common);
  std::string d_patches, d_images, d_out, d_init, d_metrics;
  std::size_t d_k = 0, d_mb = 0;
  std::uint64_t d_epochs = 0;
  double d_l1 = 0, d_l2 = 0, d_g1 = 0, d_g2 = 0;
  dict->add_option("--patches", d_patches, "Binary patch file (SMMPATCH)");
  dict->add_option("--images", d_images, "Directory of P5 PGM images");
  auto* o_dk = dict->add_option("--k", d_k, "Number of atoms");
  auto* o_dl1 = dict->add_option("--lambda1", d_l1, "l1 weight of the codes");
  auto* o_dl2 = dict->add_option("--lambda2", d_l2, "Squared-l2 weight of the codes (> 0)");
  auto* o_dg1 = dict->add_option("--gamma1", d_g1, "Group-linf weight on the atoms");
  auto* o_dg2 = dict->add_option("--gamma2", d_g2, "Squared Frobenius weight on the dictionary");
  auto* o_dmb = dict->add_option("--minibatch", d_mb, "Minibatch size");
  auto* o_dep = dict->add_option("--epochs", d_epochs, "Epochs");
  dict->add_option("--dict-out", d_out, "Dictionary output (text)");
  dict->add_option("--init", d_init, "Initial dictionary (text, same format as --dict-out)");
  dict->add_option("--out", d_metrics, "Metrics CSV");

  // rates
  Common rates_common;
  auto* rates = app.add_subcommand("rates", "Check the convergence bounds and surrogate properties");
  add_common(rates, rates_common);
  std::string r_check, r_out;
  std::size_t r_seeds = 0;
  rates->add_option("--check", r_check, "prop31 (constant weights), cor32 (gamma/sqrt(n) weights), prop33 (strongly convex), stability or surrogates")->required();
  auto* o_rseeds = rates->add_option("--seeds", r_seeds, "Number of seeds (>= 10)");
  rates->add_option("--out", r_out, "JSON report");

  // compare
  Common cmp_common;
  auto* cmp = app.add_subcommand("compare", "Run configs at several epoch budgets, seed-averaged");
  add_common(cmp, cmp_common);
  std::string c_data, c_test, c_out, c_epochs;
  std::size_t c_seeds = 0;
  auto* o_cdata = cmp->add_option("--data", c_data, "Training set (LIBSVM), shared by all configs");
  auto* o_ctest = cmp->add_option("--test-data", c_test, "Test set (LIBSVM)");
  auto* o_cep = cmp->add_option("--epochs", c_epochs, "Comma-separated epoch checkpoints");
  auto* o_cseeds = cmp->add_option("--seeds", c_seeds, "Seeds per checkpoint");
  cmp->add_option("--out", c_out, "Comparison CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      flag_value(o_kind, "generate.kind", gen_kind, flags);
      flag_value(o_p, "generate.p", gen_p, flags);
      flag_value(o_n, "generate.n", gen_n, flags);
      flag_value(o_nt, "generate.n_test", gen_n_test, flags);
      flag_value(o_k, "generate.k_true", gen_k, flags);
      flag_value(o_noise, "generate.noise", gen_noise, flags);
      flag_value(o_density, "generate.density", gen_density, flags);
      flag_value(o_seed, "generate.seed", gen_seed, flags);
      flag_value(o_side, "generate.side", gen_side, flags);
      return cmd_generate(build_config(gen_common, flags), gen_out, gen_test_out);
    }
    if (*train) {
      flag_value(o_solver, "solver.kind", tr_solver, flags);
      flag_value(o_data, "data.train", tr_data, flags);
      flag_value(o_test, "data.test", tr_test, flags);
      return cmd_train(build_config(train_common, flags), tr_out, tr_model);
    }
    if (*dict) {
      flag_value(o_dk, "dict.k", d_k, flags);
      flag_value(o_dl1, "dict.lambda1", d_l1, flags);
      flag_value(o_dl2, "dict.lambda2", d_l2, flags);
      flag_value(o_dg1, "reg.gamma1", d_g1, flags);
      flag_value(o_dg2, "reg.gamma2", d_g2, flags);
      flag_value(o_dmb, "dict.minibatch", d_mb, flags);
      flag_value(o_dep, "dict.epochs", d_epochs, flags);
      return cmd_dict(build_config(dict_common, flags), d_patches, d_images, d_out, d_init, d_metrics);
    }
    if (*rates) {
      flag_value(o_rseeds, "rates.seeds", r_seeds, flags);
      return cmd_rates(build_config(rates_common, flags), r_check, r_out);
    }
    if (*cmp) {
      flag_value(o_cdata, "data.train", c_data, flags);
      flag_value(o_ctest, "data.test", c_test, flags);
      flag_value(o_cep, "compare.epochs", c_epochs, flags);
      flag_value(o_cseeds, "compare.seeds", c_seeds, flags);
      return cmd_compare(cmp_common, flags, c_out);
    }
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
