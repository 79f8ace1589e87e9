#include "smm/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "smm/data_io.hpp"

namespace smm {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

const std::map<std::string, std::string>& CliConfig::defaults() {
  static const std::map<std::string, std::string> d = {
      {"solver.kind", "smm"},
      {"solver.label", ""},
      {"solver.epochs", "1"},
      {"solver.minibatch", "1"},
      {"solver.seed", "0"},
      {"solver.averaging", "none"},
      {"solver.eval_every", "0"},
      {"solver.max_steps", "0"},
      {"solver.rho", "0"},
      {"solver.force_unit_first_weight", "true"},
      {"solver.record_time", "true"},
      {"solver.lazy", "false"},
      {"solver.dc_epsilon", "0.01"},
      {"solver.dc_rounds", "5"},
      {"solver.rda_gamma", "1"},
      {"solver.tune_n0", "false"},
      {"solver.n0_candidates", "0,10,100,1000,10000"},
      {"solver.tune_fraction", "0.05"},
      {"schedule.kind", "tuned_sqrt"},
      {"schedule.gamma", "1"},
      {"schedule.n0", "0"},
      {"schedule.beta", "0"},
      {"schedule.horizon", "0"},
      {"loss.kind", "logistic"},
      {"loss.ridge_mu", "0"},
      {"reg.kind", "l1"},
      {"reg.lambda", "0"},
      {"reg.lambda2", "0"},
      {"reg.gamma1", "0"},
      {"reg.gamma2", "0"},
      {"reg.groups", ""},
      {"reg.tile", "2"},
      {"fista.tol", "0"},
      {"fista.backtracking", "false"},
      {"fista.restart", "false"},
      {"data.train", ""},
      {"data.test", ""},
      {"data.normalize", "false"},
      {"data.zero_to_minus_one", "false"},
      {"generate.kind", "logreg"},
      {"generate.p", "1000"},
      {"generate.n", "10000"},
      {"generate.n_test", "0"},
      {"generate.k_true", "100"},
      {"generate.noise", "0.05"},
      {"generate.density", "0.01"},
      {"generate.seed", "0"},
      {"generate.side", "20"},
      {"generate.atoms", "64"},
      {"generate.sparsity", "3"},
      {"generate.whiten", "true"},
      {"dict.k", "32"},
      {"dict.lambda1", "0.15"},
      {"dict.lambda2", "0.01"},
      {"dict.minibatch", "100"},
      {"dict.epochs", "5"},
      {"dict.seed", "0"},
      {"dict.patch_size", "20"},
      {"dict.stride", "20"},
      {"dict.whiten", "true"},
      {"rates.seeds", "20"},
      {"rates.gamma", "1"},
      {"rates.horizon", "10000"},
      {"rates.p", "50"},
      {"rates.n", "10000"},
      {"rates.lambda", "0.001"},
      {"rates.mu", "0.1"},
      {"rates.trials", "10000"},
      {"rates.seed", "1"},
      {"compare.epochs", "1,2,3,4,5,10,25"},
      {"compare.seeds", "1"},
  };
  return d;
}

CliConfig::CliConfig() : values_(defaults()) {}

void CliConfig::load_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", lineno);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    try {
      set(key, value);
    } catch (const ParseError&) {
      throw;
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
}

void CliConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  load_text(ss.str());
}

void CliConfig::set(const std::string& key, const std::string& value) {
  if (!defaults().count(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

void CliConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

bool CliConfig::has(const std::string& key) const { return values_.count(key) > 0; }

const std::string& CliConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double CliConfig::get_real(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a finite number, got '" + v + "'");
  }
}

std::uint64_t CliConfig::get_uint(const std::string& key) const {
  const std::string& v = get(key);
  try {
    std::size_t used = 0;
    if (v.empty() || v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long u = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
}

bool CliConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<std::uint64_t> CliConfig::get_uint_list(const std::string& key) const {
  std::vector<std::uint64_t> out;
  std::stringstream ss(get(key));
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      if (item[0] == '-') throw std::invalid_argument(item);
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(key + ": expected a comma-separated list of non-negative integers");
    }
  }
  return out;
}

std::string CliConfig::echo() const {
  std::string out;
  for (const auto& [k, v] : values_) {
    if (!out.empty()) out += ' ';
    out += k + '=' + v;
  }
  return out;
}

Regularizer make_regularizer(const CliConfig& c, std::size_t dim) {
  const std::string& kind = c.get("reg.kind");
  Regularizer reg;
  if (kind == "none") reg = L1{0.0};
  else if (kind == "l1") reg = L1{c.get_real("reg.lambda")};
  else if (kind == "ridge") reg = Ridge{c.get_real("reg.lambda2")};
  else if (kind == "elastic_net") reg = ElasticNet{c.get_real("reg.lambda"), c.get_real("reg.lambda2")};
  else if (kind == "group_linf") {
    if (c.get("reg.groups").empty()) throw ConfigError("reg.kind = group_linf needs reg.groups");
    reg = GroupLinf{read_groups(c.get("reg.groups")), c.get_real("reg.gamma1"), c.get_real("reg.gamma2")};
  } else {
    throw ConfigError("unknown reg.kind '" + kind + "' (none, l1, ridge, elastic_net, group_linf)");
  }
  try {
    validate(reg, dim);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return reg;
}

SolverConfig make_solver_config(const CliConfig& c, const Dataset& train) {
  SolverConfig s;
  s.solver = parse_solver_kind(c.get("solver.kind"));
  s.epochs = c.get_uint("solver.epochs");
  s.minibatch = c.get_uint("solver.minibatch");
  s.seed = c.get_uint("solver.seed");
  s.averaging = parse_averaging(c.get("solver.averaging"));
  s.eval_every = c.get_uint("solver.eval_every");
  s.max_steps = c.get_uint("solver.max_steps");
  s.rho = c.get_real("solver.rho");
  s.force_unit_first_weight = c.get_bool("solver.force_unit_first_weight");
  s.record_time = c.get_bool("solver.record_time");
  s.lazy = c.get_bool("solver.lazy");
  s.dc_epsilon = c.get_real("solver.dc_epsilon");
  s.dc_rounds = c.get_uint("solver.dc_rounds");
  s.rda_gamma = c.get_real("solver.rda_gamma");
  s.loss = Loss{parse_loss_kind(c.get("loss.kind")), c.get_real("loss.ridge_mu")};
  s.reg = make_regularizer(c, train.p);
  s.fista_tol = c.get_real("fista.tol");
  s.fista_backtracking = c.get_bool("fista.backtracking");
  s.fista_restart = c.get_bool("fista.restart");

  const std::string& kind = c.get("schedule.kind");
  if (kind == "constant") {
    std::uint64_t horizon = c.get_uint("schedule.horizon");
    if (horizon == 0) {
      const std::uint64_t per_epoch = (train.size() + s.minibatch - 1) / std::max<std::size_t>(1, s.minibatch);
      horizon = s.max_steps > 0 ? s.max_steps : s.epochs * per_epoch;
    }
    s.schedule = ConstantFiniteHorizon{c.get_real("schedule.gamma"), std::max<std::uint64_t>(1, horizon)};
  } else if (kind == "sqrt") {
    s.schedule = SqrtDecay{c.get_real("schedule.gamma")};
  } else if (kind == "tuned_sqrt") {
    s.schedule = TunedSqrt{c.get_uint("schedule.n0")};
  } else if (kind == "strongly_convex") {
    double beta = c.get_real("schedule.beta");
    if (beta == 0.0) {
      if (!(s.loss.ridge_mu > 0.0)) throw ConfigError("schedule.kind = strongly_convex needs loss.ridge_mu > 0");
      beta = s.loss.ridge_mu / resolve_rho(s, train);
    }
    s.schedule = StronglyConvex{beta};
  } else {
    throw ConfigError("unknown schedule.kind '" + kind + "' (constant, sqrt, tuned_sqrt, strongly_convex)");
  }
  validate(s);
  return s;
}

DictConfig make_dict_config(const CliConfig& c, std::size_t m) {
  DictConfig d;
  d.K = c.get_uint("dict.k");
  d.lambda1 = c.get_real("dict.lambda1");
  d.lambda2 = c.get_real("dict.lambda2");
  d.minibatch = c.get_uint("dict.minibatch");
  d.epochs = c.get_uint("dict.epochs");
  d.seed = c.get_uint("dict.seed");
  d.record_time = c.get_bool("solver.record_time");
  d.force_unit_first_weight = c.get_bool("solver.force_unit_first_weight");
  d.eval_every = c.get_uint("solver.eval_every");
  const std::string& kind = c.get("schedule.kind");
  if (kind == "tuned_sqrt") d.schedule = TunedSqrt{c.get_uint("schedule.n0")};
  else if (kind == "sqrt") d.schedule = SqrtDecay{c.get_real("schedule.gamma")};
  else throw ConfigError("dictionary learning takes schedule.kind = tuned_sqrt or sqrt");

  std::vector<std::vector<std::size_t>> groups;
  if (!c.get("reg.groups").empty()) {
    groups = read_groups(c.get("reg.groups"));
  } else {
    const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(m))));
    if (side * side != m) throw ConfigError("signals are not square patches; give reg.groups explicitly");
    const std::uint64_t tile = c.get_uint("reg.tile");
    if (tile == 0) throw ConfigError("reg.tile must be >= 1");
    groups = tile_groups(side, side, tile);
  }
  d.penalty = GroupLinf{std::move(groups), c.get_real("reg.gamma1"), c.get_real("reg.gamma2")};
  try {
    validate(Regularizer(d.penalty), m);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return d;
}

}  // namespace smm
