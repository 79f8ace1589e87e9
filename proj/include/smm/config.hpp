#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "smm/dictlearn.hpp"
#include "smm/solvers.hpp"
#include "smm/types.hpp"

namespace smm {

/// Flat `section.key = value` configuration with a fixed key set and defaults.
/// Unknown keys are rejected with ConfigError.
class CliConfig {
 public:
  CliConfig();

  /// '#' starts a comment; blank lines are skipped. Throws ParseError with the line number.
  void load_file(const std::string& path);
  void load_text(const std::string& text);
  void set(const std::string& key, const std::string& value);
  /// "key=value".
  void apply_override(const std::string& assignment);

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;
  double get_real(const std::string& key) const;
  std::uint64_t get_uint(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<std::uint64_t> get_uint_list(const std::string& key) const;

  /// All effective keys, sorted, as "key=value" separated by spaces.
  std::string echo() const;
  const std::map<std::string, std::string>& values() const { return values_; }
  static const std::map<std::string, std::string>& defaults();

 private:
  std::map<std::string, std::string> values_;
};

/// Regularizer from reg.*; group_linf reads reg.groups.
Regularizer make_regularizer(const CliConfig& config, std::size_t dim);

/// Solver settings for a training set (horizon and beta defaults depend on it).
SolverConfig make_solver_config(const CliConfig& config, const Dataset& train);

/// Dictionary settings for m-dimensional signals; groups tile the sqrt(m) x sqrt(m)
/// grid with reg.tile unless reg.groups names a file.
DictConfig make_dict_config(const CliConfig& config, std::size_t m);

}  // namespace smm
