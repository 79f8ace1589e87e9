#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace smm {

using ParamVec = Eigen::VectorXd;

/// Sparse vector with strictly increasing indices.
struct SparseVec {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;

  std::size_t nnz() const { return indices.size(); }
  bool empty() const { return indices.empty(); }

  double dot(const ParamVec& dense) const {
    double s = 0.0;
    for (std::size_t k = 0; k < indices.size(); ++k) s += values[k] * dense[indices[k]];
    return s;
  }

  double squared_norm() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return s;
  }

  /// dense += alpha * this
  void axpy_into(double alpha, ParamVec& dense) const {
    for (std::size_t k = 0; k < indices.size(); ++k) dense[indices[k]] += alpha * values[k];
  }

  ParamVec to_dense(std::size_t dim) const {
    ParamVec out = ParamVec::Zero(static_cast<Eigen::Index>(dim));
    axpy_into(1.0, out);
    return out;
  }

  bool operator==(const SparseVec&) const = default;
};

struct Sample {
  SparseVec features;
  double label = 0.0;

  bool operator==(const Sample&) const = default;
};

/// Immutable after load. p >= max feature index + 1.
struct Dataset {
  std::vector<Sample> samples;
  std::size_t p = 0;
  std::string name;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t total_nnz() const {
    std::size_t s = 0;
    for (const auto& x : samples) s += x.features.nnz();
    return s;
  }
};

/// Bad configuration or malformed input (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite objective or violated runtime invariant (CLI exit code 2).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public ConfigError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : ConfigError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace smm
