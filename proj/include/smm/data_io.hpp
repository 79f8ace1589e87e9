#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "smm/types.hpp"

namespace smm {

struct LibsvmOptions {
  bool normalize = false;          ///< scale every nonzero sample to unit l2 norm
  bool zero_to_minus_one = false;  ///< map label 0 to -1
  std::size_t min_dim = 0;         ///< p is at least this (to align train/test)
};

/// `<label> <idx>:<val> ...` per line, 1-based strictly increasing indices.
/// Blank lines and lines starting with '#' are skipped. Throws ParseError.
Dataset parse_libsvm(std::istream& in, const LibsvmOptions& options = {}, std::string name = "");
Dataset load_libsvm(const std::string& path, const LibsvmOptions& options = {});
void serialize_libsvm(std::ostream& out, const Dataset& data);

/// Zero-norm samples are left unchanged.
void normalize_samples(Dataset& data);

struct SyntheticLogregOptions {
  std::size_t p = 100;
  std::size_t n = 1000;
  std::size_t n_test = 0;
  std::size_t k_true = 10;
  double noise = 0.0;    ///< label flip probability
  double density = 0.1;  ///< fraction of nonzero features per sample
  std::uint64_t seed = 0;
};

struct SyntheticLogreg {
  Dataset train;
  Dataset test;
  ParamVec theta_true;
};

/// theta_true has k_true entries +-1; each sample has round(density * p)
/// (at least 1) Gaussian features, normalized to unit norm; the label is
/// sign(x'theta_true) (a fair coin when the margin is zero), flipped with
/// probability `noise`. Everything comes from the "data" stream of the seed.
SyntheticLogreg generate_synthetic_logreg(const SyntheticLogregOptions& options);

/// Permutation of {0..n-1} for one epoch; a pure function of (seed, epoch).
std::vector<std::uint32_t> epoch_stream(std::size_t n, std::uint64_t epoch, std::uint64_t seed);

struct MetricsRow {
  std::uint64_t iter = 0;
  double epoch = 0.0;
  double train_obj = 0.0;
  double test_obj = 0.0;
  std::uint64_t nnz = 0;
  double elapsed_s = 0.0;
  double step_norm = 0.0;
  double w_n = 0.0;

  bool operator==(const MetricsRow&) const;
};

inline constexpr const char* kMetricsHeader = "iter,epoch,train_obj,test_obj,nnz,elapsed_s,step_norm,w_n";

/// %.17g, with "nan"/"inf"/"-inf" tokens for non-finite values.
std::string format_real(double v);
double parse_real(const std::string& token);

/// comment (if non-empty) is written as "# <comment>" above the header.
void write_metrics(std::ostream& out, const std::vector<MetricsRow>& rows, const std::string& comment = "");
void write_metrics(const std::string& path, const std::vector<MetricsRow>& rows, const std::string& comment = "");
std::vector<MetricsRow> read_metrics(std::istream& in);
std::vector<MetricsRow> read_metrics(const std::string& path);

/// Model file: optional "# ..." line, then p, then "index value" (0-based) per nonzero.
void write_model(const std::string& path, const ParamVec& theta, const std::string& comment = "");
ParamVec read_model(const std::string& path);

/// One group per line, whitespace-separated 0-based indices.
std::vector<std::vector<std::size_t>> read_groups(const std::string& path);

/// Patch file: "SMMPATCH", u32 m, u32 N, then N*m little-endian f64.
/// Signals are the columns of the returned m x N matrix.
void write_patches(const std::string& path, const Eigen::MatrixXd& signals);
Eigen::MatrixXd read_patches(const std::string& path);

/// Binary P5 PGM with maxval <= 255; pixels scaled to [0, 1].
Eigen::MatrixXd read_pgm(const std::string& path);
void write_pgm(const std::string& path, const Eigen::MatrixXd& image);

/// "m K" header then row-major entries at 17 significant digits.
void write_dictionary(const std::string& path, const Eigen::MatrixXd& D, const std::string& comment = "");
Eigen::MatrixXd read_dictionary(const std::string& path);

}  // namespace smm
