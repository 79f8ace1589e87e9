#include "smm/data_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "smm/rng.hpp"

namespace smm {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

bool skippable(const std::string& line) {
  for (char c : line) {
    if (c == '#') return true;
    if (!is_space(c)) return false;
  }
  return true;
}

std::ifstream open_in(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw ConfigError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

template <class Int>
bool parse_int(std::string_view s, Int& out) {
  if (s.empty()) return false;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

void write_comment(std::ostream& out, const std::string& comment) {
  if (comment.empty()) return;
  out << "# ";
  for (char c : comment) out << (c == '\n' ? ' ' : c);
  out << '\n';
}

// Next line that is not blank or a '#' comment; false at end of stream.
bool next_content_line(std::istream& in, std::string& line, std::size_t& lineno) {
  while (std::getline(in, line)) {
    ++lineno;
    if (!skippable(line)) return true;
  }
  return false;
}

std::uint32_t read_u32_le(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw ConfigError("patch file truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

Dataset parse_libsvm(std::istream& in, const LibsvmOptions& options, std::string name) {
  Dataset data;
  data.name = std::move(name);
  std::size_t max_index = 0;
  bool any_feature = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skippable(line)) continue;
    const auto tokens = split_ws(line);
    Sample s;
    if (!parse_double(tokens[0], s.label) || !std::isfinite(s.label))
      throw ParseError("bad label '" + std::string(tokens[0]) + "'", lineno);
    if (options.zero_to_minus_one && s.label == 0.0) s.label = -1.0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      const std::string_view tok = tokens[t];
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) throw ParseError("expected idx:val, got '" + std::string(tok) + "'", lineno);
      std::uint64_t idx = 0;
      double val = 0.0;
      if (!parse_int(tok.substr(0, colon), idx) || idx == 0 || idx > 0xFFFFFFFFull)
        throw ParseError("bad feature index in '" + std::string(tok) + "'", lineno);
      if (!parse_double(tok.substr(colon + 1), val) || !std::isfinite(val))
        throw ParseError("bad feature value in '" + std::string(tok) + "'", lineno);
      const auto zero_based = static_cast<std::uint32_t>(idx - 1);
      if (!s.features.indices.empty() && zero_based <= s.features.indices.back())
        throw ParseError("feature indices must be strictly increasing", lineno);
      s.features.indices.push_back(zero_based);
      s.features.values.push_back(val);
      max_index = std::max<std::size_t>(max_index, zero_based);
      any_feature = true;
    }
    data.samples.push_back(std::move(s));
  }
  if (in.bad()) throw ConfigError("read error while parsing LIBSVM input");
  data.p = std::max(options.min_dim, any_feature ? max_index + 1 : 0);
  if (options.normalize) normalize_samples(data);
  return data;
}

Dataset load_libsvm(const std::string& path, const LibsvmOptions& options) {
  auto in = open_in(path);
  return parse_libsvm(in, options, path);
}

void serialize_libsvm(std::ostream& out, const Dataset& data) {
  for (const Sample& s : data.samples) {
    out << format_real(s.label);
    for (std::size_t k = 0; k < s.features.nnz(); ++k)
      out << ' ' << (s.features.indices[k] + 1) << ':' << format_real(s.features.values[k]);
    out << '\n';
  }
}

void normalize_samples(Dataset& data) {
  for (Sample& s : data.samples) {
    const double norm = std::sqrt(s.features.squared_norm());
    if (norm == 0.0) continue;
    for (double& v : s.features.values) v /= norm;
  }
}

SyntheticLogreg generate_synthetic_logreg(const SyntheticLogregOptions& o) {
  if (o.p == 0) throw std::invalid_argument("synthetic data needs p >= 1");
  if (o.k_true > o.p) throw std::invalid_argument("k_true exceeds p");
  if (!(o.noise >= 0.0 && o.noise <= 1.0)) throw std::invalid_argument("noise must lie in [0, 1]");
  if (!(o.density > 0.0 && o.density <= 1.0)) throw std::invalid_argument("density must lie in (0, 1]");
  if (o.p > 0xFFFFFFFFull) throw std::invalid_argument("p too large");

  CounterRng rng(stream_key(o.seed, "data"));
  SyntheticLogreg out;
  out.theta_true = ParamVec::Zero(static_cast<Eigen::Index>(o.p));
  for (std::uint32_t j : sample_without_replacement(o.p, o.k_true, rng))
    out.theta_true[j] = rng.bernoulli(0.5) ? 1.0 : -1.0;

  const auto per_sample =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(o.density * static_cast<double>(o.p))));
  const auto draw = [&](std::size_t count, Dataset& data) {
    data.p = o.p;
    data.samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      Sample s;
      s.features.indices = sample_without_replacement(o.p, std::min(per_sample, o.p), rng);
      s.features.values.resize(s.features.indices.size());
      for (double& v : s.features.values) v = rng.normal();
      const double norm = std::sqrt(s.features.squared_norm());
      if (norm > 0.0)
        for (double& v : s.features.values) v /= norm;
      const double margin = s.features.dot(out.theta_true);
      const bool coin = rng.bernoulli(0.5);
      double label = margin > 0.0 ? 1.0 : margin < 0.0 ? -1.0 : (coin ? 1.0 : -1.0);
      if (rng.bernoulli(o.noise)) label = -label;
      s.label = label;
      data.samples.push_back(std::move(s));
    }
  };
  draw(o.n, out.train);
  out.train.name = "synthetic-train";
  draw(o.n_test, out.test);
  out.test.name = "synthetic-test";
  return out;
}

std::vector<std::uint32_t> epoch_stream(std::size_t n, std::uint64_t epoch, std::uint64_t seed) {
  return random_permutation(n, stream_key(seed, "perm", epoch));
}

bool MetricsRow::operator==(const MetricsRow& o) const {
  const auto same = [](double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b) || (std::isnan(a) && std::isnan(b)); };
  return iter == o.iter && nnz == o.nnz && same(epoch, o.epoch) && same(train_obj, o.train_obj) &&
         same(test_obj, o.test_obj) && same(elapsed_s, o.elapsed_s) && same(step_norm, o.step_norm) &&
         same(w_n, o.w_n);
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_real(const std::string& token) {
  if (token == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (token == "inf") return std::numeric_limits<double>::infinity();
  if (token == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  if (!parse_double(token, v)) throw ConfigError("bad number '" + token + "'");
  return v;
}

void write_metrics(std::ostream& out, const std::vector<MetricsRow>& rows, const std::string& comment) {
  write_comment(out, comment);
  out << kMetricsHeader << '\n';
  for (const MetricsRow& r : rows) {
    out << r.iter << ',' << format_real(r.epoch) << ',' << format_real(r.train_obj) << ',' << format_real(r.test_obj)
        << ',' << r.nnz << ',' << format_real(r.elapsed_s) << ',' << format_real(r.step_norm) << ','
        << format_real(r.w_n) << '\n';
  }
}

void write_metrics(const std::string& path, const std::vector<MetricsRow>& rows, const std::string& comment) {
  auto out = open_out(path);
  write_metrics(out, rows, comment);
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

std::vector<MetricsRow> read_metrics(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!next_content_line(in, line, lineno)) throw ParseError("missing metrics header", lineno);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kMetricsHeader) throw ParseError("unexpected metrics header '" + line + "'", lineno);
  std::vector<MetricsRow> rows;
  while (next_content_line(in, line, lineno)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    if (f.size() != 8) throw ParseError("expected 8 fields", lineno);
    MetricsRow r;
    try {
      if (!parse_int(f[0], r.iter) || !parse_int(f[4], r.nnz)) throw ConfigError("bad integer field");
      r.epoch = parse_real(f[1]);
      r.train_obj = parse_real(f[2]);
      r.test_obj = parse_real(f[3]);
      r.elapsed_s = parse_real(f[5]);
      r.step_norm = parse_real(f[6]);
      r.w_n = parse_real(f[7]);
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), lineno);
    }
    rows.push_back(r);
  }
  return rows;
}

std::vector<MetricsRow> read_metrics(const std::string& path) {
  auto in = open_in(path);
  return read_metrics(in);
}

void write_model(const std::string& path, const ParamVec& theta, const std::string& comment) {
  auto out = open_out(path);
  write_comment(out, comment);
  out << theta.size() << '\n';
  for (Eigen::Index j = 0; j < theta.size(); ++j)
    if (theta[j] != 0.0) out << j << ' ' << format_real(theta[j]) << '\n';
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

ParamVec read_model(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  if (!next_content_line(in, line, lineno)) throw ParseError("missing dimension line", lineno);
  std::size_t p = 0;
  const auto head = split_ws(line);
  if (head.size() != 1 || !parse_int(head[0], p)) throw ParseError("bad dimension line", lineno);
  ParamVec theta = ParamVec::Zero(static_cast<Eigen::Index>(p));
  while (next_content_line(in, line, lineno)) {
    const auto tok = split_ws(line);
    std::size_t j = 0;
    double v = 0.0;
    if (tok.size() != 2 || !parse_int(tok[0], j) || !parse_double(tok[1], v)) throw ParseError("expected 'index value'", lineno);
    if (j >= p) throw ParseError("index out of range", lineno);
    theta[static_cast<Eigen::Index>(j)] = v;
  }
  return theta;
}

std::vector<std::vector<std::size_t>> read_groups(const std::string& path) {
  auto in = open_in(path);
  std::vector<std::vector<std::size_t>> groups;
  std::string line;
  std::size_t lineno = 0;
  while (next_content_line(in, line, lineno)) {
    std::vector<std::size_t> g;
    for (auto tok : split_ws(line)) {
      std::size_t j = 0;
      if (!parse_int(tok, j)) throw ParseError("bad group index '" + std::string(tok) + "'", lineno);
      g.push_back(j);
    }
    groups.push_back(std::move(g));
  }
  return groups;
}

void write_patches(const std::string& path, const Eigen::MatrixXd& signals) {
  auto out = open_out(path, true);
  out.write("SMMPATCH", 8);
  write_u32_le(out, static_cast<std::uint32_t>(signals.rows()));
  write_u32_le(out, static_cast<std::uint32_t>(signals.cols()));
  for (Eigen::Index i = 0; i < signals.cols(); ++i) {
    for (Eigen::Index r = 0; r < signals.rows(); ++r) {
      std::uint64_t bits = std::bit_cast<std::uint64_t>(signals(r, i));
      unsigned char b[8];
      for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(bits >> (8 * k));
      out.write(reinterpret_cast<const char*>(b), 8);
    }
  }
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

Eigen::MatrixXd read_patches(const std::string& path) {
  auto in = open_in(path, true);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, "SMMPATCH", 8) != 0) throw ConfigError("'" + path + "' is not a patch file");
  const std::uint32_t m = read_u32_le(in);
  const std::uint32_t n = read_u32_le(in);
  if (m == 0) throw ConfigError("patch file has m = 0");
  Eigen::MatrixXd signals(m, n);
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t r = 0; r < m; ++r) {
      unsigned char b[8];
      if (!in.read(reinterpret_cast<char*>(b), 8)) throw ConfigError("patch file truncated");
      std::uint64_t bits = 0;
      for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
      signals(r, i) = std::bit_cast<double>(bits);
    }
  }
  return signals;
}

Eigen::MatrixXd read_pgm(const std::string& path) {
  auto in = open_in(path, true);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw ConfigError("'" + path + "' is not a binary (P5) PGM");
  long header[3];
  for (long& h : header) {
    in >> std::ws;
    while (in.peek() == '#') {
      std::string skip;
      std::getline(in, skip);
      in >> std::ws;
    }
    if (!(in >> h)) throw ConfigError("bad PGM header in '" + path + "'");
  }
  const long w = header[0], h = header[1], maxval = header[2];
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw ConfigError("unsupported PGM geometry in '" + path + "'");
  in.get();
  std::vector<unsigned char> pix(static_cast<std::size_t>(w * h));
  if (!in.read(reinterpret_cast<char*>(pix.data()), static_cast<std::streamsize>(pix.size())))
    throw ConfigError("PGM pixel data truncated in '" + path + "'");
  Eigen::MatrixXd img(h, w);
  for (long r = 0; r < h; ++r)
    for (long c = 0; c < w; ++c) img(r, c) = pix[static_cast<std::size_t>(r * w + c)] / static_cast<double>(maxval);
  return img;
}

void write_pgm(const std::string& path, const Eigen::MatrixXd& image) {
  auto out = open_out(path, true);
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  for (Eigen::Index r = 0; r < image.rows(); ++r) {
    for (Eigen::Index c = 0; c < image.cols(); ++c) {
      const double v = std::clamp(image(r, c), 0.0, 1.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    }
  }
}

void write_dictionary(const std::string& path, const Eigen::MatrixXd& D, const std::string& comment) {
  auto out = open_out(path);
  write_comment(out, comment);
  out << D.rows() << ' ' << D.cols() << '\n';
  for (Eigen::Index r = 0; r < D.rows(); ++r) {
    for (Eigen::Index c = 0; c < D.cols(); ++c) out << (c ? " " : "") << format_real(D(r, c));
    out << '\n';
  }
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

Eigen::MatrixXd read_dictionary(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  if (!next_content_line(in, line, lineno)) throw ParseError("missing 'm K' header", lineno);
  const auto head = split_ws(line);
  std::size_t m = 0, k = 0;
  if (head.size() != 2 || !parse_int(head[0], m) || !parse_int(head[1], k)) throw ParseError("bad 'm K' header", lineno);
  Eigen::MatrixXd D(m, k);
  for (std::size_t r = 0; r < m; ++r) {
    if (!next_content_line(in, line, lineno)) throw ParseError("dictionary truncated", lineno);
    const auto tok = split_ws(line);
    if (tok.size() != k) throw ParseError("expected " + std::to_string(k) + " entries", lineno);
    for (std::size_t c = 0; c < k; ++c) {
      try {
        D(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = parse_real(std::string(tok[c]));
      } catch (const ConfigError& e) {
        throw ParseError(e.what(), lineno);
      }
    }
  }
  return D;
}

}  // namespace smm
