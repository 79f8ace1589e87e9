#include "smm/prox.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace smm {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void require_nonneg(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be finite and >= 0");
}

// prox of t*c*||.||_inf on one group: clip every entry to [-tau, tau] where
// tau comes from projecting |v_g| onto the l1 ball of radius t*c (Moreau).
void prox_linf_group(ParamVec& u, const std::vector<std::size_t>& group, double radius) {
  if (group.empty()) return;
  if (radius <= 0.0) return;
  double l1 = 0.0;
  for (std::size_t k : group) l1 += std::abs(u[k]);
  if (l1 <= radius) {
    for (std::size_t k : group) u[k] = 0.0;
    return;
  }
  std::vector<double> mags;
  mags.reserve(group.size());
  for (std::size_t k : group) mags.push_back(std::abs(u[k]));
  std::sort(mags.begin(), mags.end(), std::greater<>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < mags.size(); ++j) {
    cumsum += mags[j];
    const double cand = (cumsum - radius) / static_cast<double>(j + 1);
    if (j + 1 == mags.size() || cand >= mags[j + 1]) {
      tau = cand;
      break;
    }
  }
  for (std::size_t k : group) {
    const double a = std::abs(u[k]);
    if (a > tau) u[k] = std::copysign(tau, u[k]);
  }
}

}  // namespace

void validate(const Regularizer& reg, std::size_t dim) {
  std::visit(overloaded{
                 [](const L1& r) { require_nonneg(r.lambda, "reg.lambda"); },
                 [](const Ridge& r) { require_nonneg(r.lambda2, "reg.lambda2"); },
                 [](const ElasticNet& r) {
                   require_nonneg(r.lambda, "reg.lambda");
                   require_nonneg(r.lambda2, "reg.lambda2");
                 },
                 [dim](const WeightedL1& r) {
                   require_nonneg(r.lambda, "reg.lambda");
                   if (static_cast<std::size_t>(r.eta.size()) != dim)
                     throw std::invalid_argument("weighted l1: weight vector dimension mismatch");
                   for (Eigen::Index j = 0; j < r.eta.size(); ++j) require_nonneg(r.eta[j], "weighted l1 weight");
                 },
                 [dim](const GroupLinf& r) {
                   require_nonneg(r.gamma1, "reg.gamma1");
                   require_nonneg(r.gamma2, "reg.gamma2");
                   std::vector<char> seen(dim, 0);
                   for (const auto& g : r.groups) {
                     for (std::size_t k : g) {
                       if (k >= dim) throw std::invalid_argument("group index out of range");
                       if (seen[k]) throw std::invalid_argument("groups must be pairwise disjoint");
                       seen[k] = 1;
                     }
                   }
                 },
             },
             reg);
}

ParamVec project_simplex(const ParamVec& v, double total) {
  if (!(total >= 0.0)) throw std::invalid_argument("project_simplex: total must be >= 0");
  const auto n = static_cast<std::size_t>(v.size());
  if (n == 0) return v;
  std::vector<double> sorted(v.data(), v.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    cumsum += sorted[j];
    const double cand = (cumsum - total) / static_cast<double>(j + 1);
    if (j + 1 == n || cand >= sorted[j + 1]) {
      tau = cand;
      break;
    }
  }
  ParamVec out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - tau, 0.0);
  return out;
}

ParamVec project_l1_ball(const ParamVec& v, double radius) {
  if (!(radius >= 0.0)) throw std::invalid_argument("project_l1_ball: radius must be >= 0");
  if (v.lpNorm<1>() <= radius) return v;
  if (radius == 0.0) return ParamVec::Zero(v.size());
  const ParamVec mags = project_simplex(v.cwiseAbs(), radius);
  ParamVec out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = std::copysign(mags[i], v[i]);
  return out;
}

ParamVec prox(const Regularizer& reg, const ParamVec& v, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("prox: step t must be positive");
  return std::visit(
      overloaded{
          [&](const L1& r) {
            ParamVec u(v.size());
            const double thr = r.lambda * t;
            for (Eigen::Index i = 0; i < v.size(); ++i) u[i] = soft_threshold(v[i], thr);
            return u;
          },
          [&](const Ridge& r) -> ParamVec { return v / (1.0 + 2.0 * t * r.lambda2); },
          [&](const ElasticNet& r) {
            ParamVec u(v.size());
            const double thr = r.lambda * t;
            const double scale = 1.0 + 2.0 * t * r.lambda2;
            for (Eigen::Index i = 0; i < v.size(); ++i) u[i] = soft_threshold(v[i], thr) / scale;
            return u;
          },
          [&](const WeightedL1& r) {
            if (r.eta.size() != v.size()) throw std::invalid_argument("prox: weighted l1 dimension mismatch");
            ParamVec u(v.size());
            for (Eigen::Index i = 0; i < v.size(); ++i) u[i] = soft_threshold(v[i], r.lambda * r.eta[i] * t);
            return u;
          },
          [&](const GroupLinf& r) {
            // prox_{t(h + a||.||^2)}(v) = prox_{t h / (1 + 2 a t)}(v / (1 + 2 a t))
            const double scale = 1.0 + 2.0 * t * r.gamma2;
            ParamVec u = v / scale;
            const double radius = t * r.gamma1 / scale;
            for (const auto& g : r.groups) prox_linf_group(u, g, radius);
            return u;
          },
      },
      reg);
}

double penalty_value(const Regularizer& reg, const ParamVec& v) {
  return std::visit(overloaded{
                        [&](const L1& r) { return r.lambda == 0.0 ? 0.0 : r.lambda * v.lpNorm<1>(); },
                        [&](const Ridge& r) { return r.lambda2 * v.squaredNorm(); },
                        [&](const ElasticNet& r) { return r.lambda * v.lpNorm<1>() + r.lambda2 * v.squaredNorm(); },
                        [&](const WeightedL1& r) {
                          double s = 0.0;
                          for (Eigen::Index i = 0; i < v.size(); ++i) s += r.eta[i] * std::abs(v[i]);
                          return r.lambda * s;
                        },
                        [&](const GroupLinf& r) {
                          double s = 0.0;
                          for (const auto& g : r.groups) {
                            double mx = 0.0;
                            for (std::size_t k : g) mx = std::max(mx, std::abs(v[k]));
                            s += mx;
                          }
                          return r.gamma1 * s + r.gamma2 * v.squaredNorm();
                        },
                    },
                    reg);
}

namespace {

// Min-norm element of g + c * d|.| at x, per coordinate.
double min_norm_abs(double x, double g, double c) {
  if (x > 0.0) return g + c;
  if (x < 0.0) return g - c;
  return soft_threshold(g, c);
}

}  // namespace

ParamVec min_norm_subgradient(const Regularizer& reg, const ParamVec& at, const ParamVec& grad) {
  if (at.size() != grad.size()) throw std::invalid_argument("min_norm_subgradient: dimension mismatch");
  return std::visit(
      overloaded{
          [&](const L1& r) {
            ParamVec s(at.size());
            for (Eigen::Index i = 0; i < at.size(); ++i) s[i] = min_norm_abs(at[i], grad[i], r.lambda);
            return s;
          },
          [&](const Ridge& r) -> ParamVec { return grad + 2.0 * r.lambda2 * at; },
          [&](const ElasticNet& r) {
            ParamVec s(at.size());
            for (Eigen::Index i = 0; i < at.size(); ++i)
              s[i] = min_norm_abs(at[i], grad[i] + 2.0 * r.lambda2 * at[i], r.lambda);
            return s;
          },
          [&](const WeightedL1& r) {
            ParamVec s(at.size());
            for (Eigen::Index i = 0; i < at.size(); ++i) s[i] = min_norm_abs(at[i], grad[i], r.lambda * r.eta[i]);
            return s;
          },
          [&](const GroupLinf& r) {
            ParamVec s = grad + 2.0 * r.gamma2 * at;
            const double c = r.gamma1;
            if (c == 0.0) return s;
            for (const auto& g : r.groups) {
              if (g.empty()) continue;
              double mx = 0.0;
              for (std::size_t k : g) mx = std::max(mx, std::abs(at[k]));
              ParamVec sg(static_cast<Eigen::Index>(g.size()));
              for (std::size_t j = 0; j < g.size(); ++j) sg[static_cast<Eigen::Index>(j)] = s[g[j]];
              if (mx == 0.0) {
                // d(c||.||_inf)(0) is the l1 ball of radius c.
                const ParamVec res = sg - project_l1_ball(sg, c);
                for (std::size_t j = 0; j < g.size(); ++j) s[g[j]] = res[static_cast<Eigen::Index>(j)];
                continue;
              }
              // c * conv{sign(x_k) e_k : |x_k| = max}; minimize over simplex weights a.
              const double tie = 1e-12 * mx;
              std::vector<std::size_t> active;
              for (std::size_t j = 0; j < g.size(); ++j)
                if (std::abs(at[g[j]]) >= mx - tie) active.push_back(j);
              ParamVec h(static_cast<Eigen::Index>(active.size()));
              for (std::size_t a = 0; a < active.size(); ++a) {
                const std::size_t k = g[active[a]];
                const double sign = at[k] > 0.0 ? 1.0 : -1.0;
                h[static_cast<Eigen::Index>(a)] = -sg[static_cast<Eigen::Index>(active[a])] * sign / c;
              }
              const ParamVec weights = project_simplex(h, 1.0);
              for (std::size_t a = 0; a < active.size(); ++a) {
                const std::size_t k = g[active[a]];
                const double sign = at[k] > 0.0 ? 1.0 : -1.0;
                s[k] += c * weights[static_cast<Eigen::Index>(a)] * sign;
              }
            }
            return s;
          },
      },
      reg);
}

bool is_plain_l1(const Regularizer& reg) { return std::holds_alternative<L1>(reg); }

double l1_strength(const Regularizer& reg) {
  if (const auto* r = std::get_if<L1>(&reg)) return r->lambda;
  if (const auto* r = std::get_if<ElasticNet>(&reg)) return r->lambda;
  return 0.0;
}

std::string describe(const Regularizer& reg) {
  std::ostringstream os;
  os.precision(17);
  std::visit(overloaded{
                 [&](const L1& r) { os << "l1(lambda=" << r.lambda << ")"; },
                 [&](const Ridge& r) { os << "ridge(lambda2=" << r.lambda2 << ")"; },
                 [&](const ElasticNet& r) { os << "elastic_net(lambda=" << r.lambda << ",lambda2=" << r.lambda2 << ")"; },
                 [&](const WeightedL1& r) { os << "weighted_l1(lambda=" << r.lambda << ",p=" << r.eta.size() << ")"; },
                 [&](const GroupLinf& r) {
                   os << "group_linf(gamma1=" << r.gamma1 << ",gamma2=" << r.gamma2 << ",groups=" << r.groups.size()
                      << ")";
                 },
             },
             reg);
  return os.str();
}

std::vector<std::vector<std::size_t>> tile_groups(std::size_t rows, std::size_t cols, std::size_t size) {
  if (size == 0) throw std::invalid_argument("tile_groups: tile size must be positive");
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t r0 = 0; r0 < rows; r0 += size) {
    for (std::size_t c0 = 0; c0 < cols; c0 += size) {
      std::vector<std::size_t> g;
      for (std::size_t r = r0; r < std::min(rows, r0 + size); ++r)
        for (std::size_t c = c0; c < std::min(cols, c0 + size); ++c) g.push_back(r * cols + c);
      groups.push_back(std::move(g));
    }
  }
  return groups;
}

}  // namespace smm
