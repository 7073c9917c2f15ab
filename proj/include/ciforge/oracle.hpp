#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ciforge/core.hpp"
#include "ciforge/datagen.hpp"

// Exact computations on finite-alphabet distributions: total variation,
// Bayes-optimal error, the per-cell coupling mass eps(y,z), the CI
// projection, and the error-gap identities the test statistic rests on.

namespace ciforge::oracle {

class DiscreteDist {
 public:
  DiscreteDist() = default;
  explicit DiscreteDist(std::vector<double> probs) : probs_(std::move(probs)) {
    double s = 0;
    for (double p : probs_) {
      if (!(p >= 0) || !std::isfinite(p)) throw Error(ErrorCode::invalid_argument, "probabilities must be >= 0");
      s += p;
    }
    if (probs_.empty() || std::abs(s - 1.0) > 1e-12)
      throw Error(ErrorCode::invalid_argument, "probabilities must sum to 1");
  }

  std::size_t size() const { return probs_.size(); }
  std::span<const double> probs() const { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }

 private:
  std::vector<double> probs_;
};

inline void check_same_support(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw Error(ErrorCode::support_mismatch,
                "support sizes differ: " + std::to_string(p.size()) + " vs " + std::to_string(q.size()));
}

/// Half the L1 distance. Works on any pair of equal-length nonnegative
/// vectors, including sub-probability restrictions.
inline double tv_distance(std::span<const double> p, std::span<const double> q) {
  check_same_support(p, q);
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

inline double tv_distance(const DiscreteDist& p, const DiscreteDist& q) { return tv_distance(p.probs(), q.probs()); }

inline double tv_distance(const DiscreteJoint& p, const DiscreteJoint& q) {
  if (!(p.sizes() == q.sizes())) throw Error(ErrorCode::support_mismatch, "joint alphabets differ");
  return tv_distance(p.pmf(), q.pmf());
}

inline double overlap_mass(std::span<const double> p, std::span<const double> q) {
  check_same_support(p, q);
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::min(p[i], q[i]);
  return s;
}

/// 1 - sum min(p, q); agrees with tv_distance for probability vectors.
inline double tv_from_overlap(std::span<const double> p, std::span<const double> q) { return 1.0 - overlap_mass(p, q); }

/// Error of the Bayes-optimal classifier between two equally likely classes.
inline double bayes_error(std::span<const double> p, std::span<const double> q) { return 0.5 * overlap_mass(p, q); }

inline double bayes_error(const DiscreteDist& p, const DiscreteDist& q) { return bayes_error(p.probs(), q.probs()); }

// ---------------------------------------------------------------------------
// Maximal coupling mass by vertex enumeration of the transport polytope.
// Independent of the min-sum formula; intended for supports of at most 4.

namespace detail {

// Solves A t = b for square A (row-major) with partial pivoting; nullopt if
// singular.
inline std::optional<std::vector<double>> solve_dense(std::vector<double> a, std::vector<double> b, std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    if (std::abs(a[piv * n + col]) < 1e-12) return std::nullopt;
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[piv * n + c]);
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r * n + col] / a[col * n + col];
      if (f == 0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t r = 0; r < n; ++r) b[r] /= a[r * n + r];
  return b;
}

}  // namespace detail

/// max over couplings pi of P(w) and Q(w~) of pi(w = w~). Enumerates every
/// basis of 2s-1 cells, keeps the feasible basic solutions, returns the best
/// diagonal mass.
inline double max_coupling_mass_exhaustive(std::span<const double> p, std::span<const double> q) {
  check_same_support(p, q);
  const std::size_t s = p.size();
  if (s == 0 || s > 4) throw Error(ErrorCode::invalid_argument, "exhaustive coupling supports sizes 1..4");
  const std::size_t cells = s * s;
  const std::size_t k = 2 * s - 1;  // independent marginal constraints
  double best = -1.0;
  std::vector<std::size_t> pick(k);
  std::iota(pick.begin(), pick.end(), std::size_t{0});
  while (true) {
    // Constraints: row sums (all s) and column sums (first s-1; the last is implied).
    std::vector<double> a(k * k, 0.0), b(k, 0.0);
    for (std::size_t r = 0; r < s; ++r) b[r] = p[r];
    for (std::size_t c = 0; c + 1 < s; ++c) b[s + c] = q[c];
    for (std::size_t v = 0; v < k; ++v) {
      const std::size_t i = pick[v] / s, j = pick[v] % s;
      a[i * k + v] = 1.0;
      if (j + 1 < s) a[(s + j) * k + v] = 1.0;
    }
    if (auto t = detail::solve_dense(a, b, k)) {
      bool feasible = true;
      double diag = 0;
      for (std::size_t v = 0; v < k; ++v) {
        if ((*t)[v] < -1e-12) feasible = false;
        if (pick[v] / s == pick[v] % s) diag += std::max(0.0, (*t)[v]);
      }
      if (feasible) best = std::max(best, diag);
    }
    // next combination
    std::size_t pos = k;
    while (pos > 0 && pick[pos - 1] == cells - k + pos - 1) --pos;
    if (pos == 0) break;
    ++pick[pos - 1];
    for (std::size_t v = pos; v < k; ++v) pick[v] = pick[v - 1] + 1;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Conditionals and the CI projection.

/// q(y | z), stored [z * ny + y]. Rows for z with p(z) = 0 are ignored.
struct ConditionalPmf {
  std::size_t ny = 0, nz = 0;
  std::vector<double> values;

  double operator()(std::size_t y, std::size_t z) const { return values[z * ny + y]; }
  double& at(std::size_t y, std::size_t z) { return values[z * ny + y]; }

  static ConditionalPmf uniform(std::size_t ny, std::size_t nz) {
    return {ny, nz, std::vector<double>(ny * nz, 1.0 / static_cast<double>(ny))};
  }
};

/// p(y | z) of the joint; rows with p(z) = 0 are filled uniformly.
inline ConditionalPmf conditional_y_given_z(const DiscreteJoint& j) {
  const auto& s = j.sizes();
  const auto pz = j.marginal_z();
  const auto pyz = j.marginal_yz();
  ConditionalPmf q{s.y, s.z, std::vector<double>(s.y * s.z)};
  for (std::size_t z = 0; z < s.z; ++z)
    for (std::size_t y = 0; y < s.y; ++y)
      q.at(y, z) = pz[z] > 0 ? pyz[y * s.z + z] / pz[z] : 1.0 / static_cast<double>(s.y);
  return q;
}

inline void validate_conditional(const DiscreteJoint& j, const ConditionalPmf& q) {
  const auto& s = j.sizes();
  if (q.ny != s.y || q.nz != s.z || q.values.size() != s.y * s.z)
    throw Error(ErrorCode::invalid_conditional, "conditional shape does not match the joint");
  const auto pz = j.marginal_z();
  for (std::size_t z = 0; z < s.z; ++z) {
    if (pz[z] <= 0) continue;
    double sum = 0;
    for (std::size_t y = 0; y < s.y; ++y) {
      const double v = q(y, z);
      if (!(v >= 0) || !std::isfinite(v))
        throw Error(ErrorCode::invalid_conditional, "negative or non-finite conditional entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw Error(ErrorCode::invalid_conditional, "q(.|z=" + std::to_string(z) + ") does not sum to 1");
  }
}

/// The pmf p(x,z) q(y|z) = p(z) q(y|z) p(x|z) as a raw vector in joint order.
inline std::vector<double> mimic_pmf(const DiscreteJoint& j, const ConditionalPmf& q) {
  const auto& s = j.sizes();
  const auto pxz = j.marginal_xz();
  std::vector<double> m(s.cells());
  for (std::size_t x = 0; x < s.x; ++x)
    for (std::size_t y = 0; y < s.y; ++y)
      for (std::size_t z = 0; z < s.z; ++z) m[j.index(x, y, z)] = pxz[x * s.z + z] * q(y, z);
  return m;
}

/// q(x,y,z) = p(z) p(y|z) p(x|z); zero where p(z) = 0.
inline DiscreteJoint ci_projection(const DiscreteJoint& j) {
  const auto& s = j.sizes();
  const auto pz = j.marginal_z();
  const auto pyz = j.marginal_yz();
  const auto pxz = j.marginal_xz();
  std::vector<double> out(s.cells(), 0.0);
  for (std::size_t x = 0; x < s.x; ++x)
    for (std::size_t y = 0; y < s.y; ++y)
      for (std::size_t z = 0; z < s.z; ++z)
        if (pz[z] > 0) out[j.index(x, y, z)] = pxz[x * s.z + z] * pyz[y * s.z + z] / pz[z];
  return DiscreteJoint(s, std::move(out));
}

inline bool is_ci(const DiscreteJoint& j, double tol) {
  if (!(tol > 0)) throw Error(ErrorCode::invalid_argument, "tolerance must be > 0");
  return tv_distance(j, ci_projection(j)) <= tol;
}

// ---------------------------------------------------------------------------
// eps(y, z) = sum_x min(p(x|z), p(x|y,z)).

/// Per-(y,z) coupling mass; cells with p(y,z) = 0 are absent.
struct EpsilonTable {
  std::size_t ny = 0, nz = 0;
  std::vector<std::optional<double>> values;  // [y * nz + z]

  std::optional<double> operator()(std::size_t y, std::size_t z) const { return values[y * nz + z]; }
};

inline std::vector<double> x_given_z(const DiscreteJoint& j, std::size_t z) {
  const auto& s = j.sizes();
  std::vector<double> v(s.x, 0.0);
  double pz = 0;
  for (std::size_t x = 0; x < s.x; ++x)
    for (std::size_t y = 0; y < s.y; ++y) {
      v[x] += j.p(x, y, z);
      pz += j.p(x, y, z);
    }
  if (pz <= 0) throw Error(ErrorCode::zero_marginal, "p(z=" + std::to_string(z) + ") = 0");
  for (auto& e : v) e /= pz;
  return v;
}

inline std::vector<double> x_given_yz(const DiscreteJoint& j, std::size_t y, std::size_t z) {
  const auto& s = j.sizes();
  std::vector<double> v(s.x);
  double pyz = 0;
  for (std::size_t x = 0; x < s.x; ++x) {
    v[x] = j.p(x, y, z);
    pyz += v[x];
  }
  if (pyz <= 0)
    throw Error(ErrorCode::zero_marginal, "p(y=" + std::to_string(y) + ", z=" + std::to_string(z) + ") = 0");
  for (auto& e : v) e /= pyz;
  return v;
}

inline double epsilon(const DiscreteJoint& j, std::size_t y, std::size_t z) {
  const auto cond = x_given_yz(j, y, z);
  return overlap_mass(x_given_z(j, z), cond);
}

inline EpsilonTable epsilon_table(const DiscreteJoint& j) {
  const auto& s = j.sizes();
  const auto pyz = j.marginal_yz();
  EpsilonTable t{s.y, s.z, std::vector<std::optional<double>>(s.y * s.z)};
  for (std::size_t y = 0; y < s.y; ++y)
    for (std::size_t z = 0; z < s.z; ++z)
      if (pyz[y * s.z + z] > 0) t.values[y * s.z + z] = epsilon(j, y, z);
  return t;
}

// ---------------------------------------------------------------------------
// The error-gap identity and its lower bound.

struct GapReport {
  double gap_lhs = 0;    // tv_full - tv_yz = 2 |E e(f1*) - E e(f2*)|
  double tv_full = 0;    // D_TV(p(x,y,z), p(z) q(y|z) p(x|z))
  double tv_yz = 0;      // D_TV(p(y,z), p(z) q(y|z))
  double bound_rhs = 0;  // sum min(p(z)q(y|z), p(y,z)) (1 - eps(y,z))
  EpsilonTable epsilon_table;

  double slack() const { return gap_lhs - bound_rhs; }
  bool holds(double tol = 1e-12) const { return gap_lhs >= bound_rhs - tol && gap_lhs >= -tol; }
};

inline GapReport theorem2_check(const DiscreteJoint& j, const ConditionalPmf& q) {
  validate_conditional(j, q);
  const auto& s = j.sizes();
  const auto pz = j.marginal_z();
  const auto pyz = j.marginal_yz();

  GapReport r;
  r.tv_full = tv_distance(std::span<const double>(j.pmf()), mimic_pmf(j, q));
  std::vector<double> qyz(s.y * s.z);
  for (std::size_t y = 0; y < s.y; ++y)
    for (std::size_t z = 0; z < s.z; ++z) qyz[y * s.z + z] = pz[z] > 0 ? pz[z] * q(y, z) : 0.0;
  r.tv_yz = tv_distance(pyz, qyz);
  r.epsilon_table = epsilon_table(j);
  for (std::size_t y = 0; y < s.y; ++y)
    for (std::size_t z = 0; z < s.z; ++z) {
      const auto e = r.epsilon_table(y, z);
      if (!e) continue;
      r.bound_rhs += std::min(qyz[y * s.z + z], pyz[y * s.z + z]) * (1.0 - *e);
    }
  r.gap_lhs = r.tv_full - r.tv_yz;
  return r;
}

struct Corollary2Result {
  double lhs = 0;
  double rhs = 0;
  double a = 0;  // max_{y,z} p(y|z)
  bool holds(double tol = 1e-12) const { return lhs >= rhs - tol; }
};

/// Uniform mimic q(y|z) = 1/|Y|: gap >= D_TV(p(y,z)p(x|z), p(x,y,z)) / (a |Y|).
inline Corollary2Result corollary2_check(const DiscreteJoint& j) {
  const auto& s = j.sizes();
  if (s.y < 2) throw Error(ErrorCode::size_out_of_range, "corollary check needs |Y| >= 2");
  const auto cond = conditional_y_given_z(j);
  const auto pz = j.marginal_z();
  Corollary2Result r;
  for (std::size_t z = 0; z < s.z; ++z)
    if (pz[z] > 0)
      for (std::size_t y = 0; y < s.y; ++y) r.a = std::max(r.a, cond(y, z));
  r.lhs = theorem2_check(j, ConditionalPmf::uniform(s.y, s.z)).gap_lhs;
  r.rhs = tv_distance(ci_projection(j), j) / (r.a * static_cast<double>(s.y));
  return r;
}

}  // namespace ciforge::oracle
