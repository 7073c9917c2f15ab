#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ciforge/core.hpp"
#include "ciforge/io.hpp"

namespace ciforge {

/// Uniform draw on (0, 1), built from the top 53 bits of one raw draw.
inline double uniform_open01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

/// Dirichlet(1, ..., 1): uniform on the simplex.
inline std::vector<double> dirichlet_uniform(std::size_t k, Rng& rng) {
  std::vector<double> w(k);
  double s = 0;
  for (auto& v : w) {
    v = -std::log(uniform_open01(rng));
    s += v;
  }
  for (auto& v : w) v /= s;
  return w;
}

// ---------------------------------------------------------------------------
// Post-nonlinear benchmark.

enum class Transform { identity, square, cube, tanh, exp_neg };

inline constexpr std::array<Transform, 5> kTransforms{Transform::identity, Transform::square, Transform::cube,
                                                      Transform::tanh, Transform::exp_neg};

inline const char* to_string(Transform t) {
  switch (t) {
    case Transform::identity: return "x";
    case Transform::square: return "x^2";
    case Transform::cube: return "x^3";
    case Transform::tanh: return "tanh(x)";
    case Transform::exp_neg: return "exp(-x)";
  }
  return "?";
}

/// exp(-x) clamps its argument to [-10, 10].
inline double apply(Transform t, double v) {
  switch (t) {
    case Transform::identity: return v;
    case Transform::square: return v * v;
    case Transform::cube: return v * v * v;
    case Transform::tanh: return std::tanh(v);
    case Transform::exp_neg: return std::exp(-std::clamp(v, -10.0, 10.0));
  }
  return v;
}

struct PostNonlinearConfig {
  std::size_t d_z = 5;
  std::size_t n = 1000;
  bool ci = true;
  double a_xy = 2.0;
  double noise_var = 0.25;
  std::uint64_t seed = 0;

  void validate() const {
    if (d_z < 1) throw Error(ErrorCode::invalid_argument, "d_z must be >= 1");
    if (n < 1) throw Error(ErrorCode::invalid_argument, "n must be >= 1");
    if (!(noise_var > 0) || !std::isfinite(noise_var)) throw Error(ErrorCode::invalid_argument, "noise_var must be > 0");
    if (!std::isfinite(a_xy)) throw Error(ErrorCode::invalid_argument, "a_xy must be finite");
  }
};

/// Generated data together with the hidden draws that produced it.
struct PostNonlinearSample {
  Dataset data;
  Transform f1 = Transform::identity;
  Transform f2 = Transform::identity;
  std::vector<double> a_x, a_y;
  std::vector<double> eta1, eta2;
};

/// X = f1(A_x Z + eta1); Y = f2(A_y Z + eta2) under CI, otherwise
/// Y = f2(A_y Z + a_xy X + eta2). Z and the A entries are standard normal,
/// the A entries scaled by 1/sqrt(d_z).
inline PostNonlinearSample gen_postnonlinear_detailed(const PostNonlinearConfig& cfg) {
  cfg.validate();
  Rng rng = make_rng(cfg.seed, Stream::datagen);
  PostNonlinearSample s;
  s.f1 = kTransforms[rng() % kTransforms.size()];
  s.f2 = kTransforms[rng() % kTransforms.size()];
  const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_z));
  for (std::size_t k = 0; k < cfg.d_z; ++k) s.a_x.push_back(standard_normal(rng) * scale);
  for (std::size_t k = 0; k < cfg.d_z; ++k) s.a_y.push_back(standard_normal(rng) * scale);

  const double sd = std::sqrt(cfg.noise_var);
  const std::size_t w = 2 + cfg.d_z;
  std::vector<double> data(cfg.n * w);
  s.eta1.resize(cfg.n);
  s.eta2.resize(cfg.n);
  for (std::size_t i = 0; i < cfg.n; ++i) {
    double* row = &data[i * w];
    double ax = 0, ay = 0;
    for (std::size_t k = 0; k < cfg.d_z; ++k) {
      const double z = standard_normal(rng);
      row[2 + k] = z;
      ax += s.a_x[k] * z;
      ay += s.a_y[k] * z;
    }
    s.eta1[i] = sd * standard_normal(rng);
    s.eta2[i] = sd * standard_normal(rng);
    const double x = apply(s.f1, ax + s.eta1[i]);
    const double y = cfg.ci ? apply(s.f2, ay + s.eta2[i]) : apply(s.f2, ay + cfg.a_xy * x + s.eta2[i]);
    row[0] = x;
    row[1] = y;
  }
  std::vector<Column> zc;
  for (std::size_t k = 0; k < cfg.d_z; ++k) zc.push_back(Column::continuous("z_" + std::to_string(k)));
  s.data = Dataset({Column::continuous("x_0")}, {Column::continuous("y_0")}, std::move(zc), std::move(data));
  return s;
}

inline Dataset gen_postnonlinear(const PostNonlinearConfig& cfg) { return gen_postnonlinear_detailed(cfg).data; }

// ---------------------------------------------------------------------------
// Exact discrete joints over X x Y x Z.

struct JointSizes {
  std::size_t x = 2, y = 2, z = 2;
  std::size_t cells() const { return x * y * z; }
  friend bool operator==(const JointSizes&, const JointSizes&) = default;
};

class DiscreteJoint {
 public:
  DiscreteJoint() = default;

  DiscreteJoint(JointSizes sizes, std::vector<double> pmf) : sizes_(sizes), pmf_(std::move(pmf)) {
    if (sizes_.x == 0 || sizes_.y == 0 || sizes_.z == 0)
      throw Error(ErrorCode::size_out_of_range, "alphabet sizes must be positive");
    if (pmf_.size() != sizes_.cells()) throw Error(ErrorCode::invalid_argument, "pmf size does not match alphabets");
    double s = 0;
    for (double p : pmf_) {
      if (!(p >= 0) || !std::isfinite(p)) throw Error(ErrorCode::invalid_argument, "pmf entries must be >= 0");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-12) throw Error(ErrorCode::invalid_argument, "pmf must sum to 1");
  }

  const JointSizes& sizes() const { return sizes_; }
  const std::vector<double>& pmf() const { return pmf_; }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return (x * sizes_.y + y) * sizes_.z + z; }
  double p(std::size_t x, std::size_t y, std::size_t z) const { return pmf_[index(x, y, z)]; }

  std::vector<double> marginal_z() const {
    std::vector<double> m(sizes_.z, 0.0);
    for (std::size_t x = 0; x < sizes_.x; ++x)
      for (std::size_t y = 0; y < sizes_.y; ++y)
        for (std::size_t z = 0; z < sizes_.z; ++z) m[z] += p(x, y, z);
    return m;
  }
  /// p(y, z), indexed [y * nz + z].
  std::vector<double> marginal_yz() const {
    std::vector<double> m(sizes_.y * sizes_.z, 0.0);
    for (std::size_t x = 0; x < sizes_.x; ++x)
      for (std::size_t y = 0; y < sizes_.y; ++y)
        for (std::size_t z = 0; z < sizes_.z; ++z) m[y * sizes_.z + z] += p(x, y, z);
    return m;
  }
  /// p(x, z), indexed [x * nz + z].
  std::vector<double> marginal_xz() const {
    std::vector<double> m(sizes_.x * sizes_.z, 0.0);
    for (std::size_t x = 0; x < sizes_.x; ++x)
      for (std::size_t y = 0; y < sizes_.y; ++y)
        for (std::size_t z = 0; z < sizes_.z; ++z) m[x * sizes_.z + z] += p(x, y, z);
    return m;
  }

 private:
  JointSizes sizes_;
  std::vector<double> pmf_;
};

inline void check_alphabet_sizes(JointSizes s, std::size_t lo = 2, std::size_t hi = 6) {
  for (std::size_t v : {s.x, s.y, s.z})
    if (v < lo || v > hi)
      throw Error(ErrorCode::size_out_of_range,
                  "alphabet size " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

/// ci: p(z) p(y|z) p(x|z) from independent Dirichlet(1) draws. Otherwise a
/// single Dirichlet(1) draw over the whole cube.
inline DiscreteJoint gen_discrete_joint(JointSizes sizes, bool ci, std::uint64_t seed) {
  check_alphabet_sizes(sizes);
  Rng rng = make_rng(seed, Stream::oracle);
  std::vector<double> pmf(sizes.cells());
  if (!ci) {
    pmf = dirichlet_uniform(sizes.cells(), rng);
    return DiscreteJoint(sizes, std::move(pmf));
  }
  const auto pz = dirichlet_uniform(sizes.z, rng);
  std::vector<std::vector<double>> py(sizes.z), px(sizes.z);
  for (std::size_t z = 0; z < sizes.z; ++z) py[z] = dirichlet_uniform(sizes.y, rng);
  for (std::size_t z = 0; z < sizes.z; ++z) px[z] = dirichlet_uniform(sizes.x, rng);
  double s = 0;
  for (std::size_t x = 0; x < sizes.x; ++x)
    for (std::size_t y = 0; y < sizes.y; ++y)
      for (std::size_t z = 0; z < sizes.z; ++z) {
        const double v = pz[z] * py[z][y] * px[z][x];
        pmf[(x * sizes.y + y) * sizes.z + z] = v;
        s += v;
      }
  for (auto& v : pmf) v /= s;
  return DiscreteJoint(sizes, std::move(pmf));
}

/// n iid rows (x_0, y_0, z_0) as categorical codes.
inline Dataset sample_discrete(const DiscreteJoint& j, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "sample size must be >= 1");
  const auto& s = j.sizes();
  std::vector<double> cdf(j.pmf().size());
  std::partial_sum(j.pmf().begin(), j.pmf().end(), cdf.begin());
  Rng rng = make_rng(seed, Stream::datagen);
  std::vector<double> data;
  data.reserve(3 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = uniform_open01(rng) * cdf.back();
    std::size_t cell = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    cell = std::min(cell, cdf.size() - 1);
    while (j.pmf()[cell] == 0 && cell > 0) --cell;  // upper_bound can land on a zero cell at a cdf plateau
    const std::size_t z = cell % s.z;
    const std::size_t y = (cell / s.z) % s.y;
    const std::size_t x = cell / (s.z * s.y);
    data.push_back(static_cast<double>(x));
    data.push_back(static_cast<double>(y));
    data.push_back(static_cast<double>(z));
  }
  return Dataset({Column::categorical("x_0", static_cast<int>(s.x))},
                 {Column::categorical("y_0", static_cast<int>(s.y))},
                 {Column::categorical("z_0", static_cast<int>(s.z))}, std::move(data));
}

// ---------------------------------------------------------------------------
// Small structural graph for relation-file runs: a -> b -> c and a -> d,
// with b -> d as well. Then a _||_ c | b holds and a, d share an edge.

struct StructuralSample {
  Table table;
  std::vector<Relation> relations;
};

inline StructuralSample gen_structural_graph(std::size_t n, std::uint64_t seed, double noise_sd = 0.5) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "sample size must be >= 1");
  Rng rng = make_rng(seed, Stream::datagen, 1);
  StructuralSample s;
  s.table.columns = {Column::continuous("a"), Column::continuous("b"), Column::continuous("c"),
                     Column::continuous("d")};
  s.table.data.reserve(4 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = standard_normal(rng);
    const double b = std::tanh(1.5 * a) + noise_sd * standard_normal(rng);
    const double c = b * b + 0.8 * b + noise_sd * standard_normal(rng);
    const double d = 1.5 * a + 0.5 * b + noise_sd * standard_normal(rng);
    s.table.data.insert(s.table.data.end(), {a, b, c, d});
  }
  s.relations = {Relation{"a", "c", {"b"}, true}, Relation{"a", "d", {"b"}, false}};
  return s;
}

}  // namespace ciforge
