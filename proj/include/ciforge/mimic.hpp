#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "ciforge/classify.hpp"
#include "ciforge/core.hpp"
#include "ciforge/datagen.hpp"
#include "ciforge/gbt.hpp"
#include "ciforge/nn.hpp"

// Synthesizes a replacement y column from z alone: y' = r(z) + s with s drawn
// from a Gaussian/Laplace mixture fitted to the residuals of r, or y' drawn
// uniformly over the observed range.

namespace ciforge {

enum class MimicKind { regression, uniform };
enum class RegressorKind { automatic, gbt, mlp };

inline const char* to_string(MimicKind k) { return k == MimicKind::regression ? "reg" : "uniform"; }

inline MimicKind parse_mimic_kind(const std::string& s) {
  if (s == "reg" || s == "regression") return MimicKind::regression;
  if (s == "uniform") return MimicKind::uniform;
  throw Error(ErrorCode::invalid_argument, "unknown mimic '" + s + "' (expected reg or uniform)");
}

inline const char* to_string(RegressorKind k) {
  switch (k) {
    case RegressorKind::automatic: return "auto";
    case RegressorKind::gbt: return "gbt";
    case RegressorKind::mlp: return "mlp";
  }
  return "?";
}

/// Above this many z columns the automatic regressor switches to the MLP.
inline constexpr std::size_t kTreeRegressorMaxZ = 50;

struct MimicConfig {
  MimicKind kind = MimicKind::regression;
  RegressorKind regressor = RegressorKind::automatic;
  gbt::GbtConfig gbt{200, 1, 0.1, 1.0, 1.0, gbt::Objective::squared, 0};
  nn::MlpConfig mlp{{32, 32}, 100, 32, 0.01, 0, nn::Loss::squared};
  double mix_prob_gaussian = 0.3;
  double validation_fraction = 0.2;  // held out of D2 to pick the boosting round
  double padding = 0.0;              // uniform kind only
  bool categorical_table = false;    // sample categorical y from frequency tables over z bins
  std::size_t z_bins = 4;
};

struct MimicModel {
  MimicKind kind = MimicKind::regression;
  std::vector<Column> y_cols, z_cols;

  // regression kind
  RegressorKind regressor = RegressorKind::gbt;
  FeatureEncoder z_encoder;
  std::vector<gbt::GbtModel> trees;  // one squared-loss model per y column
  nn::Mlp mlp;
  std::vector<double> y_mean;        // used when there are no z columns
  std::vector<double> chol;          // lower Cholesky factor of the shrunk residual covariance, row-major
  std::vector<double> covariance;    // shrunk residual covariance, row-major
  std::vector<double> laplace_scale;
  double mix_prob_gaussian = 0.3;

  // categorical frequency tables (optional extension)
  bool categorical_table = false;
  std::vector<std::vector<double>> z_cuts;  // per z column; empty for categorical z
  std::map<std::vector<int>, std::vector<std::vector<double>>> y_tables;  // bin -> per y column counts
  std::vector<std::vector<double>> y_global;

  // uniform kind
  std::vector<double> lower, upper;

  std::size_t n_y() const { return y_cols.size(); }

  /// r(z) for one row of z values.
  std::vector<double> regress(std::span<const double> z) const {
    if (z_cols.empty()) return y_mean;
    std::vector<double> feat(z_encoder.width());
    z_encoder.encode_row(z, feat.data());
    if (regressor == RegressorKind::mlp) return mlp.predict(feat);
    std::vector<double> out(trees.size());
    for (std::size_t k = 0; k < trees.size(); ++k) out[k] = trees[k].predict(feat);
    return out;
  }

  std::vector<int> z_bin(std::span<const double> z) const {
    std::vector<int> key(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) {
      if (z_cuts[j].empty()) {
        key[j] = static_cast<int>(z[j]);
      } else {
        key[j] = static_cast<int>(std::upper_bound(z_cuts[j].begin(), z_cuts[j].end(), z[j]) - z_cuts[j].begin());
      }
    }
    return key;
  }
};

namespace detail {

inline double laplace_draw(double b, Rng& rng) {
  const double u = uniform_open01(rng);
  return u < 0.5 ? b * std::log(2 * u) : -b * std::log(2 * (1 - u));
}

inline void require_y(const Dataset& d2, std::size_t min_rows) {
  if (d2.n_y() == 0) throw Error(ErrorCode::invalid_dataset, "mimic needs at least one y column");
  if (d2.n_rows() < min_rows)
    throw Error(ErrorCode::too_few_rows,
                "mimic fit needs at least " + std::to_string(min_rows) + " rows, got " + std::to_string(d2.n_rows()));
}

inline std::size_t draw_category(const std::vector<double>& counts, Rng& rng) {
  double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  double u = uniform_open01(rng) * total;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    u -= counts[c];
    if (u < 0) return c;
  }
  return counts.size() - 1;
}

inline void fit_tables(MimicModel& m, const Dataset& d2, std::size_t bins) {
  m.z_cuts.assign(m.z_cols.size(), {});
  for (std::size_t j = 0; j < m.z_cols.size(); ++j) {
    if (m.z_cols[j].is_categorical()) continue;
    std::vector<double> v(d2.n_rows());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = d2.at(i, Role::z, j);
    std::sort(v.begin(), v.end());
    for (std::size_t b = 1; b < bins; ++b) m.z_cuts[j].push_back(v[b * v.size() / bins]);
  }
  auto fresh = [&] {
    std::vector<std::vector<double>> t;
    for (const auto& c : m.y_cols) t.emplace_back(c.is_categorical() ? static_cast<std::size_t>(c.cardinality) : 0, 1.0);
    return t;  // add-one smoothing keeps every code possible
  };
  m.y_global = fresh();
  const auto zo = d2.offset(Role::z);
  for (std::size_t i = 0; i < d2.n_rows(); ++i) {
    const auto row = d2.row(i);
    const auto key = m.z_bin(row.subspan(zo, m.z_cols.size()));
    auto it = m.y_tables.find(key);
    if (it == m.y_tables.end()) it = m.y_tables.emplace(key, fresh()).first;
    for (std::size_t k = 0; k < m.y_cols.size(); ++k) {
      if (!m.y_cols[k].is_categorical()) continue;
      const auto code = static_cast<std::size_t>(d2.at(i, Role::y, k));
      it->second[k][code] += 1;
      m.y_global[k][code] += 1;
    }
  }
}

}  // namespace detail

/// Fits r: z -> y on D2 (x columns, if any, are ignored) and the residual
/// noise model. D2 is split 80/20 internally so the boosting round (or MLP
/// epoch) is chosen on held-out rows; residuals are taken over all of D2.
inline MimicModel fit_reg_mimic(const Dataset& d2_in, const MimicConfig& cfg, std::uint64_t seed) {
  detail::require_y(d2_in, 20);
  if (!(cfg.mix_prob_gaussian >= 0 && cfg.mix_prob_gaussian <= 1))
    throw Error(ErrorCode::invalid_argument, "mix_prob_gaussian must lie in [0, 1]");
  const Dataset d2 = d2_in.n_x() > 0 ? d2_in.without_x() : d2_in;
  const std::size_t n = d2.n_rows();
  const std::size_t ny = d2.n_y();

  MimicModel m;
  m.kind = MimicKind::regression;
  m.y_cols = d2.y_cols();
  m.z_cols = d2.z_cols();
  m.mix_prob_gaussian = cfg.mix_prob_gaussian;

  const auto yb = d2.block(Role::y);
  m.y_mean.assign(ny, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < ny; ++k) m.y_mean[k] += yb[i * ny + k] / static_cast<double>(n);

  if (!m.z_cols.empty()) {
    m.z_encoder = FeatureEncoder(m.z_cols);
    Matrix zf{std::vector<double>(n * m.z_encoder.width()), m.z_encoder.width()};
    for (std::size_t i = 0; i < n; ++i)
      m.z_encoder.encode_row(d2.row(i).subspan(d2.offset(Role::z), m.z_cols.size()), zf.values.data() + i * zf.cols);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng = make_rng(seed, Stream::mimic_fit);
    shuffle_in_place(perm, rng);
    const auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(n)));
    const std::size_t n_fit = n - n_val;
    auto take = [&](const Matrix& src, std::size_t from, std::size_t to) {
      Matrix out{{}, src.cols};
      for (std::size_t r = from; r < to; ++r) {
        const auto row = src.row(perm[r]);
        out.values.insert(out.values.end(), row.begin(), row.end());
      }
      return out;
    };
    const Matrix ym{yb, ny};
    const Matrix fx = take(zf, 0, n_fit), fy = take(ym, 0, n_fit);
    const Matrix vx = take(zf, n_fit, n), vy = take(ym, n_fit, n);

    m.regressor = cfg.regressor;
    if (m.regressor == RegressorKind::automatic)
      m.regressor = m.z_cols.size() <= kTreeRegressorMaxZ ? RegressorKind::gbt : RegressorKind::mlp;

    if (m.regressor == RegressorKind::gbt) {
      auto g = cfg.gbt;
      g.objective = gbt::Objective::squared;
      for (std::size_t k = 0; k < ny; ++k) {
        g.seed = derive_seed(seed, Stream::mimic_fit, 1 + k);
        std::vector<double> t(n_fit), vt(n_val);
        for (std::size_t r = 0; r < n_fit; ++r) t[r] = fy.at(r, k);
        for (std::size_t r = 0; r < n_val; ++r) vt[r] = vy.at(r, k);
        if (n_val > 0)
          m.trees.push_back(gbt::gbt_fit(fx, t, g, std::pair{&vx, std::span<const double>(vt)}));
        else
          m.trees.push_back(gbt::gbt_fit(fx, t, g));
      }
    } else {
      auto c = cfg.mlp;
      c.loss = nn::Loss::squared;
      c.seed = derive_seed(seed, Stream::mimic_fit, 100);
      m.mlp = n_val > 0 ? nn::mlp_fit(fx, fy, c, std::pair{&vx, &vy}).model : nn::mlp_fit(fx, fy, c).model;
    }
  }

  // Residual moments.
  std::vector<double> res(n * ny);
  const auto zo = d2.offset(Role::z);
  for (std::size_t i = 0; i < n; ++i) {
    const auto pred = m.regress(d2.row(i).subspan(zo, m.z_cols.size()));
    for (std::size_t k = 0; k < ny; ++k) res[i * ny + k] = yb[i * ny + k] - pred[k];
  }
  std::vector<double> mean(ny, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < ny; ++k) mean[k] += res[i * ny + k] / static_cast<double>(n);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ny), static_cast<Eigen::Index>(ny));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < ny; ++a)
      for (std::size_t b = 0; b < ny; ++b)
        cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) +=
            (res[i * ny + a] - mean[a]) * (res[i * ny + b] - mean[b]) / static_cast<double>(n - 1);
  // A perfect fit leaves zero residuals; a tiny floor keeps both noise
  // families proper.
  const double trace = std::max(cov.trace(), 1e-12 * static_cast<double>(ny));
  cov += (1e-6 * trace / static_cast<double>(ny)) * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    cov += trace * Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
    llt.compute(cov);
  }
  const Eigen::MatrixXd l = llt.matrixL();
  for (std::size_t a = 0; a < ny; ++a) {
    for (std::size_t b = 0; b < ny; ++b) {
      m.chol.push_back(l(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
      m.covariance.push_back(cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)));
    }
    m.laplace_scale.push_back(std::sqrt(cov(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(a)) / 2));
  }

  m.categorical_table = cfg.categorical_table &&
                        std::any_of(m.y_cols.begin(), m.y_cols.end(), [](const Column& c) { return c.is_categorical(); });
  if (m.categorical_table) detail::fit_tables(m, d2, std::max<std::size_t>(cfg.z_bins, 1));
  return m;
}

/// Per-coordinate bounds [min - padding*range, max + padding*range].
inline MimicModel fit_uniform_mimic(const Dataset& d2, double padding) {
  detail::require_y(d2, 1);
  if (!(padding >= 0)) throw Error(ErrorCode::invalid_argument, "padding must be non-negative");
  MimicModel m;
  m.kind = MimicKind::uniform;
  m.y_cols = d2.y_cols();
  m.z_cols = d2.z_cols();
  for (std::size_t k = 0; k < d2.n_y(); ++k) {
    if (m.y_cols[k].is_categorical())
      throw Error(ErrorCode::mimic_support, "uniform mimic needs continuous y, column '" + m.y_cols[k].name + "' is categorical");
    double lo = d2.at(0, Role::y, k), hi = lo;
    for (std::size_t i = 1; i < d2.n_rows(); ++i) {
      lo = std::min(lo, d2.at(i, Role::y, k));
      hi = std::max(hi, d2.at(i, Role::y, k));
    }
    if (!(hi > lo)) throw Error(ErrorCode::degenerate_range, "column '" + m.y_cols[k].name + "' is constant");
    const double pad = padding * (hi - lo);
    m.lower.push_back(lo - pad);
    m.upper.push_back(hi + pad);
  }
  return m;
}

inline MimicModel fit_mimic(const Dataset& d2, const MimicConfig& cfg, std::uint64_t seed) {
  return cfg.kind == MimicKind::uniform ? fit_uniform_mimic(d2, cfg.padding) : fit_reg_mimic(d2, cfg, seed);
}

/// Density of the residual mixture at s (regression kind).
inline double noise_density(const MimicModel& m, std::span<const double> s) {
  const std::size_t ny = m.n_y();
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> l(
      m.chol.data(), static_cast<Eigen::Index>(ny), static_cast<Eigen::Index>(ny));
  Eigen::Map<const Eigen::VectorXd> v(s.data(), static_cast<Eigen::Index>(ny));
  const Eigen::VectorXd w = l.triangularView<Eigen::Lower>().solve(v);
  double log_det = 0;
  for (std::size_t k = 0; k < ny; ++k) log_det += std::log(m.chol[k * ny + k]);
  const double gauss =
      std::exp(-0.5 * w.squaredNorm() - log_det - 0.5 * static_cast<double>(ny) * std::log(2 * std::numbers::pi));
  double lap = 1;
  for (std::size_t k = 0; k < ny; ++k) lap *= std::exp(-std::abs(s[k]) / m.laplace_scale[k]) / (2 * m.laplace_scale[k]);
  return m.mix_prob_gaussian * gauss + (1 - m.mix_prob_gaussian) * lap;
}

/// Replaces D3's y columns with mimicked values. Row i draws its noise from
/// its own derived stream, so the output depends on (z_i, seed, i) only.
inline Dataset mimic_apply(const MimicModel& m, const Dataset& d3, std::uint64_t seed) {
  if (d3.y_cols() != m.y_cols || d3.z_cols() != m.z_cols)
    throw Error(ErrorCode::schema_mismatch, "dataset columns differ from the mimic's fit schema");
  const std::size_t ny = m.n_y();
  const std::size_t zo = d3.offset(Role::z);
  std::vector<double> out(d3.n_rows() * ny);
  std::vector<double> eps(ny);
  for (std::size_t i = 0; i < d3.n_rows(); ++i) {
    Rng rng = make_rng(seed, Stream::mimic_noise, i);
    double* y = out.data() + i * ny;
    if (m.kind == MimicKind::uniform) {
      for (std::size_t k = 0; k < ny; ++k) y[k] = m.lower[k] + (m.upper[k] - m.lower[k]) * uniform_open01(rng);
      continue;
    }
    const auto z = d3.row(i).subspan(zo, m.z_cols.size());
    const auto r = m.regress(z);
    const bool gaussian = uniform_open01(rng) < m.mix_prob_gaussian;
    if (gaussian) {
      for (std::size_t k = 0; k < ny; ++k) eps[k] = standard_normal(rng);
      for (std::size_t a = 0; a < ny; ++a) {
        double s = 0;
        for (std::size_t b = 0; b <= a; ++b) s += m.chol[a * ny + b] * eps[b];
        y[a] = r[a] + s;
      }
    } else {
      for (std::size_t k = 0; k < ny; ++k) y[k] = r[k] + detail::laplace_draw(m.laplace_scale[k], rng);
    }
    const std::vector<std::vector<double>>* table = nullptr;
    if (m.categorical_table) {
      const auto it = m.y_tables.find(m.z_bin(z));
      table = it == m.y_tables.end() ? &m.y_global : &it->second;
    }
    for (std::size_t k = 0; k < ny; ++k) {
      const auto& c = m.y_cols[k];
      if (!c.is_categorical()) continue;
      if (table) {
        y[k] = static_cast<double>(detail::draw_category((*table)[k], rng));
      } else {
        y[k] = std::clamp(std::round(y[k]), 0.0, static_cast<double>(c.cardinality - 1));
      }
    }
  }
  return d3.with_y(m.y_cols, out);
}

}  // namespace ciforge
