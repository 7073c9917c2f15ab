#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "ciforge/datagen.hpp"
#include "ciforge/mimic.hpp"

using namespace ciforge;

namespace {

// Columns (x_0, y_0, z_0..z_{dz-1}); y = z_0 when tied, else independent noise.
Dataset make(std::size_t n, std::size_t dz, bool tied, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> data;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> z(dz);
    for (auto& v : z) v = standard_normal(rng);
    data.push_back(standard_normal(rng));
    data.push_back(tied ? z[0] : 1.5 + 2.0 * standard_normal(rng));
    data.insert(data.end(), z.begin(), z.end());
  }
  std::vector<Column> zc;
  for (std::size_t k = 0; k < dz; ++k) zc.push_back(Column::continuous("z_" + std::to_string(k)));
  return Dataset({Column::continuous("x_0")}, {Column::continuous("y_0")}, zc, std::move(data));
}

Dataset with_y_values(std::vector<double> ys) {
  std::vector<double> data;
  for (double y : ys) data.insert(data.end(), {0.0, y, 1.0});
  return Dataset({Column::continuous("x_0")}, {Column::continuous("y_0")}, {Column::continuous("z_0")}, data);
}

}  // namespace

TEST(RegMimic, RealizableRegressionHasSmallResidual) {
  const auto m = fit_reg_mimic(make(1000, 1, true, 1).without_x(), {}, 3);
  EXPECT_EQ(m.regressor, RegressorKind::gbt);
  EXPECT_LT(m.covariance[0], 0.05);
}

TEST(RegMimic, IndependentYHasVarianceResidual) {
  const auto d2 = make(2000, 3, false, 2);
  const auto y = d2.block(Role::y);
  double mean = 0, var = 0;
  for (double v : y) mean += v / static_cast<double>(y.size());
  for (double v : y) var += (v - mean) * (v - mean) / static_cast<double>(y.size() - 1);
  const auto m = fit_reg_mimic(d2, {}, 4);
  EXPECT_NEAR(m.covariance[0], var, 0.1 * var);
  EXPECT_NEAR(m.laplace_scale[0], std::sqrt(m.covariance[0] / 2), 0.1 * m.laplace_scale[0]);
}

TEST(RegMimic, Deterministic) {
  const auto d2 = make(300, 2, true, 3).without_x();
  const auto d3 = make(100, 2, true, 4);
  const auto a = mimic_apply(fit_reg_mimic(d2, {}, 9), d3, 5);
  const auto b = mimic_apply(fit_reg_mimic(d2, {}, 9), d3, 5);
  EXPECT_EQ(a, b);
}

TEST(RegMimic, TooFewRows) {
  try {
    fit_reg_mimic(make(19, 1, true, 1), {}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::too_few_rows);
  }
}

TEST(RegMimic, MlpRegressorChosenAboveFiftyZ) {
  MimicConfig cfg;
  cfg.mlp.epochs = 2;
  const auto m = fit_reg_mimic(make(100, 51, false, 5), cfg, 1);
  EXPECT_EQ(m.regressor, RegressorKind::mlp);
}

TEST(MimicApply, IndependentYCenteredAtMean) {
  const auto d2 = make(2000, 2, false, 6);
  const auto d3 = make(4000, 2, false, 7);
  const auto out = mimic_apply(fit_reg_mimic(d2, {}, 1), d3, 2);
  const auto y2 = d2.block(Role::y);
  double mean2 = 0;
  for (double v : y2) mean2 += v / static_cast<double>(y2.size());
  const auto y = out.block(Role::y);
  double mean = 0, var = 0;
  for (double v : y) mean += v / static_cast<double>(y.size());
  for (double v : y) var += (v - mean) * (v - mean) / static_cast<double>(y.size() - 1);
  // The fitted mean itself carries sampling error from D2 (sd 2 over 1600 rows).
  const double se = std::sqrt(var / static_cast<double>(y.size()) + 4.0 / 1600);
  EXPECT_NEAR(mean, mean2, 3 * se);
}

TEST(MimicApply, XAndZUntouched) {
  const auto d3 = make(200, 3, true, 8);
  const auto out = mimic_apply(fit_reg_mimic(make(200, 3, true, 9), {}, 1), d3, 3);
  ASSERT_EQ(out.n_rows(), d3.n_rows());
  for (std::size_t i = 0; i < d3.n_rows(); ++i) {
    EXPECT_EQ(std::memcmp(&out.data()[i * 5], &d3.data()[i * 5], sizeof(double)), 0);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(out.at(i, Role::z, k), d3.at(i, Role::z, k));
  }
}

TEST(MimicApply, ShuffledXGivesIdenticalY) {
  const auto d3 = make(300, 2, true, 10);
  const auto m = fit_reg_mimic(make(300, 2, true, 11), {}, 1);
  std::vector<double> data(d3.data().begin(), d3.data().end());
  Rng rng(4);
  std::vector<double> xs;
  for (std::size_t i = 0; i < d3.n_rows(); ++i) xs.push_back(data[i * 4]);
  shuffle_in_place(xs, rng);
  for (std::size_t i = 0; i < d3.n_rows(); ++i) data[i * 4] = xs[i];
  const Dataset shuffled(d3.x_cols(), d3.y_cols(), d3.z_cols(), data);
  EXPECT_EQ(mimic_apply(m, d3, 6).block(Role::y), mimic_apply(m, shuffled, 6).block(Role::y));
}

TEST(MimicApply, SchemaMismatch) {
  const auto m = fit_reg_mimic(make(100, 2, true, 12), {}, 1);
  try {
    mimic_apply(m, make(50, 3, true, 13), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::schema_mismatch);
  }
}

TEST(MimicApply, NoiseDensityPositiveEverywhere) {
  const auto m = fit_reg_mimic(make(500, 2, false, 14), {}, 1);
  EXPECT_EQ(m.mix_prob_gaussian, 0.3);
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    const std::vector<double> s{20 * standard_normal(rng)};
    EXPECT_GT(noise_density(m, s), 0.0);
  }
}

TEST(MimicApply, MultivariateNoiseDensityPositive) {
  Rng rng(9);
  std::vector<double> data;
  for (int i = 0; i < 300; ++i) {
    const double z = standard_normal(rng), e = standard_normal(rng);
    data.insert(data.end(), {0.0, z + e, z + e + 1e-3 * standard_normal(rng), z});
  }
  const Dataset d({Column::continuous("x_0")}, {Column::continuous("y_0"), Column::continuous("y_1")},
                  {Column::continuous("z_0")}, data);
  const auto m = fit_reg_mimic(d, {}, 1);
  for (int t = 0; t < 100; ++t) {
    const std::vector<double> s{3 * standard_normal(rng), 3 * standard_normal(rng)};
    EXPECT_GT(noise_density(m, s), 0.0);
  }
}

TEST(UniformMimic, BoundsFromRange) {
  const auto m = fit_uniform_mimic(with_y_values({0.0, 0.4, 1.0, 0.7}), 0.0);
  EXPECT_EQ(m.lower[0], 0.0);
  EXPECT_EQ(m.upper[0], 1.0);
  const auto p = fit_uniform_mimic(with_y_values({-1.0, 1.0, 0.0}), 0.05);
  EXPECT_DOUBLE_EQ(p.lower[0], -1.1);
  EXPECT_DOUBLE_EQ(p.upper[0], 1.1);
}

TEST(UniformMimic, ConstantYRejected) {
  try {
    fit_uniform_mimic(with_y_values({2.0, 2.0, 2.0}), 0.1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::degenerate_range);
  }
}

TEST(UniformMimic, OutputUniformAndIndependent) {
  const auto m = fit_uniform_mimic(with_y_values({-2.0, 2.0}), 0.0);
  const auto d3 = make(20000, 1, true, 15);
  const auto out = mimic_apply(m, d3, 1);
  std::vector<double> counts(4, 0);
  double cov_xy = 0;
  for (std::size_t i = 0; i < out.n_rows(); ++i) {
    const double y = out.at(i, Role::y, 0);
    ASSERT_GE(y, -2.0);
    ASSERT_LE(y, 2.0);
    counts[std::min<std::size_t>(3, static_cast<std::size_t>((y + 2) / 1.0))] += 1;
    cov_xy += y * out.at(i, Role::x, 0) / static_cast<double>(out.n_rows());
  }
  for (double c : counts) EXPECT_NEAR(c / 20000, 0.25, 0.015);
  EXPECT_NEAR(cov_xy, 0.0, 0.05);
}

TEST(UniformMimic, CategoricalYRejected) {
  const Dataset d({Column::continuous("x_0")}, {Column::categorical("y_0", 2)}, {}, {0, 1, 0, 0});
  try {
    fit_uniform_mimic(d, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::mimic_support);
  }
}

TEST(RegMimic, CategoricalYStaysInAlphabet) {
  const auto j = gen_discrete_joint({2, 3, 2}, true, 1);
  const auto d = sample_discrete(j, 400, 2);
  for (bool table : {false, true}) {
    MimicConfig cfg;
    cfg.categorical_table = table;
    const auto out = mimic_apply(fit_reg_mimic(d, cfg, 1), d, 3);
    for (std::size_t i = 0; i < out.n_rows(); ++i) {
      const double y = out.at(i, Role::y, 0);
      EXPECT_EQ(y, std::round(y));
      EXPECT_GE(y, 0);
      EXPECT_LE(y, 2);
    }
  }
}

TEST(MimicKind, Parse) {
  EXPECT_EQ(parse_mimic_kind("reg"), MimicKind::regression);
  EXPECT_EQ(parse_mimic_kind("regression"), MimicKind::regression);
  EXPECT_EQ(parse_mimic_kind("uniform"), MimicKind::uniform);
  EXPECT_THROW(parse_mimic_kind("cgan"), Error);
}
