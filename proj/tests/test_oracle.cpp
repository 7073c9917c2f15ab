#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "ciforge/datagen.hpp"
#include "ciforge/oracle.hpp"

using namespace ciforge;
using namespace ciforge::oracle;

namespace {

std::vector<double> random_pmf(std::size_t k, Rng& rng) { return dirichlet_uniform(k, rng); }

// sup over events A of |P(A) - Q(A)|, by enumerating all subsets.
double tv_by_events(std::span<const double> p, std::span<const double> q) {
  double best = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << p.size()); ++mask) {
    double d = 0;
    for (std::size_t i = 0; i < p.size(); ++i)
      if (mask >> i & 1) d += p[i] - q[i];
    best = std::max(best, std::abs(d));
  }
  return best;
}

// Smallest error of any deterministic rule deciding between P (label 1) and
// Q (label 0) at equal priors.
double bayes_by_rules(std::span<const double> p, std::span<const double> q) {
  double best = 1;
  for (std::size_t mask = 0; mask < (std::size_t{1} << p.size()); ++mask) {
    double err = 0;
    for (std::size_t i = 0; i < p.size(); ++i) err += 0.5 * ((mask >> i & 1) ? q[i] : p[i]);
    best = std::min(best, err);
  }
  return best;
}

DiscreteJoint x_equals_y(std::size_t k) {
  const JointSizes s{k, k, 2};
  std::vector<double> pmf(s.cells(), 0.0);
  DiscreteJoint shape(s, std::vector<double>(s.cells(), 1.0 / static_cast<double>(s.cells())));
  for (std::size_t v = 0; v < k; ++v)
    for (std::size_t z = 0; z < 2; ++z) pmf[shape.index(v, v, z)] = 1.0 / static_cast<double>(2 * k);
  return DiscreteJoint(s, pmf);
}

}  // namespace

TEST(TvDistance, Examples) {
  const DiscreteDist p({0.5, 0.5}), q({1.0, 0.0});
  EXPECT_EQ(tv_distance(p, p), 0.0);
  EXPECT_EQ(tv_distance(p, q), 0.5);
  EXPECT_THROW(tv_distance(p, DiscreteDist({1.0 / 3, 1.0 / 3, 1.0 / 3})), Error);
}

TEST(TvDistance, MatchesOverlapAndEventDefinitions) {
  Rng rng(1);
  for (int t = 0; t < 500; ++t) {
    const std::size_t k = 2 + rng() % 7;
    const auto p = random_pmf(k, rng), q = random_pmf(k, rng);
    const double tv = tv_distance(p, q);
    EXPECT_NEAR(tv, tv_from_overlap(p, q), 1e-15);
    EXPECT_NEAR(tv, tv_by_events(p, q), 1e-15);
    EXPECT_GE(tv, 0.0);
    EXPECT_LE(tv, 1.0);
  }
}

TEST(TvDistance, MetricAxioms) {
  Rng rng(2);
  for (int t = 0; t < 300; ++t) {
    const std::size_t k = 2 + rng() % 5;
    const auto p = random_pmf(k, rng), q = random_pmf(k, rng), r = random_pmf(k, rng);
    EXPECT_EQ(tv_distance(p, q), tv_distance(q, p));
    EXPECT_LE(tv_distance(p, r), tv_distance(p, q) + tv_distance(q, r) + 1e-12);
  }
}

TEST(BayesError, Examples) {
  const DiscreteDist p({0.2, 0.8});
  EXPECT_EQ(bayes_error(p, p), 0.5);
  EXPECT_EQ(bayes_error(DiscreteDist({1.0, 0.0}), DiscreteDist({0.0, 1.0})), 0.0);
}

TEST(BayesError, DualityWithTv) {
  Rng rng(3);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = 2 + rng() % 6;
    const auto p = random_pmf(k, rng), q = random_pmf(k, rng);
    EXPECT_NEAR(bayes_error(p, q) + 0.5 * tv_distance(p, q), 0.5, 1e-14);
    EXPECT_NEAR(bayes_error(p, q), bayes_by_rules(p, q), 1e-15);
  }
}

TEST(Epsilon, CiJointGivesOne) {
  const auto j = gen_discrete_joint({3, 3, 2}, true, 4);
  const auto t = epsilon_table(j);
  for (const auto& v : t.values) {
    ASSERT_TRUE(v.has_value());
    EXPECT_NEAR(*v, 1.0, 1e-12);
  }
}

TEST(Epsilon, DeterministicBinaryMatchesCouplingEnumeration) {
  // X = Y = Z, each uniform binary.
  const JointSizes s{2, 2, 2};
  std::vector<double> pmf(8, 0.0);
  pmf[0] = 0.5;  // (0,0,0)
  pmf[7] = 0.5;  // (1,1,1)
  const DiscreteJoint j(s, pmf);
  const auto t = epsilon_table(j);
  EXPECT_FALSE(t(0, 1).has_value());
  EXPECT_FALSE(t(1, 0).has_value());
  for (std::size_t v = 0; v < 2; ++v) {
    const double brute = max_coupling_mass_exhaustive(x_given_z(j, v), x_given_yz(j, v, v));
    EXPECT_NEAR(*t(v, v), brute, 1e-12);
    EXPECT_NEAR(*t(v, v), 1.0, 1e-12);
  }
  EXPECT_THROW(epsilon(j, 0, 1), Error);
}

TEST(Epsilon, ClosedFormMatchesCouplingEnumeration) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const JointSizes s{2 + seed % 3, 2, 2};
    const auto j = gen_discrete_joint(s, false, seed);
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t z = 0; z < 2; ++z) {
        const double e = epsilon(j, y, z);
        EXPECT_GE(e, 0.0);
        EXPECT_LE(e, 1.0);
        EXPECT_NEAR(e, max_coupling_mass_exhaustive(x_given_z(j, z), x_given_yz(j, y, z)), 1e-12);
      }
  }
}

TEST(CiProjection, IdempotentOnCiJoints) {
  const auto j = gen_discrete_joint({3, 2, 4}, true, 7);
  const auto p = ci_projection(j);
  for (std::size_t i = 0; i < j.pmf().size(); ++i) EXPECT_NEAR(p.pmf()[i], j.pmf()[i], 1e-14);
}

TEST(CiProjection, PreservesPairMarginals) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto j = gen_discrete_joint({3, 4, 3}, false, seed);
    const auto p = ci_projection(j);
    const auto a = j.marginal_yz(), b = p.marginal_yz();
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-14);
    const auto c = j.marginal_xz(), d = p.marginal_xz();
    for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], d[i], 1e-14);
    EXPECT_TRUE(is_ci(p, 1e-12));
  }
}

TEST(CiProjection, FullyDependentJoint) {
  const auto j = x_equals_y(3);
  const auto p = ci_projection(j);
  EXPECT_TRUE(is_ci(p, 1e-12));
  // Within each z, X = Y uniform on 3 values: projection is uniform on 9 cells,
  // so TV = 1 - 3 * (1/9) = 2/3.
  EXPECT_NEAR(tv_distance(j, p), 2.0 / 3.0, 1e-14);
}

TEST(IsCi, ToleranceOneAlwaysTrue) {
  EXPECT_TRUE(is_ci(x_equals_y(2), 1.0));
  EXPECT_THROW(is_ci(x_equals_y(2), 0.0), Error);
}

TEST(Theorem2, CiJointHasZeroGap) {
  Rng rng(5);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto j = gen_discrete_joint({3, 3, 3}, true, seed);
    ConditionalPmf q{3, 3, {}};
    for (std::size_t z = 0; z < 3; ++z) {
      const auto row = random_pmf(3, rng);
      q.values.insert(q.values.end(), row.begin(), row.end());
    }
    const auto r = theorem2_check(j, q);
    EXPECT_NEAR(r.gap_lhs, 0.0, 1e-12);
    EXPECT_TRUE(r.holds());
  }
}

TEST(Theorem2, DependentJointHasPositiveGap) {
  const auto j = x_equals_y(2);
  const auto r = theorem2_check(j, ConditionalPmf::uniform(2, 2));
  EXPECT_GT(r.gap_lhs, 1e-9);
  EXPECT_TRUE(r.holds());
}

TEST(Theorem2, TrueConditionalAttainsTvToProjection) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto j = gen_discrete_joint({3, 2, 3}, false, seed);
    const auto r = theorem2_check(j, conditional_y_given_z(j));
    EXPECT_NEAR(r.tv_yz, 0.0, 1e-14);
    EXPECT_NEAR(r.gap_lhs, tv_distance(j, ci_projection(j)), 1e-12);
  }
}

TEST(Theorem2, BoundHoldsAtTrueConditional) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto j = gen_discrete_joint({2 + seed % 3, 2 + seed / 3 % 3, 2 + seed / 9 % 3}, false, seed);
    const auto r = theorem2_check(j, conditional_y_given_z(j));
    EXPECT_GE(r.slack(), -1e-12) << "seed " << seed;
  }
}

TEST(Theorem2, GapCanVanishUnderDependenceWithFullSupportMimic) {
  // Within every z, p(x,y,z) - p(x,z)/2 has the sign of p(y,z) - p(z)/2 for
  // each x, so the x-aware classifier gains nothing over the y,z one.
  const auto j = gen_discrete_joint({2, 2, 3}, false, 192);
  ASSERT_FALSE(is_ci(j, 1e-9));
  const auto r = theorem2_check(j, ConditionalPmf::uniform(2, 3));
  EXPECT_NEAR(r.gap_lhs, 0.0, 1e-12);
  EXPECT_GT(r.tv_full, 0.3);
  EXPECT_GT(r.bound_rhs, 0.08);
  EXPECT_FALSE(r.holds());
}

TEST(Theorem2, RejectsInvalidConditional) {
  const auto j = x_equals_y(2);
  ConditionalPmf q{2, 2, {0.5, 0.6, 0.5, 0.5}};
  try {
    theorem2_check(j, q);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::invalid_conditional);
  }
}

TEST(Corollary2, CiJointBothSidesZero) {
  const auto r = corollary2_check(gen_discrete_joint({2, 3, 2}, true, 1));
  EXPECT_NEAR(r.lhs, 0.0, 1e-12);
  EXPECT_NEAR(r.rhs, 0.0, 1e-12);
}

TEST(Corollary2, HoldsWhenUniformMimicIsTheTrueConditional) {
  for (std::size_t k = 2; k <= 4; ++k) {
    const auto r = corollary2_check(x_equals_y(k));
    EXPECT_TRUE(r.holds());
    EXPECT_GT(r.lhs, 1e-9);
  }
}

TEST(Corollary2, BoundFailsOnSomeDependentJoints) {
  // Frozen counterexample: generic (2,2,3) joint, seed 192. The uniform
  // mimic leaves the gap at zero while the claimed lower bound is positive.
  const auto r = corollary2_check(gen_discrete_joint({2, 2, 3}, false, 192));
  EXPECT_NEAR(r.lhs, 0.0, 1e-12);
  EXPECT_GT(r.rhs, 0.05);
  EXPECT_FALSE(r.holds());
}

TEST(Corollary2, UniformConditionalHasUnitFactor) {
  // X = Y within each z means p(y|z) is uniform, so a |Y| = 1.
  const auto j = x_equals_y(3);
  const auto r = corollary2_check(j);
  EXPECT_NEAR(r.a * 3, 1.0, 1e-15);
  EXPECT_NEAR(r.rhs, tv_distance(ci_projection(j), j), 1e-15);
}
