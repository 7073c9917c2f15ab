#include <gtest/gtest.h>

#include "ciforge/verify.hpp"

using namespace ciforge::oracle;

namespace {

const VerifyReport& report() {
  static const VerifyReport r = run_verification({});
  return r;
}

}  // namespace

TEST(Verify, ExactIdentitiesPass) {
  for (const char* name :
       {"corollary0_tv_equals_one_minus_overlap", "lemma2_bayes_error_identity", "tv_symmetry",
        "tv_triangle_inequality", "theorem2_gap_nonnegative", "epsilon_in_unit_interval",
        "lemma3_coupling_mass_matches_exhaustive", "corollary1_true_conditional_maximizes_gap",
        "corollary1_maximum_equals_tv_to_projection", "theorem4_ci_implies_zero_gap"}) {
    const auto& c = report().find(name);
    EXPECT_TRUE(c.passed()) << name << " worst slack " << c.worst_slack;
    EXPECT_EQ(c.violations, 0u) << name;
    EXPECT_GT(c.cases, 0u) << name;
  }
}

TEST(Verify, LowerBoundsFailAwayFromTrueConditional) {
  // The error-gap lower bound, the uniform-mimic bound and the
  // dependence-implies-positive-gap direction all have counterexamples among
  // random joints once q differs from p(y|z); see the oracle tests for a
  // frozen instance.
  for (const char* name : {"theorem2_lower_bound", "corollary2_uniform_mimic_bound",
                           "theorem3_dependence_implies_positive_gap", "theorem1_biconditional",
                           "theorem5_partial_support_biconditional"}) {
    const auto& c = report().find(name);
    EXPECT_FALSE(c.passed()) << name;
    EXPECT_GT(c.violations, 0u) << name;
    EXPECT_LT(c.violations, c.cases) << name;
  }
}

TEST(Verify, StatusAgreesWithSlack) {
  for (const auto& c : report().checks) {
    EXPECT_EQ(c.passed(), c.worst_slack >= -c.tolerance) << c.name;
    EXPECT_EQ(c.passed(), c.violations == 0) << c.name;
  }
  EXPECT_EQ(report().checks.size(), 15u);
  EXPECT_FALSE(report().all_passed());
}

TEST(Verify, CaseCounts) {
  EXPECT_EQ(report().find("lemma2_bayes_error_identity").cases, 1500u);
  EXPECT_EQ(report().find("corollary2_uniform_mimic_bound").cases, 500u);
  EXPECT_EQ(report().find("theorem4_ci_implies_zero_gap").cases, 100u);
  EXPECT_EQ(report().find("theorem1_biconditional").cases, 200u);
}

TEST(Verify, DeterministicJsonWithoutTiming) {
  VerifyConfig cfg;
  cfg.instances = 40;
  cfg.biconditional = 10;
  cfg.seed = 3;
  EXPECT_EQ(to_json(run_verification(cfg), false).dump(), to_json(run_verification(cfg), false).dump());
  EXPECT_FALSE(to_json(run_verification(cfg), false).contains("wall_clock_s"));
}

TEST(Verify, UnknownCheckName) { EXPECT_THROW(report().find("no_such_check"), ciforge::Error); }
