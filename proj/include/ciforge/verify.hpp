#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "ciforge/datagen.hpp"
#include "ciforge/oracle.hpp"

// Property battery over random discrete joints. Each check tracks a slack
// whose sign convention is uniform: the check passes when
// worst_slack >= -tolerance.

namespace ciforge::oracle {

struct CheckResult {
  std::string name;
  double tolerance = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  std::size_t cases = 0;
  std::size_t violations = 0;  // cases with slack below -tolerance

  bool passed() const { return cases > 0 && worst_slack >= -tolerance; }

  void record(double slack) {
    ++cases;
    if (!(slack >= -tolerance)) ++violations;
    if (!(slack >= worst_slack)) worst_slack = slack;  // NaN sticks
  }
};

struct VerifyConfig {
  std::size_t instances = 500;       // random joints for the inequality battery
  std::size_t biconditional = 100;   // CI and generic joints each
  std::size_t max_alphabet = 4;
  std::uint64_t seed = 0;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  double seconds = 0;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed(); });
  }
  const CheckResult& find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return c;
    throw Error(ErrorCode::invalid_argument, "no check named " + name);
  }
};

namespace detail {

inline JointSizes random_sizes(Rng& rng, std::size_t max_alphabet) {
  const std::size_t span = max_alphabet - 1;
  return {2 + rng() % span, 2 + rng() % span, 2 + rng() % span};
}

inline ConditionalPmf random_conditional(std::size_t ny, std::size_t nz, Rng& rng) {
  ConditionalPmf q{ny, nz, {}};
  for (std::size_t z = 0; z < nz; ++z) {
    auto row = dirichlet_uniform(ny, rng);
    q.values.insert(q.values.end(), row.begin(), row.end());
  }
  return q;
}

/// Mixture (1-w) a + w b of two conditionals.
inline ConditionalPmf mix(const ConditionalPmf& a, const ConditionalPmf& b, double w) {
  ConditionalPmf out = a;
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = (1 - w) * a.values[i] + w * b.values[i];
  return out;
}

/// Zeroes one (y,z) column of the cube for a random subset of z values and
/// renormalizes, producing joints whose (y,z) marginal has holes.
inline DiscreteJoint punch_yz_holes(const DiscreteJoint& j, Rng& rng) {
  const auto& s = j.sizes();
  auto pmf = j.pmf();
  for (std::size_t z = 0; z < s.z; ++z) {
    if (rng() % 2 == 0) continue;
    const std::size_t y = rng() % s.y;
    for (std::size_t x = 0; x < s.x; ++x) pmf[j.index(x, y, z)] = 0;
  }
  double sum = std::accumulate(pmf.begin(), pmf.end(), 0.0);
  for (auto& v : pmf) v /= sum;
  return DiscreteJoint(s, std::move(pmf));
}

/// Random conditional positive exactly where p(y,z) > 0.
inline ConditionalPmf support_matched_conditional(const DiscreteJoint& j, Rng& rng) {
  const auto& s = j.sizes();
  const auto pyz = j.marginal_yz();
  auto q = random_conditional(s.y, s.z, rng);
  for (std::size_t z = 0; z < s.z; ++z) {
    double sum = 0;
    for (std::size_t y = 0; y < s.y; ++y) {
      if (pyz[y * s.z + z] <= 0) q.at(y, z) = 0;
      sum += q(y, z);
    }
    if (sum > 0)
      for (std::size_t y = 0; y < s.y; ++y) q.at(y, z) /= sum;
    else
      for (std::size_t y = 0; y < s.y; ++y) q.at(y, z) = 1.0 / static_cast<double>(s.y);
  }
  return q;
}

}  // namespace detail

inline VerifyReport run_verification(const VerifyConfig& cfg = {}) {
  if (cfg.max_alphabet < 2 || cfg.max_alphabet > 6)
    throw Error(ErrorCode::size_out_of_range, "max_alphabet must lie in [2, 6]");
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng = make_rng(cfg.seed, Stream::oracle, 0xbeef);

  CheckResult overlap{"corollary0_tv_equals_one_minus_overlap", 1e-14};
  CheckResult lemma2{"lemma2_bayes_error_identity", 1e-14};
  CheckResult symmetry{"tv_symmetry", 0.0};
  CheckResult triangle{"tv_triangle_inequality", 1e-12};
  CheckResult thm2{"theorem2_lower_bound", 1e-12};
  CheckResult gap_nonneg{"theorem2_gap_nonnegative", 1e-12};
  CheckResult eps_range{"epsilon_in_unit_interval", 1e-14};
  CheckResult lemma3{"lemma3_coupling_mass_matches_exhaustive", 1e-12};
  CheckResult cor1_max{"corollary1_true_conditional_maximizes_gap", 1e-9};
  CheckResult cor1_val{"corollary1_maximum_equals_tv_to_projection", 1e-12};
  CheckResult cor2{"corollary2_uniform_mimic_bound", 1e-12};
  CheckResult thm4{"theorem4_ci_implies_zero_gap", 1e-12};
  CheckResult thm3{"theorem3_dependence_implies_positive_gap", 0.0};
  CheckResult thm1{"theorem1_biconditional", 0.0};
  CheckResult thm5{"theorem5_partial_support_biconditional", 0.0};

  auto pair_checks = [&](std::span<const double> p, std::span<const double> q, std::span<const double> r) {
    const double tv = tv_distance(p, q);
    overlap.record(-std::abs(tv - tv_from_overlap(p, q)));
    lemma2.record(-std::abs(bayes_error(p, q) - (0.5 - 0.5 * tv)));
    symmetry.record(-std::abs(tv - tv_distance(q, p)));
    triangle.record(tv_distance(p, q) + tv_distance(q, r) - tv_distance(p, r));
  };

  auto gap_checks = [&](const DiscreteJoint& j, const ConditionalPmf& q) {
    const auto rep = theorem2_check(j, q);
    thm2.record(rep.slack());
    gap_nonneg.record(rep.gap_lhs);
    for (const auto& e : rep.epsilon_table.values)
      if (e) eps_range.record(std::min(*e, 1.0 - *e));
    const auto m = mimic_pmf(j, q);
    pair_checks(j.pmf(), m, ci_projection(j).pmf());
    return rep;
  };

  // Inequality battery: three mimic choices per joint.
  for (std::size_t i = 0; i < cfg.instances; ++i) {
    const auto sizes = detail::random_sizes(rng, cfg.max_alphabet);
    const bool ci = rng() % 4 == 0;
    const auto j = gen_discrete_joint(sizes, ci, rng());
    const auto truth = conditional_y_given_z(j);
    const auto unif = ConditionalPmf::uniform(sizes.y, sizes.z);
    const auto rand = detail::random_conditional(sizes.y, sizes.z, rng);

    const auto at_truth = gap_checks(j, truth);
    gap_checks(j, unif);
    gap_checks(j, rand);

    // Corollary 1: the true conditional attains the largest gap over a grid
    // that contains it, and that gap is the distance to the CI projection.
    const double tv_proj = tv_distance(j, ci_projection(j));
    cor1_val.record(-std::abs(at_truth.gap_lhs - tv_proj));
    double grid_max = -std::numeric_limits<double>::infinity();
    for (double w : {0.0, 0.1, 0.25, 0.5, 0.75, 1.0}) {
      grid_max = std::max(grid_max, theorem2_check(j, detail::mix(truth, unif, w)).gap_lhs);
      grid_max = std::max(grid_max, theorem2_check(j, detail::mix(truth, rand, w)).gap_lhs);
    }
    cor1_max.record(at_truth.gap_lhs - grid_max);

    const auto c2 = corollary2_check(j);
    cor2.record(c2.lhs - c2.rhs);

    if (sizes.x <= 3) {
      const auto& s = j.sizes();
      const auto pyz = j.marginal_yz();
      for (std::size_t y = 0; y < s.y; ++y)
        for (std::size_t z = 0; z < s.z; ++z) {
          if (pyz[y * s.z + z] <= 0) continue;
          const double lp = max_coupling_mass_exhaustive(x_given_z(j, z), x_given_yz(j, y, z));
          lemma3.record(-std::abs(lp - epsilon(j, y, z)));
        }
    }
  }

  // Biconditional at the oracle level with full-support mimics.
  auto biconditional = [](const DiscreteJoint& j, double gap) {
    return (gap <= 1e-12) == is_ci(j, 1e-9) ? 0.0 : -1.0;
  };
  for (std::size_t i = 0; i < cfg.biconditional; ++i) {
    const auto sizes = detail::random_sizes(rng, cfg.max_alphabet);
    const auto q = detail::random_conditional(sizes.y, sizes.z, rng);
    const auto ci_joint = gen_discrete_joint(sizes, true, rng());
    const double g0 = theorem2_check(ci_joint, q).gap_lhs;
    thm4.record(-g0);
    thm1.record(biconditional(ci_joint, g0));

    const auto dep_joint = gen_discrete_joint(sizes, false, rng());
    const double g1 = theorem2_check(dep_joint, q).gap_lhs;
    thm3.record(g1 - 1e-6);
    thm1.record(biconditional(dep_joint, g1));

    // Holes in the (y,z) support, mimic positive exactly on that support.
    for (bool ci : {true, false}) {
      const auto holed = detail::punch_yz_holes(gen_discrete_joint(sizes, ci, rng()), rng);
      const auto qs = detail::support_matched_conditional(holed, rng);
      const auto rep = theorem2_check(holed, qs);
      thm5.record(biconditional(holed, rep.gap_lhs));
      thm2.record(rep.slack());
    }
  }

  VerifyReport report;
  report.checks = {overlap, lemma2, symmetry, triangle, thm2, gap_nonneg, eps_range, lemma3,
                   cor1_max, cor1_val, cor2, thm4, thm3, thm1, thm5};
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

inline nlohmann::json to_json(const VerifyReport& r, bool include_timing = true) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name},
                      {"status", c.passed() ? "pass" : "fail"},
                      {"worst_slack", c.worst_slack},
                      {"tolerance", c.tolerance},
                      {"cases", c.cases},
                      {"violations", c.violations}});
  }
  nlohmann::json j{{"passed", r.all_passed()}, {"checks", checks}};
  if (include_timing) j["wall_clock_s"] = r.seconds;
  return j;
}

}  // namespace ciforge::oracle
