#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ciforge/datagen.hpp"
#include "ciforge/gbt.hpp"

using namespace ciforge;
using namespace ciforge::gbt;

namespace {

struct Problem {
  Matrix x;
  std::vector<double> y;
};

Problem random_problem(std::size_t n, std::size_t d, std::uint64_t seed, bool signal) {
  Rng rng(seed);
  Problem p{{{}, d}, {}};
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const double v = standard_normal(rng);
      p.x.values.push_back(v);
      s += (j % 2 ? -1.0 : 1.0) * v * (j + 1);
    }
    const double u = uniform_open01(rng);
    p.y.push_back(signal ? (nn::sigmoid(s) > u ? 1.0 : 0.0) : (u < 0.5 ? 1.0 : 0.0));
  }
  return p;
}

}  // namespace

TEST(Gbt, TrainingLossNonIncreasingEveryRound) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto p = random_problem(300, 4, seed, seed % 2 == 0);
    GbtConfig cfg;
    cfg.rounds = 60;
    cfg.max_depth = 2 + seed % 4;
    cfg.learning_rate = seed % 3 ? 0.3 : 1.0;
    const auto m = gbt_fit(p.x, p.y, cfg);
    ASSERT_EQ(m.train_loss.size(), 61u);
    for (std::size_t r = 1; r < m.train_loss.size(); ++r) EXPECT_LE(m.train_loss[r], m.train_loss[r - 1]);
  }
}

TEST(Gbt, TreesRespectMaxDepthAndFiniteLeaves) {
  const auto p = random_problem(400, 3, 1, true);
  for (std::size_t depth : {1u, 3u, 5u}) {
    GbtConfig cfg;
    cfg.rounds = 20;
    cfg.max_depth = depth;
    const auto m = gbt_fit(p.x, p.y, cfg);
    EXPECT_LE(m.best_round, m.rounds);
    for (const auto& t : m.trees) {
      EXPECT_LE(t.depth(), depth);
      for (const auto& n : t.nodes)
        if (n.is_leaf()) {
          EXPECT_TRUE(std::isfinite(n.value));
        }
    }
  }
}

TEST(Gbt, BestRoundMinimizesValidationLoss) {
  const auto p = random_problem(400, 3, 2, true);
  const auto v = random_problem(200, 3, 3, true);
  GbtConfig cfg;
  cfg.rounds = 40;
  const auto m = gbt_fit(p.x, p.y, cfg, std::make_pair(&v.x, std::span<const double>(v.y)));
  ASSERT_EQ(m.validation_loss.size(), 41u);
  const auto it = std::min_element(m.validation_loss.begin(), m.validation_loss.end());
  EXPECT_EQ(m.best_round, static_cast<std::size_t>(it - m.validation_loss.begin()));
}

TEST(Gbt, SquaredObjectiveFitsStep) {
  Problem p{{{}, 1}, {}};
  for (int i = 0; i < 100; ++i) {
    p.x.values.push_back(i);
    p.y.push_back(i < 50 ? -1.0 : 3.0);
  }
  GbtConfig cfg;
  cfg.rounds = 50;
  cfg.max_depth = 1;
  cfg.lambda = 0;
  cfg.learning_rate = 0.5;
  cfg.objective = Objective::squared;
  const auto m = gbt_fit(p.x, p.y, cfg);
  EXPECT_NEAR(m.predict(std::vector<double>{10}), -1.0, 1e-6);
  EXPECT_NEAR(m.predict(std::vector<double>{90}), 3.0, 1e-6);
  EXPECT_EQ(m.trees[0].nodes[0].threshold, 49.5);
}

TEST(Gbt, Deterministic) {
  const auto p = random_problem(300, 3, 4, true);
  const auto a = gbt_fit(p.x, p.y, {}), b = gbt_fit(p.x, p.y, {});
  ASSERT_EQ(a.trees.size(), b.trees.size());
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    ASSERT_EQ(a.trees[t].nodes.size(), b.trees[t].nodes.size());
    for (std::size_t k = 0; k < a.trees[t].nodes.size(); ++k) {
      EXPECT_EQ(a.trees[t].nodes[k].feature, b.trees[t].nodes[k].feature);
      EXPECT_EQ(a.trees[t].nodes[k].threshold, b.trees[t].nodes[k].threshold);
      EXPECT_EQ(a.trees[t].nodes[k].value, b.trees[t].nodes[k].value);
    }
  }
}

TEST(Gbt, RowPermutationGivesSameTrees) {
  const auto p = random_problem(250, 3, 5, true);
  std::vector<std::size_t> perm(250);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(9);
  shuffle_in_place(perm, rng);
  Problem q{{{}, 3}, {}};
  for (auto r : perm) {
    const auto row = p.x.row(r);
    q.x.values.insert(q.x.values.end(), row.begin(), row.end());
    q.y.push_back(p.y[r]);
  }
  GbtConfig cfg;
  cfg.rounds = 30;
  const auto a = gbt_fit(p.x, p.y, cfg), b = gbt_fit(q.x, q.y, cfg);
  ASSERT_EQ(a.trees.size(), b.trees.size());
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    ASSERT_EQ(a.trees[t].nodes.size(), b.trees[t].nodes.size());
    for (std::size_t k = 0; k < a.trees[t].nodes.size(); ++k) {
      EXPECT_EQ(a.trees[t].nodes[k].feature, b.trees[t].nodes[k].feature);
      EXPECT_EQ(a.trees[t].nodes[k].threshold, b.trees[t].nodes[k].threshold);
      EXPECT_NEAR(a.trees[t].nodes[k].value, b.trees[t].nodes[k].value, 1e-12);
    }
  }
}

TEST(Gbt, ShiftOfUnusedFeatureLeavesPredictionsUnchanged) {
  auto p = random_problem(300, 2, 6, true);
  // Append a constant feature: it can never be split on.
  Problem q{{{}, 3}, p.y};
  for (std::size_t i = 0; i < 300; ++i) {
    q.x.values.push_back(p.x.at(i, 0));
    q.x.values.push_back(p.x.at(i, 1));
    q.x.values.push_back(1.0);
  }
  const auto m = gbt_fit(q.x, q.y, {});
  for (const auto& t : m.trees) ASSERT_FALSE(t.uses_feature(2));
  for (std::size_t i = 0; i < 300; ++i) {
    std::vector<double> row(q.x.row(i).begin(), q.x.row(i).end());
    const double before = m.predict(row);
    row[2] += 1234.5;
    EXPECT_EQ(m.predict(row), before);
  }
}

TEST(Gbt, RejectsBadInput) {
  Matrix empty{{}, 2};
  try {
    gbt_fit(empty, std::vector<double>{}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_data);
  }
  GbtConfig cfg;
  cfg.max_depth = 0;
  Matrix x{{1, 2}, 1};
  EXPECT_THROW(gbt_fit(x, std::vector<double>{0, 1}, cfg), Error);
}
