#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "ciforge/core.hpp"

using namespace ciforge;

namespace {

Dataset small_dataset(std::size_t n, std::size_t nx = 1, std::size_t nz = 5) {
  std::vector<Column> xs, zs;
  for (std::size_t k = 0; k < nx; ++k) xs.push_back(Column::continuous("x_" + std::to_string(k)));
  for (std::size_t k = 0; k < nz; ++k) zs.push_back(Column::continuous("z_" + std::to_string(k)));
  const std::size_t w = nx + 1 + nz;
  std::vector<double> data(n * w);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<double>(i % 17) * 0.25 - 2.0;
  return Dataset(xs, {Column::continuous("y_0")}, zs, data);
}

LabeledDataset labeled(std::size_t n, std::size_t nx = 1) {
  const Dataset d = small_dataset(n, nx);
  const std::size_t half = n / 2;
  std::vector<std::size_t> a(half), b(n - half);
  std::iota(a.begin(), a.end(), std::size_t{0});
  std::iota(b.begin(), b.end(), half);
  return label_union(d.select_rows(a), d.select_rows(b));
}

void expect_partition(const SplitPlan& p, std::size_t n) {
  std::set<std::size_t> all;
  for (const auto* part : {&p.d1, &p.d2, &p.d3}) all.insert(part->begin(), part->end());
  EXPECT_EQ(all.size(), n);
  EXPECT_EQ(p.d1.size() + p.d2.size() + p.d3.size(), n);
  if (!all.empty()) {
    EXPECT_EQ(*all.rbegin(), n - 1);
  }
}

}  // namespace

TEST(SplitThreeWay, NineRowsGiveThreeEqualDisjointSets) {
  const auto p = split_three_way(9, 1);
  EXPECT_EQ(p.d1.size(), 3u);
  EXPECT_EQ(p.d2.size(), 3u);
  EXPECT_EQ(p.d3.size(), 3u);
  expect_partition(p, 9);
}

TEST(SplitThreeWay, RemainderGoesToFirstSet) {
  const auto p = split_three_way(10, 1);
  EXPECT_EQ(p.d1.size(), 4u);
  EXPECT_EQ(p.d2.size(), 3u);
  EXPECT_EQ(p.d3.size(), 3u);
  const auto q = split_three_way(11, 1);
  EXPECT_EQ(q.d1.size(), 4u);
  EXPECT_EQ(q.d2.size(), 4u);
  EXPECT_EQ(q.d3.size(), 3u);
}

TEST(SplitThreeWay, DeterministicForSeedAndSize) {
  const auto a = split_three_way(600, 7);
  const auto b = split_three_way(600, 7);
  EXPECT_EQ(a.d1, b.d1);
  EXPECT_EQ(a.d2, b.d2);
  EXPECT_EQ(a.d3, b.d3);
  EXPECT_NE(a.d1, split_three_way(600, 8).d1);
}

TEST(SplitThreeWay, RejectsFewerThanNineRows) {
  try {
    split_three_way(8, 1);
    FAIL() << "expected too_few_rows";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::too_few_rows);
  }
}

TEST(SplitThreeWay, IsAPartitionForEverySize) {
  for (std::size_t n = 9; n <= 300; ++n) {
    const auto p = split_three_way(n, n * 31);
    expect_partition(p, n);
    const std::size_t base = n / 3;
    EXPECT_GE(p.d1.size(), base);
    EXPECT_LE(p.d1.size(), base + 1);
    EXPECT_GE(p.d1.size(), p.d2.size());
    EXPECT_GE(p.d2.size(), p.d3.size());
  }
}

TEST(StripX, DropsXAndKeepsLabels) {
  const auto l = labeled(40);
  ASSERT_EQ(l.base.n_x(), 1u);
  const auto s = strip_x(l);
  EXPECT_EQ(s.base.n_x(), 0u);
  EXPECT_EQ(s.base.n_y(), 1u);
  EXPECT_EQ(s.base.n_z(), 5u);
  EXPECT_EQ(s.labels, l.labels);
  EXPECT_EQ(s.n_rows(), l.n_rows());
  for (std::size_t i = 0; i < s.n_rows(); ++i)
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(s.base.at(i, j), l.base.at(i, j + 1));
}

TEST(StripX, IdentityWithoutX) {
  const auto l = strip_x(labeled(30));
  const auto again = strip_x(l);
  EXPECT_EQ(again.base, l.base);
  EXPECT_EQ(again.labels, l.labels);
}

TEST(StripX, CommutesWithRowSubsetting) {
  const auto l = labeled(50, 2);
  const std::vector<std::size_t> rows{0, 3, 7, 11, 25, 26, 49};
  const auto a = strip_x(l).select_rows(rows);
  const auto b = strip_x(l.select_rows(rows));
  EXPECT_EQ(a.base, b.base);
  EXPECT_EQ(a.labels, b.labels);
}

TEST(Dataset, RejectsInvalidCells) {
  auto expect_invalid = [](auto make) {
    try {
      make();
      FAIL() << "expected invalid_dataset";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::invalid_dataset);
    }
  };
  const auto x = Column::continuous("x_0");
  const auto y = Column::continuous("y_0");
  expect_invalid([&] { Dataset({x}, {y}, {Column::categorical("z_0", 3)}, {0.0, 0.0, 3.0}); });
  expect_invalid([&] { Dataset({x}, {y}, {Column::categorical("z_0", 3)}, {0.0, 0.0, 1.5}); });
  expect_invalid([&] { Dataset({x}, {y}, {}, {std::numeric_limits<double>::quiet_NaN(), 0.0}); });
  expect_invalid([&] { Dataset({x}, {y}, {}, {std::numeric_limits<double>::infinity(), 0.0}); });
  expect_invalid([&] { Dataset({x}, {}, {}, {0.0}); });
  expect_invalid([&] { Dataset({x}, {Column::continuous("x_0")}, {}, {0.0, 0.0}); });
  expect_invalid([&] { Dataset({x}, {y}, {}, {0.0, 0.0, 1.0}); });
}

TEST(Dataset, CategoricalCodesAccepted) {
  const Dataset d({Column::categorical("x_0", 2)}, {Column::categorical("y_0", 3)}, {},
                  {0, 2, 1, 0, 1, 1});
  EXPECT_EQ(d.n_rows(), 3u);
  EXPECT_EQ(d.at(0, Role::y, 0), 2.0);
}

TEST(Dataset, WithYReplacesOnlyY) {
  const auto d = small_dataset(5);
  std::vector<double> y{1, 2, 3, 4, 5};
  const auto e = d.with_y(d.y_cols(), y);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(e.at(i, Role::y, 0), y[i]);
    EXPECT_EQ(e.at(i, Role::x, 0), d.at(i, Role::x, 0));
    for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(e.at(i, Role::z, k), d.at(i, Role::z, k));
  }
}

TEST(LabelUnion, JointRowsFirstWithProvenance) {
  const auto l = labeled(21);
  l.validate();
  EXPECT_EQ(l.count(1), 10u);
  EXPECT_EQ(l.count(0), 11u);
  for (std::size_t i = 0; i < l.n_rows(); ++i) {
    EXPECT_EQ(l.labels[i], i < 10 ? 1 : 0);
    EXPECT_EQ(l.source[i], i < 10 ? i : i - 10);
  }
}

TEST(StratifiedSplit, EveryPartHasBothClasses) {
  for (std::size_t n : {12u, 13u, 40u, 333u}) {
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i % 3 == 0 ? 1 : 0;
    const auto s = stratified_split(labels, {}, n);
    std::set<std::size_t> all;
    for (const auto* part : {&s.train, &s.validation, &s.test}) {
      bool has0 = false, has1 = false;
      for (auto r : *part) (labels[r] ? has1 : has0) = true;
      EXPECT_TRUE(has0 && has1) << "n=" << n;
      EXPECT_TRUE(std::is_sorted(part->begin(), part->end()));
      all.insert(part->begin(), part->end());
    }
    EXPECT_EQ(all.size(), n);
    EXPECT_EQ(s.train.size() + s.validation.size() + s.test.size(), n);
  }
}

TEST(StratifiedSplit, DefaultFractionsPerClass) {
  std::vector<int> labels(400);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 2);
  const auto s = stratified_split(labels, {}, 3);
  EXPECT_EQ(s.train.size(), 200u);
  EXPECT_EQ(s.validation.size(), 100u);
  EXPECT_EQ(s.test.size(), 100u);
}

TEST(StratifiedSplit, NeedsThreeRowsPerClass) {
  std::vector<int> labels{1, 1, 0, 0, 0, 0};
  try {
    stratified_split(labels, {}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::single_class);
  }
}

TEST(Seeds, StreamsAreIndependent) {
  std::set<std::uint64_t> seen;
  for (auto s : {Stream::split, Stream::mimic_fit, Stream::mimic_noise, Stream::tvs, Stream::classifier_f1,
                 Stream::classifier_f2, Stream::datagen, Stream::benchmark, Stream::relations, Stream::oracle,
                 Stream::nn})
    for (std::uint64_t i = 0; i < 4; ++i) seen.insert(derive_seed(42, s, i));
  EXPECT_EQ(seen.size(), 44u);
  EXPECT_EQ(derive_seed(42, Stream::split, 3), derive_seed(42, Stream::split, 3));
}
