#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "ciforge/core.hpp"
#include "ciforge/nn.hpp"

// Second-order gradient boosting over axis-aligned regression trees. Splits
// are found by exact greedy search over midpoints between sorted distinct
// feature values, level by level.

namespace ciforge::gbt {

enum class Objective { logistic, squared };

struct GbtConfig {
  std::size_t rounds = 200;
  std::size_t max_depth = 4;
  double learning_rate = 0.1;
  double min_child_weight = 1.0;
  double lambda = 1.0;  // L2 penalty on leaf weights
  Objective objective = Objective::logistic;
  std::uint64_t seed = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;
  int left = -1, right = -1;
  double value = 0;
  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> row) const {
    int k = 0;
    while (!nodes[static_cast<std::size_t>(k)].is_leaf()) {
      const auto& n = nodes[static_cast<std::size_t>(k)];
      k = row[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(k)].value;
  }

  std::size_t depth() const { return depth_from(0); }

  bool uses_feature(int f) const {
    return std::any_of(nodes.begin(), nodes.end(), [f](const TreeNode& n) { return n.feature == f; });
  }

 private:
  std::size_t depth_from(int k) const {
    const auto& n = nodes[static_cast<std::size_t>(k)];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(n.left), depth_from(n.right));
  }
};

struct GbtModel {
  Objective objective = Objective::logistic;
  double base_score = 0;
  double learning_rate = 0.1;
  std::size_t rounds = 0;
  std::size_t max_depth = 0;
  std::size_t best_round = 0;  // number of trees used for prediction
  std::vector<Tree> trees;
  std::vector<double> train_loss;       // index r: loss after r trees
  std::vector<double> validation_loss;  // same indexing; empty without validation

  double margin(std::span<const double> row, std::optional<std::size_t> n_trees = std::nullopt) const {
    const std::size_t k = std::min(n_trees.value_or(best_round), trees.size());
    double m = base_score;
    for (std::size_t t = 0; t < k; ++t) m += trees[t].predict(row);
    return m;
  }

  /// P(label = 1) for the logistic objective, the regression value otherwise.
  double predict(std::span<const double> row) const {
    const double m = margin(row);
    return objective == Objective::logistic ? nn::sigmoid(m) : m;
  }
};

namespace detail {

inline double pointwise_loss(Objective obj, double margin, double y) {
  if (obj == Objective::logistic) return y > 0.5 ? nn::softplus(-margin) : nn::softplus(margin);
  return 0.5 * (margin - y) * (margin - y);
}

inline double mean_loss(Objective obj, std::span<const double> margins, std::span<const double> y) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += pointwise_loss(obj, margins[i], y[i]);
  return s / static_cast<double>(y.size());
}

struct Candidate {
  double gain = 0;
  int feature = -1;
  double threshold = 0;
};

// Grows one tree on (g, h); returns it with leaf weights -G/(H+lambda)
// (learning rate not yet applied) and the leaf index reached by each row.
inline Tree grow_tree(const Matrix& x, const std::vector<std::vector<std::uint32_t>>& sorted,
                      std::span<const double> g, std::span<const double> h, const GbtConfig& cfg,
                      std::vector<int>& leaf_of) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols;
  Tree tree;
  tree.nodes.push_back({});
  std::vector<int> node_of(n, 0);  // -1 once the row sits in a finished leaf
  std::vector<int> frontier{0};

  auto totals = [&](const std::vector<int>& nodes) {
    std::vector<double> G(tree.nodes.size(), 0.0), H(tree.nodes.size(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      if (node_of[r] < 0) continue;
      G[static_cast<std::size_t>(node_of[r])] += g[r];
      H[static_cast<std::size_t>(node_of[r])] += h[r];
    }
    (void)nodes;
    return std::pair{G, H};
  };

  for (std::size_t depth = 0; depth <= cfg.max_depth && !frontier.empty(); ++depth) {
    auto [G, H] = totals(frontier);
    for (int k : frontier) {
      const auto ku = static_cast<std::size_t>(k);
      tree.nodes[ku].value = -G[ku] / (H[ku] + cfg.lambda);
    }
    if (depth == cfg.max_depth) break;

    const std::size_t m = tree.nodes.size();
    std::vector<Candidate> best(m);
    std::vector<char> active(m, 0);
    for (int k : frontier) active[static_cast<std::size_t>(k)] = 1;
    std::vector<double> GL(m), HL(m), last(m);
    std::vector<char> seen(m);
    for (std::size_t f = 0; f < d; ++f) {
      std::fill(GL.begin(), GL.end(), 0.0);
      std::fill(HL.begin(), HL.end(), 0.0);
      std::fill(seen.begin(), seen.end(), 0);
      for (std::uint32_t r : sorted[f]) {
        const int k = node_of[r];
        if (k < 0 || !active[static_cast<std::size_t>(k)]) continue;
        const auto ku = static_cast<std::size_t>(k);
        const double v = x.at(r, f);
        if (seen[ku] && v != last[ku]) {
          const double hr = H[ku] - HL[ku];
          if (HL[ku] >= cfg.min_child_weight && hr >= cfg.min_child_weight) {
            const double gr = G[ku] - GL[ku];
            const double gain = 0.5 * (GL[ku] * GL[ku] / (HL[ku] + cfg.lambda) + gr * gr / (hr + cfg.lambda) -
                                       G[ku] * G[ku] / (H[ku] + cfg.lambda));
            if (gain > best[ku].gain) {
              double thr = last[ku] + 0.5 * (v - last[ku]);
              if (!(thr > last[ku])) thr = v;
              best[ku] = {gain, static_cast<int>(f), thr};
            }
          }
        }
        GL[ku] += g[r];
        HL[ku] += h[r];
        last[ku] = v;
        seen[ku] = 1;
      }
    }

    std::vector<int> next;
    for (int k : frontier) {
      const auto& c = best[static_cast<std::size_t>(k)];
      if (c.feature < 0 || !(c.gain > 1e-12)) continue;
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back({});
      tree.nodes.push_back({});
      auto& node = tree.nodes[static_cast<std::size_t>(k)];
      node.feature = c.feature;
      node.threshold = c.threshold;
      node.left = left;
      node.right = left + 1;
      next.push_back(left);
      next.push_back(left + 1);
    }
    for (std::size_t r = 0; r < n; ++r) {
      const int k = node_of[r];
      if (k < 0) continue;
      const auto& node = tree.nodes[static_cast<std::size_t>(k)];
      if (node.is_leaf()) {
        leaf_of[r] = k;
        node_of[r] = -1;
      } else {
        node_of[r] = x.at(r, static_cast<std::size_t>(node.feature)) < node.threshold ? node.left : node.right;
      }
    }
    frontier = std::move(next);
  }
  for (std::size_t r = 0; r < n; ++r)
    if (node_of[r] >= 0) leaf_of[r] = node_of[r];
  return tree;
}

}  // namespace detail

/// Boosts cfg.rounds trees. Each round's leaf weights are halved until the
/// training loss does not increase (a tree that cannot help is zeroed).
/// best_round is the tree count with the lowest validation loss, or the last
/// round when no validation data is given.
inline GbtModel gbt_fit(const Matrix& x, std::span<const double> y, const GbtConfig& cfg,
                        std::optional<std::pair<const Matrix*, std::span<const double>>> validation = std::nullopt) {
  const std::size_t n = x.rows();
  if (n == 0 || x.cols == 0) throw Error(ErrorCode::empty_data, "boosting needs rows and features");
  if (y.size() != n) throw Error(ErrorCode::invalid_argument, "label count does not match rows");
  if (cfg.max_depth < 1 || !(cfg.learning_rate > 0) || !(cfg.lambda >= 0))
    throw Error(ErrorCode::invalid_argument, "invalid boosting configuration");

  GbtModel model;
  model.objective = cfg.objective;
  model.learning_rate = cfg.learning_rate;
  model.rounds = cfg.rounds;
  model.max_depth = cfg.max_depth;

  const double mean_y = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  if (cfg.objective == Objective::logistic) {
    const double p = std::clamp(mean_y, 1e-6, 1 - 1e-6);
    model.base_score = std::log(p / (1 - p));
  } else {
    model.base_score = mean_y;
  }

  std::vector<std::vector<std::uint32_t>> sorted(x.cols);
  for (std::size_t f = 0; f < x.cols; ++f) {
    auto& s = sorted[f];
    s.resize(n);
    std::iota(s.begin(), s.end(), 0u);
    std::stable_sort(s.begin(), s.end(), [&](std::uint32_t a, std::uint32_t b) { return x.at(a, f) < x.at(b, f); });
  }

  std::vector<double> margins(n, model.base_score), trial(n), g(n), h(n);
  std::vector<int> leaf_of(n, 0);
  model.train_loss.push_back(detail::mean_loss(cfg.objective, margins, y));

  std::vector<double> vmargins;
  if (validation) {
    vmargins.assign(validation->first->rows(), model.base_score);
    model.validation_loss.push_back(detail::mean_loss(cfg.objective, vmargins, validation->second));
  }

  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    for (std::size_t r = 0; r < n; ++r) {
      if (cfg.objective == Objective::logistic) {
        const double p = nn::sigmoid(margins[r]);
        g[r] = p - y[r];
        h[r] = std::max(p * (1 - p), 1e-16);
      } else {
        g[r] = margins[r] - y[r];
        h[r] = 1.0;
      }
    }
    Tree tree = detail::grow_tree(x, sorted, g, h, cfg, leaf_of);
    for (auto& node : tree.nodes) node.value *= cfg.learning_rate;

    const double before = model.train_loss.back();
    double after = before;
    for (int attempt = 0; attempt <= 30; ++attempt) {
      for (std::size_t r = 0; r < n; ++r) trial[r] = margins[r] + tree.nodes[static_cast<std::size_t>(leaf_of[r])].value;
      after = detail::mean_loss(cfg.objective, trial, y);
      if (after <= before) break;
      const bool last_try = attempt == 30;
      for (auto& node : tree.nodes) node.value = last_try ? 0.0 : 0.5 * node.value;
      if (last_try) {
        trial = margins;
        after = before;
      }
    }
    margins.swap(trial);
    model.train_loss.push_back(after);
    if (validation) {
      for (std::size_t r = 0; r < vmargins.size(); ++r) vmargins[r] += tree.predict(validation->first->row(r));
      model.validation_loss.push_back(detail::mean_loss(cfg.objective, vmargins, validation->second));
    }
    model.trees.push_back(std::move(tree));
  }

  if (validation) {
    const auto& vl = model.validation_loss;
    model.best_round = static_cast<std::size_t>(std::min_element(vl.begin(), vl.end()) - vl.begin());
  } else {
    model.best_round = model.trees.size();
  }
  return model;
}

}  // namespace ciforge::gbt
