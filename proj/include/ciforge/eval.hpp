#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ciforge/datagen.hpp"
#include "ciforge/io.hpp"
#include "ciforge/testkit.hpp"

namespace ciforge {

/// Mann-Whitney AUC with midranks: the probability that a random positive
/// (label 1) scores above a random negative, ties counting one half.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::invalid_argument, "scores and labels differ in length");
  std::size_t n_pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw Error(ErrorCode::invalid_argument, "labels must be 0 or 1");
    n_pos += static_cast<std::size_t>(l);
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorCode::single_class, "AUC needs both labels present");
  for (double s : scores)
    if (std::isnan(s)) throw Error(ErrorCode::invalid_argument, "scores must not be NaN");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the rank sum keeps midranks integral.
  std::uint64_t rank_sum2 = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t mid2 = i + 1 + j;  // 2 * mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) rank_sum2 += mid2;
    i = j;
  }
  const double u = static_cast<double>(rank_sum2) / 2 - static_cast<double>(n_pos) * static_cast<double>(n_pos + 1) / 2;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// Unclipped tail 2 exp(-n_s gap^2 / 2). It orders tests exactly as the
/// p-value does but keeps separating them after the p-value saturates at 1.
inline double gap_tail(double gap, std::size_t n_s) {
  return 2 * std::exp(-static_cast<double>(n_s) * gap * gap / 2);
}

enum class GeneratorKind { postnonlinear, discrete };

inline const char* to_string(GeneratorKind g) { return g == GeneratorKind::postnonlinear ? "postnonlinear" : "discrete"; }

inline GeneratorKind parse_generator_kind(const std::string& s) {
  if (s == "postnonlinear") return GeneratorKind::postnonlinear;
  if (s == "discrete") return GeneratorKind::discrete;
  throw Error(ErrorCode::invalid_argument, "unknown generator '" + s + "' (expected postnonlinear or discrete)");
}

struct BenchmarkConfig {
  GeneratorKind generator = GeneratorKind::postnonlinear;
  PostNonlinearConfig postnonlinear{};  // ci and seed are set per dataset
  std::size_t discrete_n = 6000;
  std::size_t discrete_max_alphabet = 4;  // alphabet sizes drawn from [2, max]
  std::size_t n_h0 = 20, n_h1 = 20;
  TestConfig tester{};                    // seed is set per dataset
  std::uint64_t seed = 0;
  std::size_t parallel = 1;
};

struct BenchmarkRow {
  std::string id;
  bool ci = true;  // ground truth
  double p_value = 1, tail = 2, gap = 0, e1 = 0, e2 = 0;
  std::size_t n_s = 0;
  Decision decision = Decision::h0;
  std::uint64_t data_seed = 0, test_seed = 0;
  double wall_clock_s = 0;
};

struct BenchmarkReport {
  std::vector<BenchmarkRow> rows;
  std::optional<double> roc_auc;
  std::string roc_auc_error;  // set when the AUC is undefined
  nlohmann::json config;
};

namespace detail {

/// Runs jobs 0..n-1 on up to `threads` workers; results land in their own
/// slots so the outcome does not depend on scheduling. The first failing
/// job (by index) has its exception rethrown.
inline void run_indexed(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& job) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t t = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (t == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < t; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline BenchmarkRow timed_test(const Dataset& d, TestConfig cfg, std::uint64_t test_seed) {
  cfg.seed = test_seed;
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = ci_test(d, cfg);
  BenchmarkRow row;
  row.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  row.p_value = rep.p_value;
  row.tail = gap_tail(rep.gap, rep.n_s);
  row.gap = rep.gap;
  row.e1 = rep.e1;
  row.e2 = rep.e2;
  row.n_s = rep.n_s;
  row.decision = rep.decision;
  row.test_seed = test_seed;
  return row;
}

/// AUC of -tail against NOTCI = 1.
inline void finish(BenchmarkReport& r) {
  std::vector<double> s;
  std::vector<int> l;
  for (const auto& row : r.rows) {
    s.push_back(-row.tail);
    l.push_back(row.ci ? 0 : 1);
  }
  try {
    r.roc_auc = roc_auc(s, l);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::single_class) throw;
    r.roc_auc_error = to_string(e.code());
  }
}

}  // namespace detail

inline Dataset benchmark_dataset(const BenchmarkConfig& cfg, bool ci, std::uint64_t data_seed) {
  if (cfg.generator == GeneratorKind::postnonlinear) {
    auto g = cfg.postnonlinear;
    g.ci = ci;
    g.seed = data_seed;
    return gen_postnonlinear(g);
  }
  Rng rng = make_rng(data_seed, Stream::benchmark);
  const std::size_t span = cfg.discrete_max_alphabet - 1;
  const JointSizes sizes{2 + rng() % span, 2 + rng() % span, 2 + rng() % span};
  const auto joint = gen_discrete_joint(sizes, ci, rng());
  return sample_discrete(joint, cfg.discrete_n, rng());
}

inline nlohmann::json to_json(const BenchmarkConfig& c) {
  nlohmann::json j{{"generator", to_string(c.generator)},
                   {"n_h0", c.n_h0},
                   {"n_h1", c.n_h1},
                   {"seed", c.seed},
                   {"tester", to_json(c.tester)}};
  if (c.generator == GeneratorKind::postnonlinear)
    j["postnonlinear"] = {{"d_z", c.postnonlinear.d_z},
                          {"n", c.postnonlinear.n},
                          {"a_xy", c.postnonlinear.a_xy},
                          {"noise_var", c.postnonlinear.noise_var}};
  else
    j["discrete"] = {{"n", c.discrete_n}, {"max_alphabet", c.discrete_max_alphabet}};
  return j;
}

/// H0 datasets first (ids h0-0, h0-1, ...), then H1. Dataset i draws its data
/// and test seeds from the benchmark seed and i alone.
inline BenchmarkReport run_benchmark(const BenchmarkConfig& cfg) {
  if (cfg.n_h0 + cfg.n_h1 == 0) throw Error(ErrorCode::invalid_argument, "benchmark needs at least one dataset");
  if (cfg.generator == GeneratorKind::discrete && (cfg.discrete_max_alphabet < 2 || cfg.discrete_max_alphabet > 6))
    throw Error(ErrorCode::size_out_of_range, "discrete_max_alphabet must lie in [2, 6]");
  const std::size_t n = cfg.n_h0 + cfg.n_h1;
  BenchmarkReport report;
  report.rows.resize(n);
  report.config = to_json(cfg);
  detail::run_indexed(n, cfg.parallel, [&](std::size_t i) {
    const bool ci = i < cfg.n_h0;
    const std::uint64_t data_seed = derive_seed(cfg.seed, Stream::benchmark, 2 * i);
    const std::uint64_t test_seed = derive_seed(cfg.seed, Stream::benchmark, 2 * i + 1);
    const Dataset d = benchmark_dataset(cfg, ci, data_seed);
    BenchmarkRow row = detail::timed_test(d, cfg.tester, test_seed);
    row.id = (ci ? "h0-" : "h1-") + std::to_string(ci ? i : i - cfg.n_h0);
    row.ci = ci;
    row.data_seed = data_seed;
    report.rows[i] = std::move(row);
  });
  detail::finish(report);
  return report;
}

inline std::string relation_id(const Relation& r) {
  std::string id = r.x + " _||_ " + r.y;
  if (!r.z.empty()) {
    id += " |";
    for (std::size_t k = 0; k < r.z.size(); ++k) id += (k ? ";" : " ") + r.z[k];
  }
  return id;
}

/// One test per relation on the projected columns; AUC against the labels.
inline BenchmarkReport run_relations(const Table& table, const std::vector<Relation>& relations,
                                     const TestConfig& tester, std::uint64_t seed, std::size_t parallel = 1) {
  if (relations.empty()) throw Error(ErrorCode::invalid_argument, "no relations given");
  std::vector<Dataset> projected;
  for (const auto& r : relations) projected.push_back(project_relation(table, r));  // fails fast on unknown columns
  BenchmarkReport report;
  report.rows.resize(relations.size());
  report.config = {{"relations", relations.size()}, {"seed", seed}, {"tester", to_json(tester)}};
  detail::run_indexed(relations.size(), parallel, [&](std::size_t i) {
    BenchmarkRow row = detail::timed_test(projected[i], tester, derive_seed(seed, Stream::relations, i));
    row.id = relation_id(relations[i]);
    row.ci = relations[i].ci;
    report.rows[i] = std::move(row);
  });
  detail::finish(report);
  return report;
}

inline nlohmann::json to_json(const BenchmarkReport& r, bool include_timing = true) {
  nlohmann::json rows = nlohmann::json::array();
  std::size_t n_ci = 0;
  for (const auto& row : r.rows) {
    n_ci += row.ci ? 1 : 0;
    nlohmann::json j{{"id", row.id},
                     {"label", row.ci ? "CI" : "NOTCI"},
                     {"p_value", row.p_value},
                     {"tail", row.tail},
                     {"gap", row.gap},
                     {"e1", row.e1},
                     {"e2", row.e2},
                     {"n_s", row.n_s},
                     {"decision", to_string(row.decision)},
                     {"test_seed", row.test_seed}};
    if (row.data_seed) j["data_seed"] = row.data_seed;
    if (include_timing) j["wall_clock_s"] = row.wall_clock_s;
    rows.push_back(std::move(j));
  }
  nlohmann::json j{{"rows", rows}, {"n_ci", n_ci}, {"n_notci", r.rows.size() - n_ci}, {"config", r.config}};
  j["roc_auc"] = r.roc_auc ? nlohmann::json(*r.roc_auc) : nlohmann::json(nullptr);
  if (!r.roc_auc_error.empty()) j["roc_auc_error"] = r.roc_auc_error;
  return j;
}

/// dataset_id,label,p_value
inline void write_benchmark_csv(std::ostream& out, const BenchmarkReport& r) {
  out << "dataset_id,label,p_value\n";
  for (const auto& row : r.rows) {
    std::string id = row.id;
    if (id.find_first_of(",\"") != std::string::npos) {
      std::string q = "\"";
      for (char c : id) q += c == '"' ? std::string("\"\"") : std::string(1, c);
      id = q + "\"";
    }
    out << id << ',' << (row.ci ? "CI" : "NOTCI") << ',' << format_double(row.p_value) << '\n';
  }
}

}  // namespace ciforge
