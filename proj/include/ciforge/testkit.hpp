#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include <json.hpp>

#include "ciforge/classify.hpp"
#include "ciforge/core.hpp"
#include "ciforge/mimic.hpp"

namespace ciforge {

/// min(1, 2 exp(-n_s gap^2 / 2)).
inline double gap_pvalue(double gap, std::size_t n_s) {
  if (!(gap >= 0 && gap <= 1)) throw Error(ErrorCode::invalid_argument, "gap must lie in [0, 1]");
  if (n_s < 1) throw Error(ErrorCode::invalid_argument, "n_s must be positive");
  const double tail = 2 * std::exp(-static_cast<double>(n_s) * gap * gap / 2);
  return std::clamp(tail, std::numeric_limits<double>::min(), 1.0);  // stays in (0, 1] on underflow
}

/// Threshold at which gap_pvalue equals alpha.
inline double tau_for_alpha(double alpha, std::size_t n_s) {
  if (!(alpha > 0 && alpha < 1)) throw Error(ErrorCode::invalid_argument, "alpha must lie in (0, 1)");
  if (n_s < 1) throw Error(ErrorCode::invalid_argument, "n_s must be positive");
  return std::sqrt(2 * std::log(2 / alpha) / static_cast<double>(n_s));
}

/// C sqrt(d/n_t) + sqrt(2 ln(1/delta) / n_t).
inline double erm_excess_bound(std::size_t d_vc, std::size_t n_t, double delta, double c = 1.0) {
  if (d_vc < 1 || n_t < 1) throw Error(ErrorCode::invalid_argument, "d_vc and n_t must be positive");
  if (!(delta > 0 && delta < 1)) throw Error(ErrorCode::invalid_argument, "delta must lie in (0, 1)");
  const auto n = static_cast<double>(n_t);
  return c * std::sqrt(static_cast<double>(d_vc) / n) + std::sqrt(2 * std::log(1 / delta) / n);
}

inline constexpr std::size_t kMinTestRows = 60;

struct ErmConfig {
  std::size_t d_vc = 10;
  double delta = 0.05;
  double c = 1.0;
};

struct TestConfig {
  MimicConfig mimic{};
  ClassifierConfig classifier{};
  std::optional<double> alpha = 0.05;
  std::optional<double> tau;  // a fixed threshold replaces the alpha-derived one
  TvsFractions tvs{};
  std::optional<ErmConfig> erm;
  std::uint64_t seed = 0;
};

enum class Decision { h0, h1 };

inline const char* to_string(Decision d) { return d == Decision::h0 ? "H0" : "H1"; }

struct TestReport {
  double e1 = 0, e2 = 0, gap = 0;
  std::size_t n_s = 0;
  double p_value = 1, tau = 0;
  Decision decision = Decision::h0;
  std::optional<double> alpha;
  std::optional<double> erm_bound;
  std::uint64_t seed = 0;
  std::size_t n_d1 = 0, n_d2 = 0, n_d3 = 0, n_train = 0, n_validation = 0;
  ClassifierError f1_error, f2_error;
  TestConfig config;
};

/// Runs the mimic-and-classify test on D.
///   1. split D into D1, D2, D3
///   2. fit the mimic on D2's (y, z) and resample y on D3 to get D'
///   3. label D1 as 1 and D' as 0, split train/validation/test by label
///   4. train f1 without x and f2 with x; compare their errors on the same
///      test rows
inline TestReport ci_test(const Dataset& d, const TestConfig& cfg) {
  if (d.n_rows() < kMinTestRows)
    throw Error(ErrorCode::too_few_rows, "test needs at least 60 rows, got " + std::to_string(d.n_rows()));
  if (d.n_x() == 0) throw Error(ErrorCode::invalid_dataset, "test needs at least one x column");
  if (cfg.alpha && cfg.tau) throw Error(ErrorCode::invalid_argument, "give either alpha or tau, not both");
  if (!cfg.alpha && !cfg.tau) throw Error(ErrorCode::invalid_argument, "one of alpha or tau is required");
  if (cfg.tau && !(*cfg.tau >= 0)) throw Error(ErrorCode::invalid_argument, "tau must be non-negative");
  if (cfg.alpha && !(*cfg.alpha > 0 && *cfg.alpha < 1))
    throw Error(ErrorCode::invalid_argument, "alpha must lie in (0, 1)");
  if (cfg.mimic.kind == MimicKind::uniform)
    for (const auto& c : d.y_cols())
      if (c.is_categorical())
        throw Error(ErrorCode::mimic_support, "uniform mimic cannot cover categorical y column '" + c.name + "'");

  const auto plan = split_three_way(d, cfg.seed, cfg.tvs);
  const Dataset d1 = d.select_rows(plan.d1);
  const Dataset d2 = d.select_rows(plan.d2);
  const Dataset d3 = d.select_rows(plan.d3);

  const auto model = fit_mimic(d2.without_x(), cfg.mimic, derive_seed(cfg.seed, Stream::mimic_fit));
  const Dataset mimicked = mimic_apply(model, d3, derive_seed(cfg.seed, Stream::mimic_noise));

  const LabeledDataset all = label_union(d1, mimicked);
  const auto parts = stratified_split(all.labels, cfg.tvs, cfg.seed);
  const auto train = all.select_rows(parts.train);
  const auto val = all.select_rows(parts.validation);
  const auto test = all.select_rows(parts.test);

  const auto f1 = train_classifier(strip_x(train), strip_x(val), cfg.classifier,
                                   derive_seed(cfg.seed, Stream::classifier_f1));
  const auto f2 = train_classifier(train, val, cfg.classifier, derive_seed(cfg.seed, Stream::classifier_f2));

  TestReport r;
  r.f1_error = classifier_error(f1, test);  // f1 drops the x columns itself
  r.f2_error = classifier_error(f2, test);
  r.e1 = r.f1_error.error_rate;
  r.e2 = r.f2_error.error_rate;
  r.gap = std::abs(r.e2 - r.e1);
  r.n_s = test.n_rows();
  r.p_value = gap_pvalue(r.gap, r.n_s);
  r.alpha = cfg.alpha;
  r.tau = cfg.tau ? *cfg.tau : tau_for_alpha(*cfg.alpha, r.n_s);
  r.decision = r.gap > r.tau ? Decision::h1 : Decision::h0;
  if (cfg.erm) r.erm_bound = erm_excess_bound(cfg.erm->d_vc, train.n_rows(), cfg.erm->delta, cfg.erm->c);
  r.seed = cfg.seed;
  r.n_d1 = plan.d1.size();
  r.n_d2 = plan.d2.size();
  r.n_d3 = plan.d3.size();
  r.n_train = train.n_rows();
  r.n_validation = val.n_rows();
  r.config = cfg;
  return r;
}

/// |mean_i (L1_i - L2_i)| over the paired test losses.
inline double paired_gap(const ClassifierError& f1, const ClassifierError& f2) {
  if (f1.losses.size() != f2.losses.size() || f1.losses.empty())
    throw Error(ErrorCode::invalid_argument, "paired losses must cover the same non-empty test rows");
  long diff = 0;
  for (std::size_t i = 0; i < f1.losses.size(); ++i) diff += f1.losses[i] - f2.losses[i];
  return std::abs(static_cast<double>(diff)) / static_cast<double>(f1.losses.size());
}

inline nlohmann::json to_json(const TestConfig& c) {
  nlohmann::json j{{"mimic", to_string(c.mimic.kind)},
                   {"regressor", to_string(c.mimic.regressor)},
                   {"mix_prob_gaussian", c.mimic.mix_prob_gaussian},
                   {"classifier", to_string(c.classifier.kind)},
                   {"tvs", {c.tvs.train, c.tvs.validation, c.tvs.test}}};
  j["alpha"] = c.alpha ? nlohmann::json(*c.alpha) : nlohmann::json(nullptr);
  j["tau"] = c.tau ? nlohmann::json(*c.tau) : nlohmann::json(nullptr);
  if (c.classifier.kind == ClassifierKind::gbt)
    j["gbt"] = {{"rounds", c.classifier.gbt.rounds},
                {"max_depth", c.classifier.gbt.max_depth},
                {"learning_rate", c.classifier.gbt.learning_rate},
                {"min_child_weight", c.classifier.gbt.min_child_weight},
                {"lambda", c.classifier.gbt.lambda}};
  return j;
}

inline nlohmann::json to_json(const TestReport& r) {
  nlohmann::json j{{"e1", r.e1},
                   {"e2", r.e2},
                   {"gap", r.gap},
                   {"n_s", r.n_s},
                   {"p_value", r.p_value},
                   {"tau", r.tau},
                   {"decision", to_string(r.decision)},
                   {"seed", r.seed},
                   {"config", to_json(r.config)},
                   {"splits",
                    {{"d1", r.n_d1}, {"d2", r.n_d2}, {"d3", r.n_d3}, {"train", r.n_train},
                     {"validation", r.n_validation}, {"test", r.n_s}}}};
  if (r.erm_bound) j["erm_bound"] = *r.erm_bound;
  return j;
}

}  // namespace ciforge
