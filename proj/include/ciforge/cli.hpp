#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ciforge/datagen.hpp"
#include "ciforge/eval.hpp"
#include "ciforge/io.hpp"
#include "ciforge/testkit.hpp"
#include "ciforge/verify.hpp"

namespace ciforge::cli {

/// Seed used when neither --seed, the config file nor CIFORGE_SEED gives one.
inline constexpr std::uint64_t kDefaultSeed = 20170905;

enum ExitCode : int { ok = 0, rejected = 1, failure = 2 };

/// Options shared by subcommands. Unset fields fall back to the --config
/// file, then to built-in defaults.
struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha, tau;
  std::string mimic, classifier, out;
  std::optional<std::size_t> parallel;
};

inline std::uint64_t resolve_seed(const Common& c, const nlohmann::json& cfg) {
  if (c.seed) return *c.seed;
  if (cfg.contains("seed")) return cfg.at("seed").get<std::uint64_t>();
  if (const char* env = std::getenv("CIFORGE_SEED")) {
    std::uint64_t v = 0;
    const std::string s(env);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
      throw Error(ErrorCode::invalid_argument, "CIFORGE_SEED is not an unsigned integer: '" + s + "'");
    return v;
  }
  return kDefaultSeed;
}

inline nlohmann::json load_config(const Common& c) {
  if (c.config_path.empty()) return nlohmann::json::object();
  auto j = read_json_file(c.config_path);
  if (!j.is_object()) throw Error(ErrorCode::invalid_argument, "config file must hold a JSON object");
  return j;
}

template <class T>
T pick(const std::optional<T>& flag, const nlohmann::json& cfg, const char* key, T fallback) {
  if (flag) return *flag;
  if (cfg.contains(key)) return cfg.at(key).get<T>();
  return fallback;
}

inline std::string pick(const std::string& flag, const nlohmann::json& cfg, const char* key, std::string fallback) {
  if (!flag.empty()) return flag;
  if (cfg.contains(key)) return cfg.at(key).get<std::string>();
  return fallback;
}

/// Tester configuration from flags and config keys: alpha, tau, mimic,
/// classifier, mix_prob_gaussian, tvs [train, val, test], gbt {...}.
inline TestConfig tester_config(const Common& c, const nlohmann::json& cfg) {
  TestConfig t;
  const bool has_tau = c.tau || cfg.contains("tau");
  const bool has_alpha = c.alpha || cfg.contains("alpha");
  if (c.tau && c.alpha) throw Error(ErrorCode::invalid_argument, "--alpha and --tau are mutually exclusive");
  if (c.tau || (has_tau && !c.alpha)) {
    t.tau = pick<double>(c.tau, cfg, "tau", 0.0);
    t.alpha.reset();
  } else if (has_alpha) {
    t.alpha = pick<double>(c.alpha, cfg, "alpha", 0.05);
  }
  t.mimic.kind = parse_mimic_kind(pick(c.mimic, cfg, "mimic", "reg"));
  t.classifier.kind = parse_classifier_kind(pick(c.classifier, cfg, "classifier", "gbt"));
  if (cfg.contains("mix_prob_gaussian")) t.mimic.mix_prob_gaussian = cfg.at("mix_prob_gaussian").get<double>();
  if (cfg.contains("padding")) t.mimic.padding = cfg.at("padding").get<double>();
  if (cfg.contains("categorical_table")) t.mimic.categorical_table = cfg.at("categorical_table").get<bool>();
  if (cfg.contains("tvs")) {
    const auto v = cfg.at("tvs").get<std::vector<double>>();
    if (v.size() != 3) throw Error(ErrorCode::invalid_argument, "tvs must list three fractions");
    t.tvs = {v[0], v[1], v[2]};
  }
  if (cfg.contains("gbt")) {
    const auto& g = cfg.at("gbt");
    t.classifier.gbt.rounds = g.value("rounds", t.classifier.gbt.rounds);
    t.classifier.gbt.max_depth = g.value("max_depth", t.classifier.gbt.max_depth);
    t.classifier.gbt.learning_rate = g.value("learning_rate", t.classifier.gbt.learning_rate);
    t.classifier.gbt.min_child_weight = g.value("min_child_weight", t.classifier.gbt.min_child_weight);
    t.classifier.gbt.lambda = g.value("lambda", t.classifier.gbt.lambda);
  }
  if (cfg.contains("erm")) {
    const auto& e = cfg.at("erm");
    t.erm = ErmConfig{e.value("d_vc", std::size_t{10}), e.value("delta", 0.05), e.value("c", 1.0)};
  }
  return t;
}

inline void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text << '\n';
  } else {
    write_text_file(path, text + "\n");
  }
}

inline void add_common(CLI::App* app, Common& c, bool tester) {
  app->add_option("--config", c.config_path, "JSON config file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "64-bit seed (fallback: CIFORGE_SEED, then a fixed default)");
  app->add_option("--out", c.out, "output path (default: standard output)");
  if (!tester) return;
  auto* a = app->add_option("--alpha", c.alpha, "significance level; tau = sqrt(2 ln(2/alpha) / n_s)");
  auto* t = app->add_option("--tau", c.tau, "fixed decision threshold on the gap");
  a->excludes(t);
  app->add_option("--mimic", c.mimic, "reg|uniform")->check(CLI::IsMember({"reg", "uniform"}));
  app->add_option("--classifier", c.classifier, "gbt|mlp|logreg")->check(CLI::IsMember({"gbt", "mlp", "logreg"}));
}

struct GenOptions {
  std::string kind;
  std::optional<std::size_t> n, d_z;
  std::optional<double> a_xy, noise_var;
  bool h1 = false;
  std::vector<std::size_t> sizes;
};

inline int run_gen(const Common& c, const GenOptions& g, std::ostream& err) {
  const auto cfg = load_config(c);
  const std::uint64_t seed = resolve_seed(c, cfg);
  const std::string kind = pick(g.kind, cfg, "kind", "postnonlinear");
  if (c.out.empty() || c.out == "-") throw Error(ErrorCode::invalid_argument, "gen needs --out <file.csv>");
  const std::filesystem::path csv = c.out;
  const bool ci = !(g.h1 || cfg.value("h1", false));
  nlohmann::json manifest{{"kind", kind}, {"seed", seed}};

  if (kind == "postnonlinear") {
    PostNonlinearConfig p;
    p.d_z = pick<std::size_t>(g.d_z, cfg, "d_z", p.d_z);
    p.n = pick<std::size_t>(g.n, cfg, "n", p.n);
    p.a_xy = pick<double>(g.a_xy, cfg, "a_xy", p.a_xy);
    p.noise_var = pick<double>(g.noise_var, cfg, "noise_var", p.noise_var);
    p.ci = ci;
    p.seed = seed;
    const auto s = gen_postnonlinear_detailed(p);
    write_dataset_file(csv, s.data);
    manifest.update({{"ci", ci}, {"n", p.n}, {"d_z", p.d_z}, {"a_xy", p.a_xy}, {"noise_var", p.noise_var},
                     {"f1", to_string(s.f1)}, {"f2", to_string(s.f2)}});
  } else if (kind == "discrete") {
    auto sizes = g.sizes.empty() ? cfg.value("sizes", std::vector<std::size_t>{3, 3, 3}) : g.sizes;
    if (sizes.size() != 3) throw Error(ErrorCode::invalid_argument, "--sizes needs three alphabet sizes");
    const JointSizes js{sizes[0], sizes[1], sizes[2]};
    const std::size_t n = pick<std::size_t>(g.n, cfg, "n", 6000);
    const auto joint = gen_discrete_joint(js, ci, derive_seed(seed, Stream::datagen, 1));
    write_dataset_file(csv, sample_discrete(joint, n, derive_seed(seed, Stream::datagen, 2)));
    manifest.update({{"ci", ci}, {"n", n}, {"sizes", sizes}, {"pmf", joint.pmf()}});
  } else if (kind == "structural") {
    const std::size_t n = pick<std::size_t>(g.n, cfg, "n", 1000);
    const auto s = gen_structural_graph(n, seed);
    std::ostringstream table;
    write_table(table, s.table.columns, s.table.data);
    write_text_file(csv, table.str());
    auto rel_path = csv;
    rel_path.replace_extension(".relations.csv");
    std::ostringstream rel;
    write_relations(rel, s.relations);
    write_text_file(rel_path, rel.str());
    manifest.update({{"n", n}, {"relations", rel_path.filename().string()}});
  } else {
    throw Error(ErrorCode::invalid_argument, "unknown generator kind '" + kind + "'");
  }
  auto man_path = csv;
  man_path.replace_extension(".manifest.json");
  manifest["data"] = csv.filename().string();
  write_text_file(man_path, manifest.dump(2) + "\n");
  err << "wrote " << csv.string() << " and " << man_path.filename().string() << '\n';
  return ExitCode::ok;
}

inline int run_test(const Common& c, const std::string& data, const std::string& sidecar, std::ostream& out,
                    std::ostream& err) {
  const auto cfg = load_config(c);
  TestConfig t = tester_config(c, cfg);
  t.seed = resolve_seed(c, cfg);
  const Dataset d = read_dataset_file(data, sidecar.empty() ? std::nullopt : std::optional<std::filesystem::path>(sidecar));
  const auto rep = ci_test(d, t);
  emit(to_json(rep).dump(2), c.out, out);
  err << "gap " << rep.gap << " (e1 " << rep.e1 << ", e2 " << rep.e2 << "), p " << rep.p_value << ", tau " << rep.tau
      << ": " << to_string(rep.decision) << '\n';
  return rep.decision == Decision::h1 ? ExitCode::rejected : ExitCode::ok;
}

struct BenchOptions {
  std::string generator;
  std::optional<std::size_t> n_h0, n_h1, n, d_z;
  std::optional<double> a_xy;
  std::string csv;
  bool no_timing = false;
};

inline void report_summary(const BenchmarkReport& r, std::ostream& err) {
  std::size_t h1 = 0;
  for (const auto& row : r.rows) h1 += row.decision == Decision::h1 ? 1 : 0;
  err << r.rows.size() << " tests, " << h1 << " rejected";
  if (r.roc_auc) err << ", ROC-AUC " << *r.roc_auc;
  err << '\n';
}

inline int run_bench(const Common& c, const BenchOptions& b, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(c);
  BenchmarkConfig bc;
  bc.tester = tester_config(c, cfg);
  bc.seed = resolve_seed(c, cfg);
  bc.parallel = pick<std::size_t>(c.parallel, cfg, "parallel", 1);
  bc.generator = parse_generator_kind(pick(b.generator, cfg, "generator", "postnonlinear"));
  bc.n_h0 = pick<std::size_t>(b.n_h0, cfg, "n_h0", bc.n_h0);
  bc.n_h1 = pick<std::size_t>(b.n_h1, cfg, "n_h1", bc.n_h1);
  bc.postnonlinear.d_z = pick<std::size_t>(b.d_z, cfg, "d_z", bc.postnonlinear.d_z);
  bc.postnonlinear.n = pick<std::size_t>(b.n, cfg, "n", bc.postnonlinear.n);
  bc.postnonlinear.a_xy = pick<double>(b.a_xy, cfg, "a_xy", bc.postnonlinear.a_xy);
  bc.postnonlinear.noise_var = cfg.value("noise_var", bc.postnonlinear.noise_var);
  bc.discrete_n = pick<std::size_t>(b.n, cfg, "n", bc.discrete_n);
  bc.discrete_max_alphabet = cfg.value("max_alphabet", bc.discrete_max_alphabet);
  const auto rep = run_benchmark(bc);
  emit(to_json(rep, !b.no_timing).dump(2), c.out, out);
  if (!b.csv.empty()) {
    std::ostringstream s;
    write_benchmark_csv(s, rep);
    write_text_file(b.csv, s.str());
  }
  report_summary(rep, err);
  return ExitCode::ok;
}

inline int run_relations_cmd(const Common& c, const std::string& data, const std::string& rels,
                             const BenchOptions& b, std::ostream& out, std::ostream& err) {
  const auto cfg = load_config(c);
  TestConfig t = tester_config(c, cfg);
  const std::uint64_t seed = resolve_seed(c, cfg);
  const auto table = read_table_file(data);
  const auto relations = read_relations_file(rels);
  const auto rep = run_relations(table, relations, t, seed, pick<std::size_t>(c.parallel, cfg, "parallel", 1));
  emit(to_json(rep, !b.no_timing).dump(2), c.out, out);
  if (!b.csv.empty()) {
    std::ostringstream s;
    write_benchmark_csv(s, rep);
    write_text_file(b.csv, s.str());
  }
  report_summary(rep, err);
  return ExitCode::ok;
}

inline int run_verify(const Common& c, std::optional<std::size_t> instances, bool no_timing, std::ostream& out,
                      std::ostream& err) {
  const auto cfg = load_config(c);
  oracle::VerifyConfig v;
  v.seed = resolve_seed(c, cfg);
  v.instances = pick<std::size_t>(instances, cfg, "instances", v.instances);
  v.biconditional = cfg.value("biconditional", v.biconditional);
  const auto rep = oracle::run_verification(v);
  emit(oracle::to_json(rep, !no_timing).dump(2), c.out, out);
  std::size_t failed = 0;
  for (const auto& chk : rep.checks)
    if (!chk.passed()) {
      ++failed;
      err << "FAIL " << chk.name << " (worst slack " << chk.worst_slack << ")\n";
    }
  err << rep.checks.size() - failed << "/" << rep.checks.size() << " checks passed\n";
  return failed == 0 ? ExitCode::ok : ExitCode::rejected;
}

/// Parses argv and runs one subcommand. Exit codes: 0 success, 1 an H1
/// decision from `test` or a failed `verify` check, 2 usage or runtime error.
inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Conditional independence testing by mimic-and-classify", "ciforge"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for every subcommand");

  Common common;
  GenOptions gen;
  BenchOptions bench;
  std::string data, sidecar, rels;
  std::optional<std::size_t> instances;

  auto* g = app.add_subcommand("gen", "generate a synthetic dataset CSV with sidecar and manifest");
  add_common(g, common, false);
  g->add_option("--kind", gen.kind, "postnonlinear|discrete|structural")
      ->check(CLI::IsMember({"postnonlinear", "discrete", "structural"}));
  g->add_option("--n", gen.n, "rows");
  g->add_option("--dz", gen.d_z, "z dimension (postnonlinear)");
  g->add_option("--a-xy", gen.a_xy, "x -> y strength under H1 (postnonlinear)");
  g->add_option("--noise-var", gen.noise_var, "noise variance (postnonlinear)");
  g->add_flag("--h1", gen.h1, "generate dependent data instead of CI data");
  g->add_option("--sizes", gen.sizes, "alphabet sizes x y z (discrete)")->expected(3);

  auto* t = app.add_subcommand("test", "run one test on a dataset CSV and print the report");
  add_common(t, common, true);
  t->add_option("data", data, "dataset CSV")->required()->check(CLI::ExistingFile);
  t->add_option("--sidecar", sidecar, "column schema JSON (default: <data>.schema.json if present)");

  auto* b = app.add_subcommand("bench", "run a synthetic benchmark sweep");
  add_common(b, common, true);
  b->add_option("--parallel", common.parallel, "worker threads");
  b->add_option("--generator", bench.generator, "postnonlinear|discrete")
      ->check(CLI::IsMember({"postnonlinear", "discrete"}));
  b->add_option("--n-h0", bench.n_h0, "CI datasets");
  b->add_option("--n-h1", bench.n_h1, "dependent datasets");
  b->add_option("--n", bench.n, "rows per dataset");
  b->add_option("--dz", bench.d_z, "z dimension");
  b->add_option("--a-xy", bench.a_xy, "x -> y strength under H1");
  b->add_option("--csv", bench.csv, "also write dataset_id,label,p_value CSV here");
  b->add_flag("--no-timing", bench.no_timing, "omit wall-clock fields");

  auto* r = app.add_subcommand("relations", "test each relation of a relation CSV against a data CSV");
  add_common(r, common, true);
  r->add_option("--parallel", common.parallel, "worker threads");
  r->add_option("data", data, "data CSV")->required()->check(CLI::ExistingFile);
  r->add_option("relations", rels, "relation CSV (X,Y,Z,label)")->required()->check(CLI::ExistingFile);
  r->add_option("--csv", bench.csv, "also write dataset_id,label,p_value CSV here");
  r->add_flag("--no-timing", bench.no_timing, "omit wall-clock fields");

  auto* v = app.add_subcommand("verify", "run the exact property battery on random discrete joints");
  add_common(v, common, false);
  v->add_option("--instances", instances, "random joints in the inequality battery");
  v->add_flag("--no-timing", bench.no_timing, "omit the wall-clock field");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ExitCode::ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return ExitCode::ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return ExitCode::failure;
  }

  try {
    if (g->parsed()) return run_gen(common, gen, err);
    if (t->parsed()) return run_test(common, data, sidecar, out, err);
    if (b->parsed()) return run_bench(common, bench, out, err);
    if (r->parsed()) return run_relations_cmd(common, data, rels, bench, out, err);
    if (v->parsed()) return run_verify(common, instances, bench.no_timing, out, err);
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return ExitCode::failure;
  } catch (const nlohmann::json::exception& e) {
    err << "error [config]: " << e.what() << '\n';
    return ExitCode::failure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::failure;
  }
  err << app.help();
  return ExitCode::failure;
}

}  // namespace ciforge::cli
