#pragma once

// Config-driven experiment runner behind the CLI. A run writes one JSON object
// per trial to <output_path>.jsonl and a per-sweep-point summary to
// <output_path>.csv; calibration writes <output_path>.json and .csv instead.
// Trials run in parallel but every record lands in index order, so output
// bytes depend only on the config and the build.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sketchspec/amm.hpp"
#include "sketchspec/calibration.hpp"
#include "sketchspec/chernoff_lab.hpp"
#include "sketchspec/dense_matrix.hpp"
#include "sketchspec/error.hpp"
#include "sketchspec/generator.hpp"
#include "sketchspec/linalg.hpp"
#include "sketchspec/lowrank.hpp"
#include "sketchspec/matrix_io.hpp"
#include "sketchspec/parallel.hpp"
#include "sketchspec/regression.hpp"
#include "sketchspec/serialize.hpp"
#include "sketchspec/sketch.hpp"
#include "sketchspec/stats.hpp"

#ifndef SKETCHSPEC_DEFAULT_CALIBRATION
#define SKETCHSPEC_DEFAULT_CALIBRATION ""
#endif

namespace sketchspec {

inline constexpr const char* kConfigSchema = "sketchspec/1";
inline constexpr const char* kCalibrationSchema = "sketchspec-calibration/1";

enum class Task {
  AmmProject,
  AmmRowSample,
  Regression,
  LowRankSign,
  LowRankGaussian,
  LowRankLeverage,
  LowRankTail,
  JlLab,
  ChernoffLab,
  RudelsonLab,
  Calibrate
};

inline const std::vector<std::pair<Task, std::string_view>>& task_names() {
  static const std::vector<std::pair<Task, std::string_view>> names{
      {Task::AmmProject, "amm-project"},         {Task::AmmRowSample, "amm-rowsample"},
      {Task::Regression, "regression"},          {Task::LowRankSign, "lowrank-sign"},
      {Task::LowRankGaussian, "lowrank-gaussian"}, {Task::LowRankLeverage, "lowrank-leverage"},
      {Task::LowRankTail, "lowrank-tail"},       {Task::JlLab, "jl-lab"},
      {Task::ChernoffLab, "chernoff-lab"},       {Task::RudelsonLab, "rudelson-lab"},
      {Task::Calibrate, "calibrate"}};
  return names;
}

inline std::string_view to_string(Task t) {
  for (const auto& [k, v] : task_names()) {
    if (k == t) return v;
  }
  return "?";
}

inline Task task_from_string(std::string_view s) {
  for (const auto& [k, v] : task_names()) {
    if (v == s) return k;
  }
  throw ConfigError("task: unknown task '" + std::string(s) + "'");
}

struct Sweep {
  std::vector<std::size_t> t;
  std::vector<double> eps{0.25};
  std::vector<std::size_t> n;
  std::vector<std::size_t> k;
  std::vector<std::size_t> d;
};

struct EnsembleConfig {
  EnsembleKind kind = EnsembleKind::IsotropicOuterProduct;
  std::size_t r = 1;
};

struct ExperimentConfig {
  Task task = Task::AmmProject;
  std::optional<GeneratorSpec> generator;
  /// Second AMM operand; B = A when absent.
  std::optional<GeneratorSpec> generator_b;
  /// A read from disk instead of generated.
  std::optional<std::filesystem::path> matrix_path;
  Sweep sweep;
  std::size_t trials = 1;
  std::uint64_t seed_base = 0;
  std::map<std::string, double> constant_overrides;
  std::optional<std::filesystem::path> calibration_file;
  /// Replaces every sketch by the first n rows of I_n (t = n).
  bool identity_hook = false;
  std::filesystem::path output_path;
  std::optional<EnsembleConfig> ensemble;
  std::vector<std::string> regimes;
  bool allow_small_t = false;
  double target_rate = 0.9;
  /// Which regression guarantee sets t when sweep.t is empty.
  std::string t_regime = "regression-approx";
  std::optional<double> noise_scale;
};

namespace detail {

inline std::filesystem::path resolve_path(const std::filesystem::path& p, const std::filesystem::path& base) {
  return (p.is_absolute() || base.empty() ? p : base / p).lexically_normal();
}

template <typename T>
std::vector<T> list_member(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) return {};
  const json& v = j.at(key);
  if (!v.is_array()) throw ConfigError(where + "." + key + ": expected a list");
  std::vector<T> out;
  for (const auto& e : v) {
    if constexpr (std::is_same_v<T, std::size_t>) {
      if (!is_nonnegative_integer(e)) throw ConfigError(where + "." + key + ": expected nonnegative integers");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!e.is_number()) throw ConfigError(where + "." + key + ": expected numbers");
    } else {
      if (!e.is_string()) throw ConfigError(where + "." + key + ": expected strings");
    }
    out.push_back(e.get<T>());
  }
  return out;
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return it.key() == k; })) {
      throw ConfigError(where + ": unknown key '" + it.key() + "'");
    }
  }
}

inline bool needs_matrix(Task t) {
  return t != Task::JlLab && t != Task::ChernoffLab && t != Task::Calibrate;
}

}  // namespace detail

/// Structural checks that need no matrix.
inline void validate(const ExperimentConfig& c) {
  if (c.trials == 0) throw ConfigError("trials must be >= 1");
  if (c.sweep.eps.empty()) throw ConfigError("sweep.eps must not be empty");
  for (double e : c.sweep.eps) {
    if (!(e > 0.0 && e < 1.0)) throw ConfigError("sweep.eps values must lie in (0,1)");
  }
  for (std::size_t t : c.sweep.t) {
    if (t == 0) throw ConfigError("sweep.t values must be >= 1");
  }
  for (std::size_t k : c.sweep.k) {
    if (k == 0) throw ConfigError("sweep.k values must be >= 1");
  }
  for (const auto& [key, v] : c.constant_overrides) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("constant_overrides." + key + " must be > 0");
  }
  if (!(c.target_rate > 0.0 && c.target_rate < 1.0)) throw ConfigError("target_rate must lie in (0,1)");
  if (c.output_path.empty()) throw ConfigError("missing 'output_path'");
  if (detail::needs_matrix(c.task) && !c.generator && !c.matrix_path) {
    throw ConfigError("task " + std::string(to_string(c.task)) + " needs 'generator' or 'matrix_path'");
  }
  if (c.generator && c.matrix_path) throw ConfigError("'generator' and 'matrix_path' are exclusive");
  if (!c.sweep.n.empty() && detail::needs_matrix(c.task) && !c.generator) {
    throw ConfigError("sweep.n needs a 'generator'");
  }
  if (c.generator_b && c.task != Task::AmmProject && c.task != Task::AmmRowSample) {
    throw ConfigError("generator_b only applies to amm tasks");
  }
  if (c.t_regime != "regression-approx" && c.t_regime != "regression-distance") {
    throw ConfigError("t_regime must be regression-approx or regression-distance");
  }
  switch (c.task) {
    case Task::JlLab:
      if (c.sweep.k.empty() || c.sweep.d.empty()) throw ConfigError("jl-lab needs sweep.k and sweep.d");
      if (c.sweep.t.empty() && !c.identity_hook) throw ConfigError("jl-lab needs sweep.t");
      for (std::size_t k : c.sweep.k) {
        for (std::size_t d : c.sweep.d) {
          if (k > d) throw ConfigError("jl-lab needs k <= d");
        }
      }
      break;
    case Task::ChernoffLab:
      if (!c.ensemble) throw ConfigError("chernoff-lab needs 'ensemble'");
      if (c.sweep.n.empty() || c.sweep.t.empty()) throw ConfigError("chernoff-lab needs sweep.n and sweep.t");
      if (c.trials < 100) throw ConfigError("chernoff-lab needs trials >= 100");
      for (std::size_t n : c.sweep.n) {
        if (n == 0) throw ConfigError("sweep.n values must be >= 1");
        if (c.ensemble->kind == EnsembleKind::RankRFrame && (c.ensemble->r == 0 || c.ensemble->r > n)) {
          throw ConfigError("ensemble.r must lie in [1, n]");
        }
      }
      break;
    case Task::RudelsonLab:
      if (c.sweep.t.empty()) throw ConfigError("rudelson-lab needs sweep.t");
      break;
    case Task::Calibrate:
      for (const auto& r : c.regimes) {
        const auto& keys = calibration_regime_keys();
        if (std::find(keys.begin(), keys.end(), r) == keys.end()) throw ConfigError("unknown regime '" + r + "'");
      }
      break;
    default: break;
  }
}

/// Parses a config object; relative paths resolve against base_dir.
inline ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
  const std::string w = "config";
  if (!j.is_object()) throw ConfigError("config: expected an object");
  detail::reject_unknown(j,
                         {"schema", "task", "generator", "generator_b", "matrix_path", "sweep", "trials", "seed_base",
                          "constant_overrides", "calibration_file", "identity_hook", "output_path", "ensemble",
                          "regimes", "allow_small_t", "target_rate", "t_regime", "noise_scale", "comment"},
                         w);
  const auto schema = detail::member<std::string>(j, "schema", w);
  if (schema != kConfigSchema) throw ConfigError("schema: expected '" + std::string(kConfigSchema) + "'");
  ExperimentConfig c;
  c.task = task_from_string(detail::member<std::string>(j, "task", w));
  if (j.contains("generator")) c.generator = generator_from_json(j.at("generator"), "generator");
  if (j.contains("generator_b")) c.generator_b = generator_from_json(j.at("generator_b"), "generator_b");
  if (j.contains("matrix_path")) {
    c.matrix_path = detail::resolve_path(detail::member<std::string>(j, "matrix_path", w), base_dir);
  }
  if (j.contains("sweep")) {
    const json& s = j.at("sweep");
    if (!s.is_object()) throw ConfigError("sweep: expected an object");
    detail::reject_unknown(s, {"t", "eps", "n", "k", "d"}, "sweep");
    c.sweep.t = detail::list_member<std::size_t>(s, "t", "sweep");
    if (s.contains("eps")) c.sweep.eps = detail::list_member<double>(s, "eps", "sweep");
    c.sweep.n = detail::list_member<std::size_t>(s, "n", "sweep");
    c.sweep.k = detail::list_member<std::size_t>(s, "k", "sweep");
    c.sweep.d = detail::list_member<std::size_t>(s, "d", "sweep");
  }
  c.trials = detail::member_or<std::size_t>(j, "trials", 1, w);
  c.seed_base = detail::member_or<std::uint64_t>(j, "seed_base", 0, w);
  if (j.contains("constant_overrides")) {
    const json& o = j.at("constant_overrides");
    if (!o.is_object()) throw ConfigError("constant_overrides: expected an object");
    for (auto it = o.begin(); it != o.end(); ++it) {
      if (!it.value().is_number()) throw ConfigError("constant_overrides." + it.key() + ": expected a number");
      c.constant_overrides[it.key()] = it.value().get<double>();
    }
  }
  if (j.contains("calibration_file")) {
    c.calibration_file = detail::resolve_path(detail::member<std::string>(j, "calibration_file", w), base_dir);
  }
  c.identity_hook = detail::member_or<bool>(j, "identity_hook", false, w);
  c.output_path = detail::resolve_path(detail::member<std::string>(j, "output_path", w), base_dir);
  if (j.contains("ensemble")) {
    const json& e = j.at("ensemble");
    detail::reject_unknown(e, {"kind", "r"}, "ensemble");
    EnsembleConfig ec;
    try {
      ec.kind = ensemble_kind_from_string(detail::member<std::string>(e, "kind", "ensemble"));
    } catch (const InvalidArgument& ex) {
      throw ConfigError(std::string("ensemble.kind: ") + ex.what());
    }
    if (ec.kind == EnsembleKind::Custom) throw ConfigError("ensemble.kind: Custom is library-only");
    ec.r = detail::member_or<std::size_t>(e, "r", 1, "ensemble");
    c.ensemble = ec;
  }
  c.regimes = detail::list_member<std::string>(j, "regimes", w);
  c.allow_small_t = detail::member_or<bool>(j, "allow_small_t", false, w);
  c.target_rate = detail::member_or<double>(j, "target_rate", 0.9, w);
  c.t_regime = detail::member_or<std::string>(j, "t_regime", "regression-approx", w);
  if (j.contains("noise_scale")) c.noise_scale = detail::member<double>(j, "noise_scale", w);
  validate(c);
  return c;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed for '" + p.string() + "'");
  return ss.str();
}

/// Writes `text` to p, creating parent directories.
inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  if (ec) throw IoError("cannot create directory '" + p.parent_path().string() + "': " + ec.message());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + p.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for '" + p.string() + "'");
}

inline json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& p) {
  return config_from_json(parse_json_text(read_text(p), p.string()), p.parent_path());
}

// ---------------------------------------------------------------------------
// Calibration file

struct CalibrationTable {
  double eps = 0.25;
  std::size_t trials = 0;
  std::uint64_t seed_base = 0;
  double target_rate = 0.9;
  std::map<std::string, double> constants;
};

inline json to_json(const CalibrationResult& r) {
  json cases = json::array();
  for (const auto& c : r.cases) {
    cases.push_back(json{{"label", c.label}, {"formula", c.formula}, {"t", c.t}, {"passes", c.passes}});
  }
  return json{{"regime", r.key}, {"constant", r.constant}, {"cases", cases}};
}

inline json calibration_to_json(const std::vector<CalibrationResult>& results, double eps, std::size_t trials,
                                 std::uint64_t seed_base, double target_rate) {
  json constants = json::object();
  json detail = json::array();
  std::size_t required = results.empty() ? required_passes(trials, target_rate) : results.front().required;
  for (const auto& r : results) {
    constants[r.key] = r.constant;
    detail.push_back(to_json(r));
  }
  return json{{"schema", kCalibrationSchema}, {"eps", eps},
              {"trials", trials},             {"seed_base", seed_base},
              {"target_rate", target_rate},   {"required_passes", required},
              {"constants", constants},       {"regimes", detail}};
}

inline CalibrationTable calibration_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  if (detail::member<std::string>(j, "schema", where) != kCalibrationSchema) {
    throw ConfigError(where + ": expected schema '" + std::string(kCalibrationSchema) + "'");
  }
  CalibrationTable t;
  t.eps = detail::member_or<double>(j, "eps", 0.25, where);
  t.trials = detail::member_or<std::size_t>(j, "trials", 0, where);
  t.seed_base = detail::member_or<std::uint64_t>(j, "seed_base", 0, where);
  t.target_rate = detail::member_or<double>(j, "target_rate", 0.9, where);
  const json& c = j.contains("constants") ? j.at("constants") : json::object();
  if (!c.is_object()) throw ConfigError(where + ".constants: expected an object");
  for (auto it = c.begin(); it != c.end(); ++it) {
    if (!it.value().is_number() || !(it.value().get<double>() > 0.0)) {
      throw ConfigError(where + ".constants." + it.key() + ": expected a positive number");
    }
    t.constants[it.key()] = it.value().get<double>();
  }
  return t;
}

inline CalibrationTable load_calibration(const std::filesystem::path& p) {
  return calibration_from_json(parse_json_text(read_text(p), p.string()), p.string());
}

/// C for a regime: constant_overrides, then calibration_file, then the
/// build's default calibration file.
inline double resolve_constant(const ExperimentConfig& c, const std::string& regime) {
  if (auto it = c.constant_overrides.find(regime); it != c.constant_overrides.end()) return it->second;
  if (c.calibration_file) {
    // A file named in the config is authoritative and must exist.
    const CalibrationTable t = load_calibration(*c.calibration_file);
    if (auto it = t.constants.find(regime); it != t.constants.end()) return it->second;
  } else {
    std::vector<std::filesystem::path> fallbacks;
    if (const char* env = std::getenv("SKETCHSPEC_CALIBRATION"); env && *env) fallbacks.emplace_back(env);
    if (std::string_view(SKETCHSPEC_DEFAULT_CALIBRATION).size()) fallbacks.emplace_back(SKETCHSPEC_DEFAULT_CALIBRATION);
    for (const auto& f : fallbacks) {
      if (!std::filesystem::exists(f)) continue;
      const CalibrationTable t = load_calibration(f);
      if (auto it = t.constants.find(regime); it != t.constants.end()) return it->second;
    }
  }
  throw ConfigError("no constant for regime '" + regime + "': give constant_overrides or sweep.t");
}

// ---------------------------------------------------------------------------
// Runner

struct RunSummary {
  std::size_t records = 0;
  /// Records whose guarantee check failed (numerical outcome, not an error).
  std::size_t failures = 0;
  /// Trials that raised a numerical error; recorded, not fatal.
  std::size_t errors = 0;
  std::vector<std::filesystem::path> outputs;
};

namespace detail {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string csv_row(std::initializer_list<std::string> cells) {
  std::string s;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) s += ',';
    s += c;
    first = false;
  }
  s += '\n';
  return s;
}

inline std::string num(std::size_t v) { return std::to_string(v); }

// Numerical trouble inside one trial becomes an {"error": ...} record;
// anything else (bad parameters) aborts the run.
template <typename Fn>
json guarded_trial(json head, Fn&& fn) {
  try {
    fn(head);
  } catch (const NumericalFailure& e) {
    head["error"] = e.what();
  } catch (const DegenerateDistribution& e) {
    head["error"] = e.what();
  } catch (const MismatchedProblem& e) {
    head["error"] = e.what();
  } catch (const NoSpectrum& e) {
    head["error"] = e.what();
  }
  return head;
}

struct Sink {
  std::string jsonl;
  std::string csv;
  RunSummary summary;

  void add(const json& rec, bool failed) {
    jsonl += rec.dump();
    jsonl += '\n';
    ++summary.records;
    if (rec.contains("error")) {
      ++summary.errors;
    } else if (failed) {
      ++summary.failures;
    }
  }
};

inline DenseMatrix load_operand(const ExperimentConfig& c, std::optional<std::size_t> n_override) {
  if (c.matrix_path) return read_matrix(*c.matrix_path);
  GeneratorSpec g = *c.generator;
  if (n_override) g.n = *n_override;
  return generate(g);
}

inline std::vector<double> finite_values(const std::vector<json>& recs, const char* key) {
  std::vector<double> v;
  for (const auto& r : recs) {
    if (r.contains(key) && r.at(key).is_number()) v.push_back(r.at(key).get<double>());
  }
  return v;
}

inline std::string quantile_or_nan(std::vector<double> v, double q) {
  return v.empty() ? "nan" : fmt(stats::quantile(std::move(v), q));
}

inline SketchOp projection_or_hook(const ExperimentConfig& c, std::size_t t, std::size_t n, std::uint64_t seed) {
  if (c.identity_hook) return SketchOp{SketchKind::IdentityRows, n, n, seed, std::nullopt};
  return SketchOp{SketchKind::SignProjection, t, n, seed, std::nullopt};
}

inline std::vector<std::size_t> t_values(const ExperimentConfig& c, std::size_t n, const std::string& regime,
                                         double param, double eps) {
  if (c.identity_hook) return {n};
  if (!c.sweep.t.empty()) return c.sweep.t;
  return {regime_sample_size(regime, param, eps, resolve_constant(c, regime))};
}

inline void run_amm(const ExperimentConfig& c, Sink& out) {
  const bool project = c.task == Task::AmmProject;
  const std::string regime = project ? "amm-project" : "amm-rowsample";
  out.csv = csv_row({"regime", "n", "t", "eps", "trials", "passed", "failed", "errors", "pass_rate", "median_error",
                     "q90_error", "median_relative_eps"});
  std::vector<std::optional<std::size_t>> ns;
  for (std::size_t n : c.sweep.n) ns.emplace_back(n);
  if (ns.empty()) ns.emplace_back(std::nullopt);
  for (const auto& n_over : ns) {
    const DenseMatrix a = load_operand(c, n_over);
    std::optional<DenseMatrix> b_own;
    if (c.generator_b) {
      GeneratorSpec gb = *c.generator_b;
      gb.n = a.rows();
      b_own.emplace(generate(gb));
    }
    const DenseMatrix& b = b_own ? *b_own : a;
    const AmmReference ref = AmmReference::of(a, b);
    const double param = project ? static_cast<double>(std::max(numerical_rank(a), numerical_rank(b)))
                                 : std::max(stable_rank(a), stable_rank(b));
    std::optional<SampleDistribution> dist;
    if (!project) dist.emplace(amm_row_distribution(a, b));
    const std::size_t n = a.rows();
    for (double eps : c.sweep.eps) {
      for (std::size_t t : t_values(c, n, regime, param, eps)) {
        const json head{{"regime", regime}, {"n", n}, {"t", t}, {"eps", eps}};
        const auto recs = parallel_map(c.trials, [&](std::size_t i) {
          json h = head;
          h["seed"] = c.seed_base + i;
          return guarded_trial(h, [&](json& r) {
            const std::uint64_t seed = c.seed_base + i;
            SketchOp op = c.identity_hook ? SketchOp{SketchKind::IdentityRows, n, n, seed, std::nullopt}
                          : project       ? SketchOp{SketchKind::SignProjection, t, n, seed, std::nullopt}
                                          : SketchOp{SketchKind::RowSample, t, n, seed, dist->probs()};
            const ErrorReport rep = amm_with_sketch(a, b, op, eps, &ref).report;
            r["achieved_error"] = real_to_json(rep.achieved_error);
            r["bound"] = real_to_json(rep.bound);
            r["relative_eps"] = real_to_json(rep.relative_eps);
            r["passed"] = rep.passed;
          });
        });
        std::size_t passed = 0;
        std::size_t errors = 0;
        for (const auto& r : recs) {
          const bool ok = r.contains("passed") && r.at("passed").get<bool>();
          passed += ok;
          errors += r.contains("error");
          out.add(r, !ok);
        }
        out.csv += csv_row({regime, num(n), num(t), fmt(eps), num(c.trials), num(passed),
                            num(c.trials - passed - errors), num(errors),
                            fmt(static_cast<double>(passed) / static_cast<double>(c.trials)),
                            quantile_or_nan(finite_values(recs, "achieved_error"), 0.5),
                            quantile_or_nan(finite_values(recs, "achieved_error"), 0.9),
                            quantile_or_nan(finite_values(recs, "relative_eps"), 0.5)});
      }
    }
  }
}

inline void run_regression(const ExperimentConfig& c, Sink& out) {
  const DenseMatrix a = load_operand(c, std::nullopt);
  const std::uint64_t rhs_seed = c.generator ? c.generator->seed : 0;
  const std::size_t rank = numerical_rank(a);
  const Vector b = regression_rhs(a, rhs_seed, c.noise_scale, rank);
  const RegressionSolution exact = solve_exact(a, b);
  const double smin = smallest_positive_singular_value(a);
  const bool approx_regime = c.t_regime == "regression-approx";
  const std::size_t n = a.rows();
  out.csv = csv_row({"t_regime", "t", "eps", "trials", "passed_approx", "passed_distance", "errors",
                     "median_residual_ratio", "median_solution_distance", "bound_rhs"});
  for (double eps : c.sweep.eps) {
    for (std::size_t t : t_values(c, n, c.t_regime, static_cast<double>(rank), eps)) {
      const json head{{"t", t}, {"eps", eps}};
      const auto recs = parallel_map(c.trials, [&](std::size_t i) {
        json h = head;
        h["seed"] = c.seed_base + i;
        return guarded_trial(h, [&](json& r) {
          const auto sk = solve_sketched(a, b, projection_or_hook(c, t, n, c.seed_base + i));
          const RegressionReport rep = regression_report(a, b, exact, sk, eps, smin);
          r["residual_ratio"] = real_to_json(rep.residual_ratio);
          r["solution_distance"] = real_to_json(rep.solution_distance);
          r["bound_rhs"] = real_to_json(rep.bound_rhs);
          r["passed_approx"] = rep.passed_approx;
          r["passed_distance"] = rep.passed_distance;
        });
      });
      std::size_t pa = 0;
      std::size_t pd = 0;
      std::size_t errors = 0;
      for (const auto& r : recs) {
        const bool a_ok = r.contains("passed_approx") && r.at("passed_approx").get<bool>();
        const bool d_ok = r.contains("passed_distance") && r.at("passed_distance").get<bool>();
        pa += a_ok;
        pd += d_ok;
        errors += r.contains("error");
        out.add(r, !(approx_regime ? a_ok : d_ok));
      }
      const double rhs = eps / smin * exact.residual_norm;
      out.csv += csv_row({c.t_regime, num(t), fmt(eps), num(c.trials), num(pa), num(pd), num(errors),
                          quantile_or_nan(finite_values(recs, "residual_ratio"), 0.5),
                          quantile_or_nan(finite_values(recs, "solution_distance"), 0.5), fmt(rhs)});
    }
  }
}

/// Smallest k with sr(A - A_k) <= k.
inline std::size_t smallest_tail_k(const LowRankProblem& p) {
  for (std::size_t k = 1; k < p.rank(); ++k) {
    if (residual_stable_rank(p.factors().sigma, k) <= static_cast<double>(k)) return k;
  }
  return std::max<std::size_t>(1, p.rank());
}

inline void run_lowrank(const ExperimentConfig& c, Sink& out) {
  const DenseMatrix a = load_operand(c, std::nullopt);
  const LowRankProblem prob(a);
  const std::size_t r = prob.rank();
  const std::size_t n = a.rows();
  const std::size_t kmax = std::min(a.rows(), a.cols());
  std::vector<LowRankMethod> methods;
  std::string regime;
  switch (c.task) {
    case Task::LowRankSign: methods = {LowRankMethod::SignProj}, regime = "lowrank-sign"; break;
    case Task::LowRankGaussian: methods = {LowRankMethod::GaussianProj}, regime = "lowrank-gaussian"; break;
    case Task::LowRankLeverage: methods = {LowRankMethod::LeverageSample}, regime = "lowrank-leverage"; break;
    default: methods = {LowRankMethod::TailSignProj, LowRankMethod::TailFullProj}, regime = "lowrank-tail"; break;
  }
  std::vector<std::size_t> ks = c.sweep.k;
  if (ks.empty()) {
    if (c.task == Task::LowRankTail) {
      ks = {smallest_tail_k(prob)};
    } else {
      for (std::size_t k = 1; k <= std::max<std::size_t>(1, r); ++k) ks.push_back(k);
    }
  }
  for (std::size_t k : ks) {
    if (k > kmax) throw ConfigError("sweep.k value " + std::to_string(k) + " exceeds min(rows, cols)");
  }
  if (c.task == Task::LowRankLeverage) {
    std::cerr << "note: leverage scores come from the exact SVD of A, computed once before sampling\n";
  }
  // Methods whose t depends on k run one sketch per k; the others share one
  // sketch across all k, which is what the all-k row summarizes.
  const bool per_k = c.sweep.t.empty() && !c.identity_hook &&
                     (c.task == Task::LowRankGaussian || c.task == Task::LowRankTail);
  std::vector<std::vector<std::size_t>> groups;
  if (per_k) {
    for (std::size_t k : ks) groups.push_back({k});
  } else {
    groups.push_back(ks);
  }
  out.csv = csv_row({"method", "k", "t", "eps", "trials", "passed", "failed", "errors", "precondition_failures",
                     "median_ratio", "max_ratio", "target"});
  for (double eps : c.sweep.eps) {
    for (const auto& group : groups) {
      const double param = per_k ? static_cast<double>(group.front()) : static_cast<double>(r);
      std::vector<std::size_t> ts;
      if (c.task == Task::LowRankTail && !per_k && c.sweep.t.empty() && !c.identity_hook) {
        ts = t_values(c, n, regime, static_cast<double>(group.front()), eps);
      } else if (c.task == Task::LowRankGaussian && !per_k && c.sweep.t.empty() && !c.identity_hook) {
        ts = t_values(c, n, regime, static_cast<double>(*std::max_element(group.begin(), group.end())), eps);
      } else {
        ts = t_values(c, n, regime, param, eps);
      }
      for (std::size_t t : ts) {
        // One json array per trial: one record per (method, k).
        const auto per_trial = parallel_map(c.trials, [&](std::size_t i) {
          const std::uint64_t seed = c.seed_base + i;
          json recs = json::array();
          try {
            for (LowRankMethod m : methods) {
              const SketchOp op = c.identity_hook ? SketchOp{SketchKind::IdentityRows, n, n, seed, std::nullopt}
                                                  : lowrank_sketch_op(prob, m, t, seed);
              const KSweep sw = lowrank_sweep_k(prob, m, op, group);
              for (std::size_t j = 0; j < sw.k.size(); ++j) {
                const double target = lowrank_target(m, eps, sw.k[j], r);
                const bool pre = sw.precondition_met[j];
                recs.push_back(json{{"method", std::string(to_string(m))},
                                    {"k", sw.k[j]},
                                    {"t", t},
                                    {"eps", eps},
                                    {"seed", seed},
                                    {"ratio", real_to_json(sw.ratio[j])},
                                    {"target", target},
                                    {"precondition_met", pre},
                                    {"passed", pre && sw.ratio[j] <= target}});
              }
            }
          } catch (const NumericalFailure& e) {
            recs = json::array({json{{"t", t}, {"eps", eps}, {"seed", seed}, {"error", e.what()}}});
          } catch (const DegenerateDistribution& e) {
            recs = json::array({json{{"t", t}, {"eps", eps}, {"seed", seed}, {"error", e.what()}}});
          }
          return recs;
        });
        struct Tally {
          std::size_t passed = 0, failed = 0, pre_fail = 0;
          std::vector<double> ratios;
          double target = 0.0;
        };
        std::map<std::pair<std::string, std::size_t>, Tally> tally;
        std::map<std::string, std::size_t> all_k_pass;
        std::size_t errors = 0;
        for (const auto& recs : per_trial) {
          std::map<std::string, bool> trial_all;
          for (const auto& rec : recs) {
            if (rec.contains("error")) {
              ++errors;
              out.add(rec, true);
              continue;
            }
            const bool ok = rec.at("passed").get<bool>();
            const std::string m = rec.at("method").get<std::string>();
            Tally& tl = tally[{m, rec.at("k").get<std::size_t>()}];
            (ok ? tl.passed : tl.failed) += 1;
            tl.pre_fail += !rec.at("precondition_met").get<bool>();
            if (rec.at("ratio").is_number()) tl.ratios.push_back(rec.at("ratio").get<double>());
            tl.target = rec.at("target").get<double>();
            auto [it, fresh] = trial_all.emplace(m, ok);
            if (!fresh) it->second = it->second && ok;
            out.add(rec, !ok);
          }
          for (const auto& [m, ok] : trial_all) all_k_pass[m] += ok;
        }
        for (LowRankMethod m : methods) {
          const std::string ms(to_string(m));
          for (std::size_t k : group) {
            const Tally& tl = tally[{ms, k}];
            const double mx = tl.ratios.empty() ? NAN : *std::max_element(tl.ratios.begin(), tl.ratios.end());
            out.csv += csv_row({ms, num(k), num(t), fmt(eps), num(c.trials), num(tl.passed), num(tl.failed),
                                num(errors), num(tl.pre_fail), quantile_or_nan(tl.ratios, 0.5), fmt(mx),
                                fmt(tl.target)});
          }
          if (group.size() > 1) {
            const std::size_t p = all_k_pass[ms];
            out.csv += csv_row({ms, "all", num(t), fmt(eps), num(c.trials), num(p), num(c.trials - p - errors),
                                num(errors), "", "", "", ""});
          }
        }
      }
    }
  }
}

inline void run_jl(const ExperimentConfig& c, Sink& out) {
  out.csv = csv_row({"k", "d", "t", "eps", "trials", "failures", "rate", "wilson_lo", "wilson_hi"});
  for (std::size_t k : c.sweep.k) {
    for (std::size_t d : c.sweep.d) {
      const std::vector<std::size_t> ts = c.identity_hook ? std::vector<std::size_t>{d} : c.sweep.t;
      for (std::size_t t : ts) {
        for (double eps : c.sweep.eps) {
          const auto ok = parallel_map(c.trials, [&](std::size_t i) {
            return subspace_jl_trial(k, d, t, eps, c.seed_base + i, c.identity_hook) ? 1 : 0;
          });
          std::size_t fails = 0;
          for (std::size_t i = 0; i < c.trials; ++i) {
            fails += ok[i] == 0;
            out.add(json{{"k", k}, {"d", d}, {"t", t}, {"eps", eps}, {"seed", c.seed_base + i}, {"passed", ok[i] == 1}},
                    ok[i] == 0);
          }
          const auto ci = stats::wilson_interval(fails, c.trials);
          out.csv += csv_row({num(k), num(d), num(t), fmt(eps), num(c.trials), num(fails),
                              fmt(static_cast<double>(fails) / static_cast<double>(c.trials)), fmt(ci.lo),
                              fmt(ci.hi)});
        }
      }
    }
  }
}

inline MatrixEnsemble make_ensemble(const EnsembleConfig& e, std::size_t n) {
  switch (e.kind) {
    case EnsembleKind::RankRFrame: return MatrixEnsemble::rank_r_frame(n, e.r);
    case EnsembleKind::DiagonalRademacher: return MatrixEnsemble::diagonal_rademacher(n);
    default: return MatrixEnsemble::isotropic(n);
  }
}

inline void run_chernoff(const ExperimentConfig& c, Sink& out) {
  out.csv = csv_row({"ensemble", "n", "r", "gamma", "t", "trials", "median", "q90", "q99", "seed_base"});
  for (std::size_t n : c.sweep.n) {
    const MatrixEnsemble e = make_ensemble(*c.ensemble, n);
    const std::string name(to_string(e.kind));
    for (std::size_t t : c.sweep.t) {
      const bool rank_ok = e.r <= t;
      if (!rank_ok) {
        std::cerr << "warning: " << name << " n=" << n << " has r=" << e.r << " > t=" << t
                  << "; the low-rank bound does not apply at this point\n";
      }
      const auto dev = parallel_map(c.trials, [&](std::size_t i) { return deviation_trial(e, t, c.seed_base, i); });
      for (std::size_t i = 0; i < c.trials; ++i) {
        out.add(json{{"ensemble", name},
                     {"n", n},
                     {"r", e.r},
                     {"t", t},
                     {"trial", i},
                     {"deviation", dev[i]},
                     {"r_le_t", rank_ok}},
                false);
      }
      const DeviationQuantiles q = summarize_deviations(dev);
      out.csv += csv_row({name, num(n), num(e.r), fmt(e.gamma), num(t), num(c.trials), fmt(q.median), fmt(q.q90),
                          fmt(q.q99), std::to_string(c.seed_base)});
    }
  }
}

inline void run_rudelson(const ExperimentConfig& c, Sink& out) {
  const DenseMatrix a = load_operand(c, std::nullopt);
  const double sr = stable_rank(a);
  const double norm = spectral_norm(a);
  out.csv = csv_row({"t", "stable_rank", "trials", "exceedances", "rate", "bound"});
  for (std::size_t t : c.sweep.t) {
    if (static_cast<double>(t) < sr - 1e-9) {
      if (!c.allow_small_t) {
        throw PreconditionViolation("t=" + std::to_string(t) + " is below sr(A)=" + fmt(sr) +
                                    "; set allow_small_t to explore");
      }
      std::cerr << "warning: t=" << t << " is below sr(A)=" << fmt(sr) << "\n";
    }
    const auto ratio = parallel_map(c.trials, [&](std::size_t i) {
      return spectral_norm(sign_sketch(t, a.rows(), c.seed_base + i) * a) / norm;
    });
    std::size_t hits = 0;
    for (std::size_t i = 0; i < c.trials; ++i) {
      const bool hit = ratio[i] >= 4.0;
      hits += hit;
      out.add(json{{"t", t}, {"seed", c.seed_base + i}, {"norm_ratio", ratio[i]}, {"exceeded", hit}}, hit);
    }
    out.csv += csv_row({num(t), fmt(sr), num(c.trials), num(hits),
                        fmt(static_cast<double>(hits) / static_cast<double>(c.trials)),
                        fmt(2.0 * std::exp(-static_cast<double>(t) / 2.0))});
  }
}

}  // namespace detail

/// Runs the calibration procedure; writes <output_path>.json and .csv.
inline RunSummary run_calibration(const ExperimentConfig& c, std::ostream* progress = &std::cerr) {
  const double eps = c.sweep.eps.front();
  const std::vector<std::string> keys = c.regimes.empty() ? calibration_regime_keys() : c.regimes;
  std::vector<CalibrationResult> results;
  RunSummary s;
  std::string csv = detail::csv_row({"regime", "case", "formula", "t", "passes", "trials", "constant"});
  for (const auto& key : keys) {
    if (progress) *progress << "calibrating " << key << " ..." << std::flush;
    CalibrationResult r = calibrate_regime(make_calibration_regime(key, eps), c.trials, c.seed_base, c.target_rate);
    if (progress) *progress << " C=" << detail::fmt(r.constant) << "\n";
    for (const auto& sc : r.cases) {
      csv += detail::csv_row({key, sc.label, detail::fmt(sc.formula), detail::num(sc.t), detail::num(sc.passes),
                              detail::num(c.trials), detail::fmt(r.constant)});
      ++s.records;
    }
    results.push_back(std::move(r));
  }
  const std::filesystem::path base = c.output_path;
  const auto json_path = std::filesystem::path(base.string() + ".json");
  const auto csv_path = std::filesystem::path(base.string() + ".csv");
  write_text(json_path, calibration_to_json(results, eps, c.trials, c.seed_base, c.target_rate).dump(2) + "\n");
  write_text(csv_path, csv);
  s.outputs = {json_path, csv_path};
  return s;
}

/// Executes the configured sweep and writes <output_path>.jsonl and .csv.
inline RunSummary run_experiment(const ExperimentConfig& c) {
  validate(c);
  if (c.task == Task::Calibrate) return run_calibration(c);
  detail::Sink sink;
  switch (c.task) {
    case Task::AmmProject:
    case Task::AmmRowSample: detail::run_amm(c, sink); break;
    case Task::Regression: detail::run_regression(c, sink); break;
    case Task::LowRankSign:
    case Task::LowRankGaussian:
    case Task::LowRankLeverage:
    case Task::LowRankTail: detail::run_lowrank(c, sink); break;
    case Task::JlLab: detail::run_jl(c, sink); break;
    case Task::ChernoffLab: detail::run_chernoff(c, sink); break;
    case Task::RudelsonLab: detail::run_rudelson(c, sink); break;
    case Task::Calibrate: break;
  }
  const auto jsonl_path = std::filesystem::path(c.output_path.string() + ".jsonl");
  const auto csv_path = std::filesystem::path(c.output_path.string() + ".csv");
  write_text(jsonl_path, sink.jsonl);
  write_text(csv_path, sink.csv);
  sink.summary.outputs = {jsonl_path, csv_path};
  return sink.summary;
}

}  // namespace sketchspec
