#pragma once

// Calibration of the unspecified constants in the sample-size formulas.
//
// Each regime owns a fixed reference instance and one or more sub-cases, each
// with a formula value f (at the calibration eps) and a per-trial pass
// predicate. For every sub-case the smallest integer t whose pass count over
// seeds seed_base .. seed_base + trials - 1 reaches `required` is found by
// doubling then bisection (the same seeds are reused at every t). The regime
// constant is max over sub-cases of t / f, so ceil(C f) reproduces each t.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "sketchspec/amm.hpp"
#include "sketchspec/dense_matrix.hpp"
#include "sketchspec/error.hpp"
#include "sketchspec/generator.hpp"
#include "sketchspec/linalg.hpp"
#include "sketchspec/lowrank.hpp"
#include "sketchspec/parallel.hpp"
#include "sketchspec/regression.hpp"
#include "sketchspec/rng.hpp"
#include "sketchspec/stats.hpp"

namespace sketchspec {

/// Fixed reference instances.
namespace reference {

inline constexpr std::size_t kAmmRank = 5;
inline constexpr std::size_t kAmmCols = 40;
inline constexpr std::size_t kAmmRows = 2048;
inline constexpr std::size_t kRowSampleRank = 10;
inline constexpr std::size_t kRegressionRank = 20;
inline constexpr std::size_t kRegressionRows = 4096;
inline constexpr std::size_t kRegressionCols = 40;
inline constexpr std::size_t kLowRankRank = 40;
inline constexpr std::size_t kTailK = 22;
inline constexpr std::size_t kGaussianKs[] = {1, 2, 5, 10, 20};

struct Pair {
  DenseMatrix a;
  DenseMatrix b;
};

/// Two independent rank-5 operands with unit singular values, n x 40 each.
inline Pair amm_project_pair(std::size_t n = kAmmRows) {
  return {generate({n, kAmmCols, ExactRank{kAmmRank}, 11}), generate({n, kAmmCols, ExactRank{kAmmRank}, 12})};
}

/// Two independent operands of stable rank 10 (ten unit singular values).
inline Pair amm_rowsample_pair(std::size_t n = kAmmRows) {
  return {generate({n, kAmmCols, ExactRank{kRowSampleRank}, 13}),
          generate({n, kAmmCols, ExactRank{kRowSampleRank}, 14})};
}

struct RegressionInstance {
  DenseMatrix a;
  Vector b;
};

/// Rank-20 A (4096 x 40, unit spectrum) and b = A g + w with ||w|| ~ ||A g||.
inline RegressionInstance regression_problem() {
  DenseMatrix a = generate({kRegressionRows, kRegressionCols, ExactRank{kRegressionRank}, 15});
  Vector b = regression_rhs(a, 15, std::nullopt, kRegressionRank);
  return {std::move(a), std::move(b)};
}

/// Rank-40 A with sigma_j = 1/j, 2048 x 160.
inline DenseMatrix lowrank_powerlaw() { return generate({2048, 160, PowerLaw{1.0, kLowRankRank}, 16}); }

/// Full-rank A with sigma_j = 1/j, 2048 x 256; sr(A - A_22) ~ 21.4 <= 22.
inline DenseMatrix tail_powerlaw() { return generate({2048, 256, PowerLaw{1.0, 0}, 17}); }

}  // namespace reference

struct CalibrationSubCase {
  std::string label;
  double formula = 1.0;
  std::function<bool(std::size_t t, std::uint64_t seed)> pass;
  /// Largest t worth trying; exceeding it means the target is unreachable.
  std::size_t t_max = 1'000'000;
};

struct CalibrationRegime {
  std::string key;
  double eps = 0.25;
  std::vector<CalibrationSubCase> cases;
};

inline const std::vector<std::string>& calibration_regime_keys() {
  static const std::vector<std::string> keys{"amm-project",       "amm-rowsample",   "regression-approx",
                                             "regression-distance", "lowrank-sign",  "lowrank-gaussian",
                                             "lowrank-leverage",  "lowrank-tail"};
  return keys;
}

/// Sample-size formula of a calibration regime (natural log).
inline double regime_formula(const std::string& key, double param, double eps) {
  SampleSizeQuery q;
  q.rank_param = param;
  q.eps = eps;
  if (key == "amm-project" || key == "lowrank-sign" || key == "regression-distance" || key == "lowrank-gaussian") {
    q.regime = SampleRegime::ProjRank;
  } else if (key == "amm-rowsample" || key == "lowrank-leverage") {
    q.regime = SampleRegime::RowSampleStableRank;
  } else if (key == "regression-approx") {
    q.regime = SampleRegime::RegressionRank;
  } else if (key == "lowrank-tail") {
    q.regime = SampleRegime::ProjStableRank;
  } else {
    throw InvalidQuery("unknown calibration regime '" + key + "'");
  }
  return sample_size_formula(q);
}

/// t = ceil(C f) for a regime.
inline std::size_t regime_sample_size(const std::string& key, double param, double eps, double constant) {
  if (!(constant > 0.0)) throw InvalidQuery("constant must be > 0");
  const double v = constant * regime_formula(key, param, eps);
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(v - 1e-9)));
}

/// Per-trial predicates on the reference instances at accuracy eps.
inline CalibrationRegime make_calibration_regime(const std::string& key, double eps) {
  CalibrationRegime reg{key, eps, {}};
  if (key == "amm-project" || key == "amm-rowsample") {
    const bool project = key == "amm-project";
    auto pair = std::make_shared<reference::Pair>(project ? reference::amm_project_pair()
                                                          : reference::amm_rowsample_pair());
    auto ref = std::make_shared<AmmReference>(AmmReference::of(pair->a, pair->b));
    const double param = project ? static_cast<double>(std::max(numerical_rank(pair->a), numerical_rank(pair->b)))
                                 : std::max(stable_rank(pair->a), stable_rank(pair->b));
    reg.cases.push_back({"all", regime_formula(key, param, eps), [=](std::size_t t, std::uint64_t seed) {
                           return project ? amm_project(pair->a, pair->b, t, seed, eps, ref.get()).report.passed
                                          : amm_row_sample(pair->a, pair->b, t, seed, eps, ref.get()).report.passed;
                         }});
    return reg;
  }
  if (key == "regression-approx" || key == "regression-distance") {
    auto inst = std::make_shared<reference::RegressionInstance>(reference::regression_problem());
    auto exact = std::make_shared<RegressionSolution>(solve_exact(inst->a, inst->b));
    const double smin = smallest_positive_singular_value(inst->a);
    const bool approx = key == "regression-approx";
    const double r = static_cast<double>(numerical_rank(inst->a));
    reg.cases.push_back({"all", regime_formula(key, r, eps),
                         [=](std::size_t t, std::uint64_t seed) {
                           const auto sk = solve_sketched(inst->a, inst->b, t, seed);
                           const auto rep = regression_report(inst->a, inst->b, *exact, sk, eps, smin);
                           return approx ? rep.passed_approx : rep.passed_distance;
                         },
                         reference::kRegressionRows * 4});
    return reg;
  }
  if (key == "lowrank-sign" || key == "lowrank-leverage") {
    auto prob = std::make_shared<LowRankProblem>(reference::lowrank_powerlaw());
    const LowRankMethod m = key == "lowrank-sign" ? LowRankMethod::SignProj : LowRankMethod::LeverageSample;
    const std::size_t r = prob->rank();
    std::vector<std::size_t> ks(r);
    for (std::size_t k = 0; k < r; ++k) ks[k] = k + 1;
    reg.cases.push_back({"all-k", regime_formula(key, static_cast<double>(r), eps),
                         [=](std::size_t t, std::uint64_t seed) {
                           const KSweep sw = lowrank_sweep_k(*prob, m, lowrank_sketch_op(*prob, m, t, seed), ks);
                           const double target = lowrank_target(m, eps, 1, r);
                           return std::all_of(sw.ratio.begin(), sw.ratio.end(), [&](double x) { return x <= target; });
                         },
                         20000});
    return reg;
  }
  if (key == "lowrank-gaussian") {
    auto prob = std::make_shared<LowRankProblem>(reference::lowrank_powerlaw());
    const std::size_t r = prob->rank();
    for (std::size_t k : reference::kGaussianKs) {
      reg.cases.push_back({"k=" + std::to_string(k), regime_formula(key, static_cast<double>(k), eps),
                           [=](std::size_t t, std::uint64_t seed) {
                             const auto res = lowrank_gaussian(*prob, k, t, seed);
                             return res.precondition_met && res.ratio <= lowrank_target(res.method, eps, k, r);
                           },
                           20000});
    }
    return reg;
  }
  if (key == "lowrank-tail") {
    auto prob = std::make_shared<LowRankProblem>(reference::tail_powerlaw());
    const std::size_t k = reference::kTailK;
    for (bool full : {false, true}) {
      reg.cases.push_back({full ? "full" : "rank-k", regime_formula(key, static_cast<double>(k), eps),
                           [=](std::size_t t, std::uint64_t seed) {
                             const auto res = lowrank_tail(*prob, k, t, seed, full);
                             return res.precondition_met && res.ratio <= lowrank_target(res.method, eps, k, k);
                           },
                           20000});
    }
    return reg;
  }
  throw InvalidQuery("unknown calibration regime '" + key + "'");
}

/// Smallest pass count x out of `trials` whose 95% Wilson lower bound is >= rate.
inline std::size_t required_passes(std::size_t trials, double rate) {
  for (std::size_t x = 0; x <= trials; ++x) {
    if (stats::wilson_interval(x, trials).lo >= rate) return x;
  }
  return trials + 1;
}

/// Whether at least `required` of the trials pass at t. Stops as soon as the
/// answer is decided; trials run in index-ordered parallel batches.
inline bool reaches_target(const CalibrationSubCase& c, std::size_t t, std::size_t trials, std::uint64_t seed_base,
                           std::size_t required, std::size_t* passes_out = nullptr) {
  const std::size_t batch = std::max<std::size_t>(4, thread_count());
  std::size_t passes = 0;
  std::size_t done = 0;
  while (done < trials) {
    const std::size_t len = std::min(batch, trials - done);
    const auto ok = parallel_map(len, [&](std::size_t i) { return c.pass(t, seed_base + done + i) ? 1 : 0; });
    for (int v : ok) passes += static_cast<std::size_t>(v);
    done += len;
    if (!passes_out) {
      if (passes >= required) return true;
      if (passes + (trials - done) < required) return false;
    }
  }
  if (passes_out) *passes_out = passes;
  return passes >= required;
}

struct SubCaseCalibration {
  std::string label;
  double formula = 0.0;
  std::size_t t = 0;
  std::size_t passes = 0;
};

struct CalibrationResult {
  std::string key;
  double eps = 0.25;
  double constant = 0.0;
  std::size_t trials = 0;
  std::size_t required = 0;
  std::uint64_t seed_base = 0;
  std::vector<SubCaseCalibration> cases;
};

/// Smallest t reaching the target for one sub-case (doubling, then bisection).
inline std::size_t minimal_sample_size(const CalibrationSubCase& c, std::size_t trials, std::uint64_t seed_base,
                                       std::size_t required) {
  std::size_t hi = 1;
  while (!reaches_target(c, hi, trials, seed_base, required)) {
    if (hi >= c.t_max) throw NumericalFailure("sub-case '" + c.label + "' never reached the pass target");
    hi = std::min(hi * 2, c.t_max);
  }
  std::size_t lo = hi / 2;  // fails (or 0)
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (reaches_target(c, mid, trials, seed_base, required)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

inline CalibrationResult calibrate_regime(const CalibrationRegime& reg, std::size_t trials, std::uint64_t seed_base,
                                          double target_rate = 0.9) {
  if (trials == 0) throw InvalidArgument("calibration needs trials >= 1");
  CalibrationResult res;
  res.key = reg.key;
  res.eps = reg.eps;
  res.trials = trials;
  res.seed_base = seed_base;
  res.required = required_passes(trials, target_rate);
  if (res.required > trials) throw InvalidArgument("too few trials to certify the pass target");
  for (const auto& c : reg.cases) {
    SubCaseCalibration sc{c.label, c.formula, minimal_sample_size(c, trials, seed_base, res.required), 0};
    reaches_target(c, sc.t, trials, seed_base, res.required, &sc.passes);
    res.constant = std::max(res.constant, static_cast<double>(sc.t) / c.formula);
    res.cases.push_back(sc);
  }
  return res;
}

}  // namespace sketchspec
