#pragma once

// Monte Carlo probes of matrix concentration: deviation quantiles of
// empirical means of random symmetric matrices, subspace embedding failure
// rates for sign sketches, and the ||R A|| >= 4 ||A|| tail.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sketchspec/dense_matrix.hpp"
#include "sketchspec/error.hpp"
#include "sketchspec/linalg.hpp"
#include "sketchspec/rng.hpp"
#include "sketchspec/sketch.hpp"
#include "sketchspec/stats.hpp"

namespace sketchspec {

enum class EnsembleKind { IsotropicOuterProduct, RankRFrame, DiagonalRademacher, Custom };

inline std::string_view to_string(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::IsotropicOuterProduct: return "IsotropicOuterProduct";
    case EnsembleKind::RankRFrame: return "RankRFrame";
    case EnsembleKind::DiagonalRademacher: return "DiagonalRademacher";
    case EnsembleKind::Custom: return "Custom";
  }
  return "?";
}

inline EnsembleKind ensemble_kind_from_string(std::string_view s) {
  for (auto k : {EnsembleKind::IsotropicOuterProduct, EnsembleKind::RankRFrame, EnsembleKind::DiagonalRademacher,
                 EnsembleKind::Custom}) {
    if (to_string(k) == s) return k;
  }
  throw InvalidArgument("unknown ensemble '" + std::string(s) + "'");
}

/// Distribution of a random symmetric n x n matrix M with ||M|| <= gamma a.s.
///   IsotropicOuterProduct: M = n x x^T, x uniform on the sphere (r = 1, gamma = n)
///   RankRFrame:            M = (n/r) sum_j x_j x_j^T over a Haar r-frame (gamma = n/r)
///   DiagonalRademacher:    M = diag(+-1) (r = n, gamma = 1, E M = 0)
///   Custom:                uniform over `support`
struct MatrixEnsemble {
  EnsembleKind kind = EnsembleKind::IsotropicOuterProduct;
  std::size_t n = 1;
  std::size_t r = 1;
  double gamma = 1.0;
  std::vector<DenseMatrix> support;

  static MatrixEnsemble isotropic(std::size_t n) {
    return MatrixEnsemble{EnsembleKind::IsotropicOuterProduct, n, 1, static_cast<double>(n), {}};
  }
  static MatrixEnsemble rank_r_frame(std::size_t n, std::size_t r) {
    if (r == 0 || r > n) throw InvalidArgument("RankRFrame needs 1 <= r <= n");
    return MatrixEnsemble{EnsembleKind::RankRFrame, n, r, static_cast<double>(n) / static_cast<double>(r), {}};
  }
  static MatrixEnsemble diagonal_rademacher(std::size_t n) {
    return MatrixEnsemble{EnsembleKind::DiagonalRademacher, n, n, 1.0, {}};
  }
  static MatrixEnsemble custom(std::vector<DenseMatrix> support) {
    if (support.empty()) throw InvalidArgument("custom ensemble needs a non-empty support");
    const std::size_t n = support.front().rows();
    double gamma = 0.0;
    std::size_t r = 0;
    for (const auto& m : support) {
      if (m.rows() != n || m.cols() != n) throw ShapeError("custom ensemble matrices must be n x n");
      if (!m.eigen().isApprox(m.eigen().transpose(), 1e-12) && !m.eigen().isZero(0.0)) {
        throw InvalidArgument("custom ensemble matrices must be symmetric");
      }
      gamma = std::max(gamma, spectral_norm(m));
      r = std::max(r, numerical_rank(m));
    }
    return MatrixEnsemble{EnsembleKind::Custom, n, r, gamma, std::move(support)};
  }

  void validate() const {
    if (n == 0) throw InvalidArgument("ensemble dimension must be positive");
    if (kind == EnsembleKind::RankRFrame && (r == 0 || r > n)) throw InvalidArgument("RankRFrame needs 1 <= r <= n");
    if (kind == EnsembleKind::Custom && support.empty()) throw InvalidArgument("custom ensemble has no support");
  }
};

/// E(M): I_n for the two low-rank kinds, 0 for DiagonalRademacher, the support mean for Custom.
inline DenseMatrix ensemble_mean(const MatrixEnsemble& e) {
  e.validate();
  switch (e.kind) {
    case EnsembleKind::IsotropicOuterProduct:
    case EnsembleKind::RankRFrame: return DenseMatrix::identity(e.n);
    case EnsembleKind::DiagonalRademacher: return DenseMatrix(e.n, e.n);
    case EnsembleKind::Custom: {
      RowMatrix acc = RowMatrix::Zero(static_cast<Eigen::Index>(e.n), static_cast<Eigen::Index>(e.n));
      for (const auto& m : e.support) acc += m.eigen();
      acc /= static_cast<double>(e.support.size());
      return DenseMatrix(std::move(acc));
    }
  }
  throw InvalidArgument("unknown ensemble");
}

namespace detail {

// Adds one draw of M into the lower triangle of acc (or into diag for the
// diagonal kind).
inline void accumulate_draw(const MatrixEnsemble& e, Rng& rng, Eigen::MatrixXd& acc, Eigen::VectorXd& diag) {
  const auto n = static_cast<Eigen::Index>(e.n);
  switch (e.kind) {
    case EnsembleKind::IsotropicOuterProduct: {
      Eigen::VectorXd x(n);
      for (Eigen::Index i = 0; i < n; ++i) x(i) = rng.next_gaussian();
      x.normalize();
      acc.selfadjointView<Eigen::Lower>().rankUpdate(x, static_cast<double>(e.n));
      return;
    }
    case EnsembleKind::RankRFrame: {
      const Eigen::MatrixXd q = random_orthonormal(e.n, e.r, rng);
      acc.selfadjointView<Eigen::Lower>().rankUpdate(q, e.gamma);
      return;
    }
    case EnsembleKind::DiagonalRademacher: {
      std::uint64_t word = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (i % 64 == 0) word = rng.next_u64();
        diag(i) += (word & 1ULL) ? 1.0 : -1.0;
        word >>= 1;
      }
      return;
    }
    case EnsembleKind::Custom: {
      const auto idx = static_cast<std::size_t>(rng.next_unit() * static_cast<double>(e.support.size()));
      acc.triangularView<Eigen::Lower>() += e.support[std::min(idx, e.support.size() - 1)].eigen();
      return;
    }
  }
}

// ||(1/t) sum_i M_i - E M|| for one fresh batch of t draws.
inline double batch_deviation(const MatrixEnsemble& e, std::size_t t, Rng& rng, const Eigen::MatrixXd& mean) {
  const auto n = static_cast<Eigen::Index>(e.n);
  if (e.kind == EnsembleKind::DiagonalRademacher) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd unused;
    for (std::size_t i = 0; i < t; ++i) accumulate_draw(e, rng, unused, d);
    return d.cwiseAbs().maxCoeff() / static_cast<double>(t);
  }
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd unused;
  if (e.kind == EnsembleKind::RankRFrame && t * e.r >= e.n) {
    // One rank-(t r) update is much faster than t rank-r updates.
    Eigen::MatrixXd frames(n, static_cast<Eigen::Index>(t * e.r));
    for (std::size_t i = 0; i < t; ++i) {
      frames.middleCols(static_cast<Eigen::Index>(i * e.r), static_cast<Eigen::Index>(e.r)) =
          random_orthonormal(e.n, e.r, rng);
    }
    acc.selfadjointView<Eigen::Lower>().rankUpdate(frames, e.gamma);
  } else {
    for (std::size_t i = 0; i < t; ++i) accumulate_draw(e, rng, acc, unused);
  }
  acc /= static_cast<double>(t);
  acc.triangularView<Eigen::Lower>() -= mean;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(acc, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalFailure("symmetric eigensolver did not converge");
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace detail

/// One draw of M.
inline DenseMatrix sample_ensemble(const MatrixEnsemble& e, std::uint64_t seed) {
  e.validate();
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(e.n);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  detail::accumulate_draw(e, rng, acc, diag);
  if (e.kind == EnsembleKind::DiagonalRademacher) return DenseMatrix(Eigen::MatrixXd(diag.asDiagonal()));
  Eigen::MatrixXd full = acc.selfadjointView<Eigen::Lower>();
  return DenseMatrix(full);
}

struct DeviationQuantiles {
  double median = 0.0;
  double q90 = 0.0;
  double q99 = 0.0;
};

struct DeviationCurve {
  std::vector<std::size_t> t_values;
  std::vector<DeviationQuantiles> quantiles;
  /// Raw deviations per t, in trial order.
  std::vector<std::vector<double>> samples;
  std::size_t trials_per_point = 0;
  MatrixEnsemble ensemble;
  std::uint64_t seed_base = 0;
};

/// Seed of trial i at sweep point j: independent of every other (i, j).
inline Rng lab_trial_rng(std::uint64_t seed_base, std::size_t point, std::size_t trial) {
  return Rng(seed_base + trial).split(point);
}

/// Spectral deviation of a t-sample empirical mean for one trial.
inline double deviation_trial(const MatrixEnsemble& e, std::size_t t, std::uint64_t seed_base, std::size_t trial) {
  e.validate();
  if (t == 0) throw InvalidArgument("t must be >= 1");
  const Eigen::MatrixXd mean = ensemble_mean(e).eigen();
  Rng rng = lab_trial_rng(seed_base, t, trial);
  return detail::batch_deviation(e, t, rng, mean);
}

inline DeviationQuantiles summarize_deviations(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  return DeviationQuantiles{stats::quantile_sorted(xs, 0.5), stats::quantile_sorted(xs, 0.9),
                            stats::quantile_sorted(xs, 0.99)};
}

/// For each t, `trials` independent empirical means of t draws; quantiles of
/// ||(1/t) sum M_i - E M|| per t.
inline DeviationCurve deviation_curve(const MatrixEnsemble& e, const std::vector<std::size_t>& t_values,
                                      std::size_t trials, std::uint64_t seed_base) {
  e.validate();
  if (trials < 100) throw InvalidArgument("deviation_curve needs at least 100 trials");
  DeviationCurve c;
  c.t_values = t_values;
  c.trials_per_point = trials;
  c.ensemble = e;
  c.seed_base = seed_base;
  for (std::size_t t : t_values) {
    std::vector<double> dev(trials);
    for (std::size_t i = 0; i < trials; ++i) dev[i] = deviation_trial(e, t, seed_base, i);
    c.quantiles.push_back(summarize_deviations(dev));
    c.samples.push_back(std::move(dev));
  }
  return c;
}

/// Whether a sign sketch embeds one random k-dimensional subspace of R^d:
/// all singular values of R Q inside [sqrt(1-eps), sqrt(1+eps)].
/// identity_hook replaces R by I_d (requires t == d).
inline bool subspace_jl_trial(std::size_t k, std::size_t d, std::size_t t, double eps, std::uint64_t seed,
                              bool identity_hook = false) {
  Rng rng(seed);
  const Eigen::MatrixXd q = random_orthonormal(d, k, rng);
  Eigen::MatrixXd rq;
  if (identity_hook) {
    if (t != d) throw InvalidArgument("identity hook needs t == d");
    rq = q;
  } else {
    rq = sign_sketch(t, d, mix64(seed ^ 0xA5A5A5A5ULL)).eigen() * q;
  }
  if (rq.rows() < static_cast<Eigen::Index>(k)) return false;
  const detail::RawSvd s = detail::raw_svd(rq, false);
  const double hi = std::sqrt(1.0 + eps);
  const double lo = std::sqrt(1.0 - eps);
  return s.sigma(0) <= hi && s.sigma(s.sigma.size() - 1) >= lo;
}

struct RateEstimate {
  std::size_t failures = 0;
  std::size_t trials = 0;
  double rate() const noexcept { return trials ? static_cast<double>(failures) / static_cast<double>(trials) : 0.0; }
};

/// Fraction of trials in which a random k-dim subspace of R^d is not embedded.
inline RateEstimate subspace_jl_failures(std::size_t k, std::size_t d, std::size_t t, double eps, std::size_t trials,
                                         std::uint64_t seed_base, bool identity_hook = false) {
  if (k == 0 || k > d) throw InvalidArgument("subspace_jl needs 1 <= k <= d");
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("eps must lie in (0,1)");
  if (trials == 0 || t == 0) throw InvalidArgument("trials and t must be >= 1");
  RateEstimate est{0, trials};
  for (std::size_t i = 0; i < trials; ++i) {
    if (!subspace_jl_trial(k, d, t, eps, seed_base + i, identity_hook)) ++est.failures;
  }
  return est;
}

inline double subspace_jl_failure_rate(std::size_t k, std::size_t d, std::size_t t, double eps, std::size_t trials,
                                       std::uint64_t seed_base, bool identity_hook = false) {
  return subspace_jl_failures(k, d, t, eps, trials, seed_base, identity_hook).rate();
}

/// Fraction of sign sketches with ||R A|| >= 4 ||A||. Throws
/// PreconditionViolation when t < sr(A) unless allow_small_t is set.
inline RateEstimate rudelson_norm_failures(const DenseMatrix& a, std::size_t t, std::size_t trials,
                                           std::uint64_t seed_base, bool allow_small_t = false) {
  const double sr = stable_rank(a);
  if (static_cast<double>(t) < sr - 1e-9 && !allow_small_t) {
    throw PreconditionViolation("t=" + std::to_string(t) + " is below sr(A)=" + std::to_string(sr));
  }
  if (trials == 0) throw InvalidArgument("trials must be >= 1");
  const double limit = 4.0 * spectral_norm(a);
  RateEstimate est{0, trials};
  for (std::size_t i = 0; i < trials; ++i) {
    const DenseMatrix ra = sign_sketch(t, a.rows(), seed_base + i) * a;
    if (spectral_norm(ra) >= limit) ++est.failures;
  }
  return est;
}

inline double rudelson_norm_rate(const DenseMatrix& a, std::size_t t, std::size_t trials, std::uint64_t seed_base,
                                 bool allow_small_t = false) {
  return rudelson_norm_failures(a, t, trials, seed_base, allow_small_t).rate();
}

}  // namespace sketchspec
