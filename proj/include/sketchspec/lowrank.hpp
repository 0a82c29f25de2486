#pragma once

// Spectral low-rank approximation from a sketch: approx = P_{Atil,k}(A), the
// best rank-k approximation of A projected onto rowspan(Atil), with
// Atil = R A for a sign or Gaussian projection or a leverage-score row sample.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sketchspec/dense_matrix.hpp"
#include "sketchspec/error.hpp"
#include "sketchspec/linalg.hpp"
#include "sketchspec/sketch.hpp"

namespace sketchspec {

enum class LowRankMethod { SignProj, GaussianProj, LeverageSample, TailSignProj, TailFullProj };

inline std::string_view to_string(LowRankMethod m) {
  switch (m) {
    case LowRankMethod::SignProj: return "SignProj";
    case LowRankMethod::GaussianProj: return "GaussianProj";
    case LowRankMethod::LeverageSample: return "LeverageSample";
    case LowRankMethod::TailSignProj: return "TailSignProj";
    case LowRankMethod::TailFullProj: return "TailFullProj";
  }
  return "?";
}

/// Input matrix with its SVD and leverage scores; immutable, so one instance
/// can serve concurrent trials.
class LowRankProblem {
 public:
  explicit LowRankProblem(DenseMatrix a)
      : a_(std::move(a)), factors_(svd(a_)), leverage_(leverage_distribution(factors_)) {}

  const DenseMatrix& matrix() const noexcept { return a_; }
  const SvdFactors& factors() const noexcept { return factors_; }
  std::size_t rank() const noexcept { return factors_.rank(); }
  double norm() const noexcept { return factors_.sigma.front(); }

  /// sigma_{k+1}(A) = ||A - A_k||, zero once k reaches the rank.
  double optimum(std::size_t k) const noexcept { return k < rank() ? factors_.sigma[k] : 0.0; }

  const SampleDistribution& leverage() const noexcept { return leverage_; }

 private:
  DenseMatrix a_;
  SvdFactors factors_;
  SampleDistribution leverage_;
};

struct LowRankResult {
  DenseMatrix approx;
  std::size_t k = 0;
  LowRankMethod method = LowRankMethod::SignProj;
  std::size_t t_used = 0;
  std::uint64_t seed = 0;
  /// ||A - approx|| / ||A - A_k||, see lowrank_ratio for the zero-denominator rule.
  double ratio = 1.0;
  /// sigma_min(R U_k) > 0; always true for methods that do not need it.
  bool precondition_met = true;
  /// sr(A - A_k) <= k; only meaningful for the tail methods.
  bool tail_condition_met = true;
};

namespace detail {

// Error-to-optimum ratio. When the optimum is below 1e-14 ||A|| the ratio is 1
// if the error is below 1e-12 ||A|| and +inf otherwise.
inline double ratio_from(double err, double optimum, double norm_a) {
  if (optimum <= 1e-14 * norm_a) {
    return err <= 1e-12 * norm_a ? 1.0 : std::numeric_limits<double>::infinity();
  }
  return err / optimum;
}

}  // namespace detail

/// sr(A - A_k) = sum_{j>k} sigma_j^2 / sigma_{k+1}^2; 0 when k >= rank(A).
inline double residual_stable_rank(const std::vector<double>& sigma_desc, std::size_t k,
                                   double rel_tol = 0.0) {
  if (k >= sigma_desc.size()) return 0.0;
  const double head = sigma_desc.front();
  const double s = sigma_desc[k];
  if (!(s > rel_tol * head) || s == 0.0) return 0.0;
  double num = 0.0;
  for (std::size_t j = k; j < sigma_desc.size(); ++j) num += sigma_desc[j] * sigma_desc[j];
  return num / (s * s);
}

inline double residual_stable_rank(const DenseMatrix& a, std::size_t k) {
  if (k == 0) throw InvalidArgument("residual_stable_rank needs k >= 1");
  const auto s = singular_values(a);
  return residual_stable_rank(s, k, default_rank_tolerance(a.rows(), a.cols()));
}

/// ||A - approx|| / sigma_{k+1}(A) with the zero-denominator convention.
inline double lowrank_ratio(const DenseMatrix& a, const DenseMatrix& approx, std::size_t k) {
  if (a.rows() != approx.rows() || a.cols() != approx.cols()) {
    throw ShapeError("lowrank_ratio: " + a.shape_string() + " vs " + approx.shape_string());
  }
  if (k == 0) throw InvalidArgument("lowrank_ratio needs k >= 1");
  const auto s = singular_values(a);
  const double norm_a = s.empty() ? 0.0 : s.front();
  const std::size_t r = static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [&](double v) {
    return v > default_rank_tolerance(a.rows(), a.cols()) * norm_a;
  }));
  const double opt = k < r ? s[k] : 0.0;
  return detail::ratio_from(spectral_norm(a - approx), opt, norm_a);
}

/// Same ratio using the cached SVD. Every approximant built here has columns in
/// colspan(A) = colspan(U), so ||A - X|| = ||Sigma V^T - U^T X||, an r x m
/// problem; other X fall back to the full n x m norm.
inline double lowrank_ratio(const LowRankProblem& p, const DenseMatrix& approx, std::size_t k) {
  const DenseMatrix& a = p.matrix();
  if (a.rows() != approx.rows() || a.cols() != approx.cols()) {
    throw ShapeError("lowrank_ratio: " + a.shape_string() + " vs " + approx.shape_string());
  }
  if (k == 0) throw InvalidArgument("lowrank_ratio needs k >= 1");
  const auto& f = p.factors();
  const Eigen::MatrixXd utx = f.U.eigen().transpose() * approx.eigen();
  const double off = (approx.eigen() - f.U.eigen() * utx).norm();
  double err = 0.0;
  if (off <= 1e-13 * std::max(p.norm(), approx.eigen().norm())) {
    const auto r = static_cast<Eigen::Index>(p.rank());
    const Eigen::Map<const Eigen::VectorXd> s(f.sigma.data(), r);
    const Eigen::MatrixXd diff = s.asDiagonal() * f.V.eigen().transpose() - utx;
    const detail::RawSvd d = detail::raw_svd(diff, false);
    err = d.sigma(0);
  } else {
    err = spectral_norm(a - approx);
  }
  return detail::ratio_from(err, p.optimum(k), p.norm());
}

/// Guarantee each method targets at accuracy eps.
inline double lowrank_target(LowRankMethod m, double eps, std::size_t k, std::size_t r) {
  switch (m) {
    case LowRankMethod::SignProj:
    case LowRankMethod::LeverageSample:
    case LowRankMethod::TailFullProj: return 1.0 + eps;
    case LowRankMethod::TailSignProj: return 2.0 + eps;
    case LowRankMethod::GaussianProj: {
      const double rk = r > k ? static_cast<double>(r - k) : 0.0;
      return 2.0 + eps * std::sqrt(rk / static_cast<double>(k));
    }
  }
  return 1.0 + eps;
}

/// sigma_min(R U_k) > 0, evaluated as Atil V_k Sigma_k^-1 = R U_k without R.
inline bool sketch_preserves_top_k(const LowRankProblem& p, const DenseMatrix& atil, std::size_t k) {
  const std::size_t kk = std::min(k, p.rank());
  if (kk == 0) return true;
  const auto ki = static_cast<Eigen::Index>(kk);
  const Eigen::MatrixXd ruk = atil.eigen() * p.factors().V.eigen().leftCols(ki) *
                              Eigen::Map<const Eigen::VectorXd>(p.factors().sigma.data(), ki)
                                  .cwiseInverse()
                                  .asDiagonal();
  if (ruk.rows() < ki) return false;
  const detail::RawSvd s = detail::raw_svd(ruk, false);
  return s.sigma(ki - 1) > default_rank_tolerance(ruk.rows(), ruk.cols()) * std::max(1.0, s.sigma(0));
}

inline SketchOp lowrank_sketch_op(const LowRankProblem& p, LowRankMethod m, std::size_t t, std::uint64_t seed) {
  const std::size_t n = p.matrix().rows();
  switch (m) {
    case LowRankMethod::GaussianProj: return SketchOp{SketchKind::GaussianProjection, t, n, seed, std::nullopt};
    case LowRankMethod::LeverageSample: return SketchOp{SketchKind::RowSample, t, n, seed, p.leverage().probs()};
    default: return SketchOp{SketchKind::SignProjection, t, n, seed, std::nullopt};
  }
}

/// Runs `method` with an explicit sketch op (the IdentityRows hook included).
inline LowRankResult lowrank_with_sketch(const LowRankProblem& p, LowRankMethod method, std::size_t k,
                                         const SketchOp& op) {
  if (k == 0 || k > std::min(p.matrix().rows(), p.matrix().cols())) {
    throw InvalidArgument("k must lie in [1, min(rows, cols)]");
  }
  const DenseMatrix atil = apply_sketch(op, p.matrix());
  const ProjectedFactors pf(p.matrix(), atil);
  LowRankResult res{method == LowRankMethod::TailFullProj ? pf.full() : pf.rank_k(k), k, method, op.t, op.seed};
  res.ratio = lowrank_ratio(p, res.approx, k);
  if (method == LowRankMethod::GaussianProj || method == LowRankMethod::TailSignProj ||
      method == LowRankMethod::TailFullProj) {
    res.precondition_met = sketch_preserves_top_k(p, atil, k);
  }
  if (method == LowRankMethod::TailSignProj || method == LowRankMethod::TailFullProj) {
    res.tail_condition_met = residual_stable_rank(p.factors().sigma, k) <= static_cast<double>(k);
  }
  return res;
}

inline LowRankResult lowrank_sign(const LowRankProblem& p, std::size_t k, std::size_t t, std::uint64_t seed) {
  return lowrank_with_sketch(p, LowRankMethod::SignProj, k, lowrank_sketch_op(p, LowRankMethod::SignProj, t, seed));
}

inline LowRankResult lowrank_gaussian(const LowRankProblem& p, std::size_t k, std::size_t t, std::uint64_t seed) {
  return lowrank_with_sketch(p, LowRankMethod::GaussianProj, k,
                             lowrank_sketch_op(p, LowRankMethod::GaussianProj, t, seed));
}

inline LowRankResult lowrank_leverage(const LowRankProblem& p, std::size_t k, std::size_t t, std::uint64_t seed) {
  return lowrank_with_sketch(p, LowRankMethod::LeverageSample, k,
                             lowrank_sketch_op(p, LowRankMethod::LeverageSample, t, seed));
}

/// Sign sketch; full_rank_mode returns P_Atil(A) (rank <= t) instead of P_{Atil,k}(A).
inline LowRankResult lowrank_tail(const LowRankProblem& p, std::size_t k, std::size_t t, std::uint64_t seed,
                                  bool full_rank_mode) {
  const LowRankMethod m = full_rank_mode ? LowRankMethod::TailFullProj : LowRankMethod::TailSignProj;
  return lowrank_with_sketch(p, m, k, lowrank_sketch_op(p, m, t, seed));
}

inline LowRankResult lowrank_sign(const DenseMatrix& a, std::size_t k, std::size_t t, std::uint64_t seed) {
  return lowrank_sign(LowRankProblem(a), k, t, seed);
}

inline LowRankResult lowrank_gaussian(const DenseMatrix& a, std::size_t k, std::size_t t, std::uint64_t seed) {
  return lowrank_gaussian(LowRankProblem(a), k, t, seed);
}

inline LowRankResult lowrank_leverage(const DenseMatrix& a, std::size_t k, std::size_t t, std::uint64_t seed) {
  return lowrank_leverage(LowRankProblem(a), k, t, seed);
}

inline LowRankResult lowrank_tail(const DenseMatrix& a, std::size_t k, std::size_t t, std::uint64_t seed,
                                  bool full_rank_mode) {
  return lowrank_tail(LowRankProblem(a), k, t, seed, full_rank_mode);
}

/// Ratios for several k from one sketch and one SVD of the projected matrix.
struct KSweep {
  std::vector<std::size_t> k;
  std::vector<double> ratio;
  std::vector<bool> precondition_met;
};

inline KSweep lowrank_sweep_k(const LowRankProblem& p, LowRankMethod method, const SketchOp& op,
                              const std::vector<std::size_t>& ks) {
  const DenseMatrix atil = apply_sketch(op, p.matrix());
  const ProjectedFactors pf(p.matrix(), atil);
  const bool check = method == LowRankMethod::GaussianProj || method == LowRankMethod::TailSignProj ||
                     method == LowRankMethod::TailFullProj;
  const auto& f = p.factors();
  const auto r = static_cast<Eigen::Index>(p.rank());
  // P_{Atil,k}(A) = u_k s_k w_k^T with u in colspan(A), so every residual is
  // measured as Sigma V^T - (U^T u_k) s_k w_k^T (r x m).
  const Eigen::MatrixXd utu = f.U.eigen().transpose() * pf.left();
  const bool reduced = (pf.left() - f.U.eigen() * utu).norm() <= 1e-10 * std::sqrt(static_cast<double>(pf.rank()) + 1.0);
  const Eigen::MatrixXd target = Eigen::Map<const Eigen::VectorXd>(f.sigma.data(), r).asDiagonal() *
                                 f.V.eigen().transpose();
  KSweep out;
  for (std::size_t k : ks) {
    if (k == 0) throw InvalidArgument("k must be >= 1");
    const auto kk = static_cast<Eigen::Index>(
        method == LowRankMethod::TailFullProj ? pf.rank() : std::min<std::size_t>(k, pf.rank()));
    double ratio = 0.0;
    if (reduced) {
      const Eigen::MatrixXd diff =
          target - utu.leftCols(kk) * pf.sigma().head(kk).asDiagonal() * pf.right().leftCols(kk).transpose();
      ratio = detail::ratio_from(detail::raw_svd(diff, false).sigma(0), p.optimum(k), p.norm());
    } else {
      ratio = lowrank_ratio(p, method == LowRankMethod::TailFullProj ? pf.full() : pf.rank_k(k), k);
    }
    out.k.push_back(k);
    out.ratio.push_back(ratio);
    out.precondition_met.push_back(!check || sketch_preserves_top_k(p, atil, k));
  }
  return out;
}

}  // namespace sketchspec
