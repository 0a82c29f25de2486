#pragma once

// Sketch-and-solve least squares: x~ = (R A)^+ R b with one sign sketch R
// applied jointly to A and b.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include <Eigen/Dense>

#include "sketchspec/dense_matrix.hpp"
#include "sketchspec/error.hpp"
#include "sketchspec/linalg.hpp"
#include "sketchspec/sketch.hpp"

namespace sketchspec {

struct RegressionSolution {
  Vector x;
  double residual_norm = 0.0;
  bool sketched = false;
  std::optional<std::size_t> t_used;
  std::optional<std::uint64_t> seed;
};

struct RegressionReport {
  /// ||b - A x~|| / ||b - A x_opt||; 1 when both residuals are <= 1e-12.
  double residual_ratio = 1.0;
  double solution_distance = 0.0;
  /// eps / sigma_min(A) * ||b - A x_opt||.
  double bound_rhs = 0.0;
  double sigma_min = 0.0;
  double eps = 0.0;
  bool passed_approx = false;
  bool passed_distance = false;
};

namespace detail {

inline void check_rhs(const DenseMatrix& a, Eigen::Index rhs_rows) {
  if (static_cast<Eigen::Index>(a.rows()) != rhs_rows) {
    throw ShapeError("rows(A)=" + std::to_string(a.rows()) + " != rows of right-hand side " +
                     std::to_string(rhs_rows));
  }
}

// Minimum-norm least-squares solution of c X = d. Column-pivoted QR when c has
// full column rank, SVD pseudo-inverse otherwise.
inline Eigen::MatrixXd small_solve(const Eigen::MatrixXd& c, const Eigen::MatrixXd& d) {
  if (c.rows() >= c.cols()) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(c);
    qr.setThreshold(default_rank_tolerance(c.rows(), c.cols()));
    if (qr.rank() == c.cols()) return qr.solve(d);
  }
  const RawSvd s = raw_svd(c, true);
  const Eigen::Index r = count_above(s.sigma, default_rank_tolerance(c.rows(), c.cols()));
  if (r == 0) return Eigen::MatrixXd::Zero(c.cols(), d.cols());
  return s.V.leftCols(r) *
         (s.sigma.head(r).cwiseInverse().asDiagonal() * (s.U.leftCols(r).transpose() * d));
}

inline double residual(const DenseMatrix& a, const Vector& b, const Vector& x) {
  return (b - a.eigen() * x).norm();
}

}  // namespace detail

/// x_opt = A^+ b.
inline RegressionSolution solve_exact(const DenseMatrix& a, const Vector& b) {
  detail::check_rhs(a, b.size());
  if (!b.allFinite()) throw InvalidArgument("right-hand side has non-finite entries");
  const detail::RawSvd s = detail::raw_svd(a.eigen(), true);
  const Eigen::Index r = detail::count_above(s.sigma, default_rank_tolerance(a.rows(), a.cols()));
  RegressionSolution sol;
  if (r == 0) {
    sol.x = Vector::Zero(static_cast<Eigen::Index>(a.cols()));
  } else {
    sol.x = s.V.leftCols(r) * (s.sigma.head(r).cwiseInverse().asDiagonal() * (s.U.leftCols(r).transpose() * b));
  }
  sol.residual_norm = detail::residual(a, b, sol.x);
  return sol;
}

/// X~ = (S A)^+ (S B) for an arbitrary sketch op (including the IdentityRows hook).
inline DenseMatrix solve_sketched_multi(const DenseMatrix& a, const DenseMatrix& b, const SketchOp& op) {
  detail::check_rhs(a, static_cast<Eigen::Index>(b.rows()));
  if (op.n != a.rows()) throw ShapeError("sketch ambient dimension != rows(A)");
  // One sketch, applied to [A | B] so both sides see identical randomness.
  Eigen::MatrixXd joint(a.rows(), a.cols() + b.cols());
  joint << a.eigen(), b.eigen();
  const DenseMatrix sk = apply_sketch(op, DenseMatrix(joint));
  const auto m = static_cast<Eigen::Index>(a.cols());
  const Eigen::MatrixXd ra = sk.eigen().leftCols(m);
  const Eigen::MatrixXd rb = sk.eigen().rightCols(static_cast<Eigen::Index>(b.cols()));
  return DenseMatrix(detail::small_solve(ra, rb));
}

inline DenseMatrix solve_sketched_multi(const DenseMatrix& a, const DenseMatrix& b, std::size_t t,
                                        std::uint64_t seed) {
  return solve_sketched_multi(a, b, SketchOp{SketchKind::SignProjection, t, a.rows(), seed, std::nullopt});
}

inline RegressionSolution solve_sketched(const DenseMatrix& a, const Vector& b, const SketchOp& op) {
  detail::check_rhs(a, b.size());
  const DenseMatrix x = solve_sketched_multi(a, DenseMatrix::column(b), op);
  RegressionSolution sol;
  sol.x = x.eigen().col(0);
  sol.residual_norm = detail::residual(a, b, sol.x);
  sol.sketched = true;
  sol.t_used = op.t;
  sol.seed = op.seed;
  return sol;
}

/// x~ = (R A)^+ R b with a t x n sign sketch R.
inline RegressionSolution solve_sketched(const DenseMatrix& a, const Vector& b, std::size_t t, std::uint64_t seed) {
  return solve_sketched(a, b, SketchOp{SketchKind::SignProjection, t, a.rows(), seed, std::nullopt});
}

/// Smallest singular value above the default rank tolerance.
inline double smallest_positive_singular_value(const DenseMatrix& a) {
  const auto s = singular_values(a);
  if (s.empty() || s.front() <= 0.0) return 0.0;
  const double cut = default_rank_tolerance(a.rows(), a.cols()) * s.front();
  double last = 0.0;
  for (double v : s) {
    if (v > cut) last = v;
  }
  return last;
}

/// Compares a sketched solution against the exact one. sigma_min may be
/// supplied to avoid recomputing the spectrum of A on every trial.
inline RegressionReport regression_report(const DenseMatrix& a, const Vector& b, const RegressionSolution& exact,
                                          const RegressionSolution& sketched, double eps,
                                          std::optional<double> sigma_min = std::nullopt) {
  detail::check_rhs(a, b.size());
  const auto m = static_cast<Eigen::Index>(a.cols());
  if (exact.x.size() != m || sketched.x.size() != m) {
    throw MismatchedProblem("solution length does not match cols(A)");
  }
  const double bn = b.norm();
  for (const RegressionSolution* s : {&exact, &sketched}) {
    const double re = detail::residual(a, b, s->x);
    if (std::abs(re - s->residual_norm) > 1e-10 * std::max({re, s->residual_norm, bn, 1e-300})) {
      throw MismatchedProblem("stored residual " + std::to_string(s->residual_norm) +
                              " does not match recomputed " + std::to_string(re));
    }
  }
  RegressionReport rep;
  rep.eps = eps;
  const double r_opt = exact.residual_norm;
  const double r_sk = sketched.residual_norm;
  if (r_opt <= 1e-12 && r_sk <= 1e-12) {
    rep.residual_ratio = 1.0;
  } else if (r_opt <= 1e-12) {
    rep.residual_ratio = std::numeric_limits<double>::infinity();
  } else {
    rep.residual_ratio = r_sk / r_opt;
  }
  rep.solution_distance = (exact.x - sketched.x).norm();
  rep.sigma_min = sigma_min.value_or(smallest_positive_singular_value(a));
  rep.bound_rhs = rep.sigma_min > 0.0 ? eps / rep.sigma_min * r_opt : std::numeric_limits<double>::infinity();
  rep.passed_approx = rep.residual_ratio <= 1.0 + eps;
  rep.passed_distance = rep.solution_distance <= rep.bound_rhs;
  return rep;
}

}  // namespace sketchspec
