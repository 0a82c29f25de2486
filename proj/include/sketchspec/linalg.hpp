#pragma once

// Deterministic dense primitives: SVD, norms, stable rank, pseudo-inverse,
// truncations, row-space projectors and the Rayleigh-sandwich decision
// procedure. Everything here is a pure function of its arguments.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sketchspec/dense_matrix.hpp"
#include "sketchspec/error.hpp"
#include "sketchspec/rng.hpp"

namespace sketchspec {

/// Relative threshold for declaring a singular value zero:
/// max(rows, cols) * machine epsilon, applied as tol * sigma_1.
inline double default_rank_tolerance(std::size_t rows, std::size_t cols) {
  return static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon();
}

/// Thin SVD truncated to the numerical rank r: U is n x r, V is m x r and
/// sigma is strictly positive and non-increasing.
struct SvdFactors {
  DenseMatrix U;
  std::vector<double> sigma;
  DenseMatrix V;
  double rank_tolerance;

  std::size_t rank() const noexcept { return sigma.size(); }
};

struct EpsSandwichVerdict {
  bool holds = false;
  /// Smallest eps for which the sandwich holds; +inf when Atil sees a null
  /// direction of A.
  double worst_ratio = 0.0;
  /// Unit direction in R^m attaining worst_ratio.
  std::optional<Vector> witness_direction;
};

namespace detail {

struct RawSvd {
  Eigen::MatrixXd U;      // n x q
  Eigen::VectorXd sigma;  // q, non-increasing
  Eigen::MatrixXd V;      // m x q
};

// SVD of a block with n >= m. BDCSVD can return NaN on some exactly
// rank-deficient inputs (observed with Eigen 3.4), so non-finite or
// unconverged results are recomputed with the slower Jacobi solver.
inline void square_svd(const Eigen::MatrixXd& a, bool vectors, Eigen::VectorXd& sigma, Eigen::MatrixXd* u,
                       Eigen::MatrixXd* v) {
  const unsigned opts = vectors ? (Eigen::ComputeThinU | Eigen::ComputeThinV) : 0u;
  {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(a, opts);
    if (svd.info() == Eigen::Success && svd.singularValues().allFinite() &&
        (!vectors || (svd.matrixU().allFinite() && svd.matrixV().allFinite()))) {
      sigma = svd.singularValues();
      if (vectors) {
        *u = svd.matrixU();
        *v = svd.matrixV();
      }
      return;
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, opts);
  if (svd.info() != Eigen::Success) throw NumericalFailure("SVD did not converge");
  sigma = svd.singularValues();
  if (vectors) {
    *u = svd.matrixU();
    *v = svd.matrixV();
  }
}

// Thin SVD. Tall inputs are QR-reduced first and wide inputs are transposed,
// so the bidiagonal solver only ever sees a square-ish block.
inline RawSvd raw_svd(const Eigen::Ref<const Eigen::MatrixXd>& a, bool vectors) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = a.cols();
  if (n < m) {
    RawSvd t = raw_svd(a.transpose(), vectors);
    return RawSvd{std::move(t.V), std::move(t.sigma), std::move(t.U)};
  }
  RawSvd out;
  if (n > 2 * m) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    Eigen::MatrixXd ur;
    square_svd(r, vectors, out.sigma, &ur, &out.V);
    if (vectors) {
      out.U = Eigen::MatrixXd::Zero(n, m);
      out.U.topRows(m) = ur;
      out.U.applyOnTheLeft(qr.householderQ());
    }
  } else {
    square_svd(a, vectors, out.sigma, &out.U, &out.V);
  }
  if (!out.sigma.allFinite()) throw NumericalFailure("SVD produced non-finite values");
  return out;
}

inline Eigen::Index count_above(const Eigen::VectorXd& sigma, double rel_tol) {
  if (sigma.size() == 0 || sigma(0) <= 0.0) return 0;
  const double cut = rel_tol * sigma(0);
  Eigen::Index r = 0;
  while (r < sigma.size() && sigma(r) > cut) ++r;
  return r;
}

/// Orthonormal basis of rowspan(c) as the rows of a (rank x m) matrix.
inline Eigen::MatrixXd rowspace_basis(const Eigen::Ref<const Eigen::MatrixXd>& c,
                                      std::optional<double> tol = std::nullopt) {
  const double rel = tol.value_or(default_rank_tolerance(c.rows(), c.cols()));
  RawSvd s = raw_svd(c, true);
  const Eigen::Index r = count_above(s.sigma, rel);
  return s.V.leftCols(r).transpose();
}

inline double spectral_norm_power(const Eigen::Ref<const Eigen::MatrixXd>& a) {
  constexpr int kMaxIter = 10000;
  constexpr double kRelTol = 1e-10;
  Rng rng(0x5E5E5E);
  Eigen::VectorXd x(a.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.next_gaussian();
  x.normalize();
  double lambda = 0.0;
  for (int it = 0; it < kMaxIter; ++it) {
    Eigen::VectorXd y = a.transpose() * (a * x);
    const double next = y.norm();
    if (next == 0.0) return 0.0;
    x = y / next;
    if (std::abs(next - lambda) <= kRelTol * next) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(lambda);
}

}  // namespace detail

/// All min(rows, cols) singular values, non-increasing, zeros included.
inline std::vector<double> singular_values(const DenseMatrix& a) {
  const detail::RawSvd s = detail::raw_svd(a.eigen(), false);
  return {s.sigma.data(), s.sigma.data() + s.sigma.size()};
}

inline SvdFactors svd(const DenseMatrix& a, std::optional<double> tol = std::nullopt) {
  const double rel = tol.value_or(default_rank_tolerance(a.rows(), a.cols()));
  if (rel < 0.0) throw InvalidArgument("svd tolerance must be non-negative");
  if (a.eigen().isZero(0.0)) throw NoSpectrum("SVD of the zero matrix");
  detail::RawSvd s = detail::raw_svd(a.eigen(), true);
  const Eigen::Index r = detail::count_above(s.sigma, rel);
  if (r == 0) throw NoSpectrum("no singular value above tolerance");
  return SvdFactors{DenseMatrix(s.U.leftCols(r)),
                    std::vector<double>(s.sigma.data(), s.sigma.data() + r),
                    DenseMatrix(s.V.leftCols(r)), rel};
}

inline std::size_t numerical_rank(const DenseMatrix& a, std::optional<double> tol = std::nullopt) {
  const double rel = tol.value_or(default_rank_tolerance(a.rows(), a.cols()));
  const detail::RawSvd s = detail::raw_svd(a.eigen(), false);
  return static_cast<std::size_t>(detail::count_above(s.sigma, rel));
}

/// sigma_1(A). Full SVD when min(rows, cols) <= 512, power iteration on A^T A otherwise.
inline double spectral_norm(const DenseMatrix& a) {
  if (std::min(a.rows(), a.cols()) <= 512) {
    const detail::RawSvd s = detail::raw_svd(a.eigen(), false);
    return s.sigma.size() == 0 ? 0.0 : s.sigma(0);
  }
  return detail::spectral_norm_power(a.eigen());
}

inline double frobenius_norm(const DenseMatrix& a) { return a.eigen().norm(); }

/// ||A||_F^2 / ||A||^2.
inline double stable_rank(const DenseMatrix& a) {
  const double s = spectral_norm(a);
  if (s == 0.0) throw NoSpectrum("stable rank of the zero matrix");
  const double f = frobenius_norm(a);
  return (f * f) / (s * s);
}

/// Moore-Penrose pseudo-inverse; singular values at or below tol * sigma_1 count as zero.
inline DenseMatrix pseudo_inverse(const DenseMatrix& a, std::optional<double> tol = std::nullopt) {
  const double rel = tol.value_or(default_rank_tolerance(a.rows(), a.cols()));
  detail::RawSvd s = detail::raw_svd(a.eigen(), true);
  const Eigen::Index r = detail::count_above(s.sigma, rel);
  if (r == 0) return DenseMatrix(a.cols(), a.rows());
  Eigen::MatrixXd vs = s.V.leftCols(r) * s.sigma.head(r).cwiseInverse().asDiagonal();
  return DenseMatrix(Eigen::MatrixXd(vs * s.U.leftCols(r).transpose()));
}

/// A_k = U_k Sigma_k V_k^T. Returns A unchanged when k >= rank(A). With
/// sigma_k == sigma_{k+1} the first k triplets of the SVD ordering are kept.
inline DenseMatrix best_rank_k(const DenseMatrix& a, std::size_t k) {
  if (k == 0) throw InvalidArgument("best_rank_k needs k >= 1");
  if (a.eigen().isZero(0.0)) return a;
  detail::RawSvd s = detail::raw_svd(a.eigen(), true);
  const auto r = static_cast<std::size_t>(
      detail::count_above(s.sigma, default_rank_tolerance(a.rows(), a.cols())));
  if (k >= r) return a;
  const auto kk = static_cast<Eigen::Index>(k);
  return DenseMatrix(Eigen::MatrixXd(s.U.leftCols(kk) * s.sigma.head(kk).asDiagonal() *
                                     s.V.leftCols(kk).transpose()));
}

/// P_C(A) = A C^+ C, computed as A Q^T Q with Q an orthonormal basis of rowspan(C).
inline DenseMatrix project_onto_rowspace(const DenseMatrix& a, const DenseMatrix& c) {
  if (a.cols() != c.cols()) {
    throw ShapeError("project_onto_rowspace: cols(A)=" + std::to_string(a.cols()) +
                     " != cols(C)=" + std::to_string(c.cols()));
  }
  const Eigen::MatrixXd q = detail::rowspace_basis(c.eigen());
  if (q.rows() == 0) return DenseMatrix(a.rows(), a.cols());
  return DenseMatrix(Eigen::MatrixXd((a.eigen() * q.transpose()) * q));
}

/// SVD of A projected onto rowspan(C), kept in factored form so that the best
/// rank-k approximation of P_C(A) is available for every k from one
/// decomposition.
class ProjectedFactors {
 public:
  ProjectedFactors(const DenseMatrix& a, const DenseMatrix& c) {
    if (a.cols() != c.cols()) {
      throw ShapeError("projection: cols(A)=" + std::to_string(a.cols()) +
                       " != cols(C)=" + std::to_string(c.cols()));
    }
    rows_ = a.rows();
    cols_ = a.cols();
    basis_ = detail::rowspace_basis(c.eigen());
    if (basis_.rows() == 0) return;
    const Eigen::MatrixXd aq = a.eigen() * basis_.transpose();
    detail::RawSvd s = detail::raw_svd(aq, true);
    const Eigen::Index r = detail::count_above(s.sigma, default_rank_tolerance(aq.rows(), aq.cols()));
    u_ = s.U.leftCols(r);
    sigma_ = s.sigma.head(r);
    // Right singular vectors mapped back to R^m.
    w_ = basis_.transpose() * s.V.leftCols(r);
  }

  /// Rank of P_C(A).
  std::size_t rank() const noexcept { return static_cast<std::size_t>(sigma_.size()); }
  std::size_t basis_dim() const noexcept { return static_cast<std::size_t>(basis_.rows()); }
  const Eigen::VectorXd& sigma() const noexcept { return sigma_; }
  /// Left singular vectors of P_C(A) (rows(A) x rank).
  const Eigen::MatrixXd& left() const noexcept { return u_; }
  /// Right singular vectors of P_C(A) in R^cols(A) (cols(A) x rank).
  const Eigen::MatrixXd& right() const noexcept { return w_; }

  /// Best rank-k approximation of P_C(A), i.e. P_{C,k}(A).
  DenseMatrix rank_k(std::size_t k) const {
    if (k == 0) throw InvalidArgument("rank must be >= 1");
    const Eigen::Index kk = std::min<Eigen::Index>(static_cast<Eigen::Index>(k), sigma_.size());
    if (kk == 0) return DenseMatrix(rows_, cols_);
    return DenseMatrix(Eigen::MatrixXd(u_.leftCols(kk) * sigma_.head(kk).asDiagonal() *
                                       w_.leftCols(kk).transpose()));
  }

  /// P_C(A) itself.
  DenseMatrix full() const {
    if (sigma_.size() == 0) return DenseMatrix(rows_, cols_);
    return rank_k(static_cast<std::size_t>(sigma_.size()));
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Eigen::MatrixXd basis_;
  Eigen::MatrixXd u_;
  Eigen::VectorXd sigma_;
  Eigen::MatrixXd w_;
};

/// P_{C,k}(A): best rank-k approximation of P_C(A).
inline DenseMatrix project_rank_k(const DenseMatrix& a, const DenseMatrix& c, std::size_t k) {
  if (k == 0) throw InvalidArgument("project_rank_k needs k >= 1");
  return ProjectedFactors(a, c).rank_k(k);
}

/// Decides whether (1-eps) x^T A^T A x <= x^T Atil^T Atil x <= (1+eps) x^T A^T A x
/// for every x. With A = U S V^T the supremum of
/// |x^T (Atil^T Atil - A^T A) x| / x^T A^T A x over rowspan(A) equals
/// max |s_i(Atil V S^-1)^2 - 1|; any mass of Atil on null(A) makes it +inf.
inline EpsSandwichVerdict check_rayleigh_sandwich(const DenseMatrix& a, const DenseMatrix& atil,
                                                  double eps) {
  if (a.cols() != atil.cols()) {
    throw ShapeError("check_rayleigh_sandwich: cols(A)=" + std::to_string(a.cols()) +
                     " != cols(Atil)=" + std::to_string(atil.cols()));
  }
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("eps must lie in (0,1)");
  if (a.eigen().isZero(0.0)) throw NoSpectrum("check_rayleigh_sandwich with zero A");

  detail::RawSvd s = detail::raw_svd(a.eigen(), true);
  const Eigen::Index r = detail::count_above(s.sigma, default_rank_tolerance(a.rows(), a.cols()));
  const Eigen::MatrixXd v = s.V.leftCols(r);
  const Eigen::MatrixXd atv = atil.eigen() * v;

  EpsSandwichVerdict verdict;
  const Eigen::MatrixXd off_range = atil.eigen() - atv * v.transpose();
  const double atil_norm = spectral_norm(atil);
  if (atil_norm > 0.0 && r < static_cast<Eigen::Index>(a.cols())) {
    detail::RawSvd leak = detail::raw_svd(off_range, true);
    if (leak.sigma.size() > 0 && leak.sigma(0) > 1e-10 * atil_norm) {
      verdict.holds = false;
      verdict.worst_ratio = std::numeric_limits<double>::infinity();
      verdict.witness_direction = Vector(leak.V.col(0));
      return verdict;
    }
  }

  const Eigen::MatrixXd g = atv * s.sigma.head(r).cwiseInverse().asDiagonal();  // t x r
  detail::RawSvd gs = detail::raw_svd(g, true);
  // Singular values of G padded with zeros up to r (when t < r).
  double worst = 0.0;
  Eigen::VectorXd best_u = Eigen::VectorXd::Zero(r);
  const Eigen::Index q = gs.sigma.size();
  for (Eigen::Index i = 0; i < q; ++i) {
    const double dev = std::abs(gs.sigma(i) * gs.sigma(i) - 1.0);
    if (i == 0 || dev > worst) {
      worst = dev;
      best_u = gs.V.col(i);
    }
  }
  if (q < r && worst <= 1.0) {
    // Directions of R^r outside the row space of G are annihilated: deviation 1.
    const Eigen::MatrixXd comp = Eigen::MatrixXd::Identity(r, r) - gs.V * gs.V.transpose();
    Eigen::Index col = 0;
    comp.colwise().norm().maxCoeff(&col);
    best_u = comp.col(col).normalized();
    worst = 1.0;
  }
  Vector x = v * (s.sigma.head(r).cwiseInverse().asDiagonal() * best_u);
  if (x.norm() > 0.0) x.normalize();
  verdict.worst_ratio = worst;
  verdict.holds = worst <= eps;
  verdict.witness_direction = std::move(x);
  return verdict;
}

}  // namespace sketchspec
