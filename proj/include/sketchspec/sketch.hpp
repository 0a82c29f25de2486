#pragma once

// Random sketching operators: rescaled sign and Gaussian projections and
// i.i.d. row sampling (with replacement) from a data-dependent distribution.
// Every constructor is a pure function of its dimensions, seed and inputs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "sketchspec/dense_matrix.hpp"
#include "sketchspec/error.hpp"
#include "sketchspec/linalg.hpp"
#include "sketchspec/rng.hpp"

namespace sketchspec {

/// IdentityRows is the exactness hook: the sketch is the first t rows of I_n.
enum class SketchKind { SignProjection, GaussianProjection, RowSample, IdentityRows };

enum class DistributionSource { OuterProductNorms, LeverageScores, Custom };

/// Upper bound on t * n for any materialized sketch.
inline constexpr std::size_t kMaxSketchEntries = 100'000'000;

inline std::string_view to_string(SketchKind k) {
  switch (k) {
    case SketchKind::SignProjection: return "SignProjection";
    case SketchKind::GaussianProjection: return "GaussianProjection";
    case SketchKind::RowSample: return "RowSample";
    case SketchKind::IdentityRows: return "IdentityRows";
  }
  return "?";
}

inline SketchKind sketch_kind_from_string(std::string_view s) {
  if (s == "SignProjection") return SketchKind::SignProjection;
  if (s == "GaussianProjection") return SketchKind::GaussianProjection;
  if (s == "RowSample") return SketchKind::RowSample;
  if (s == "IdentityRows") return SketchKind::IdentityRows;
  throw InvalidArgument("unknown sketch kind '" + std::string(s) + "'");
}

inline std::string_view to_string(DistributionSource s) {
  switch (s) {
    case DistributionSource::OuterProductNorms: return "OuterProductNorms";
    case DistributionSource::LeverageScores: return "LeverageScores";
    case DistributionSource::Custom: return "Custom";
  }
  return "?";
}

namespace detail {

// Neumaier-compensated sum; keeps probability vectors summing to 1 within
// 1e-12 even for n in the millions.
inline double compensated_sum(const std::vector<double>& v) {
  double sum = 0.0;
  double c = 0.0;
  for (double x : v) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) {
      c += (sum - t) + x;
    } else {
      c += (x - t) + sum;
    }
    sum = t;
  }
  return sum + c;
}

}  // namespace detail

/// Probability vector over [n] plus a cumulative table for inverse-CDF draws.
class SampleDistribution {
 public:
  /// Validates that probs are in [0,1] and sum to 1 within 1e-12.
  SampleDistribution(std::vector<double> probs, DistributionSource source)
      : probs_(std::move(probs)), source_(source) {
    if (probs_.empty()) throw DegenerateDistribution("empty distribution");
    for (double p : probs_) {
      if (!(p >= 0.0 && p <= 1.0)) throw DegenerateDistribution("probability outside [0,1]");
    }
    const double total = detail::compensated_sum(probs_);
    if (std::abs(total - 1.0) > 1e-12) {
      throw DegenerateDistribution("probabilities sum to " + std::to_string(total));
    }
    support_size_ = static_cast<std::size_t>(
        std::count_if(probs_.begin(), probs_.end(), [](double p) { return p > 0.0; }));
    build_cdf();
  }

  /// Normalizes non-negative weights into a distribution.
  static SampleDistribution from_weights(std::vector<double> weights, DistributionSource source) {
    for (double w : weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw DegenerateDistribution("weights must be finite and >= 0");
    }
    const double total = detail::compensated_sum(weights);
    if (!(total > 0.0)) throw DegenerateDistribution("all sampling weights are zero");
    for (double& w : weights) w /= total;
    return SampleDistribution(std::move(weights), source);
  }

  std::size_t size() const noexcept { return probs_.size(); }
  std::size_t support_size() const noexcept { return support_size_; }
  DistributionSource source() const noexcept { return source_; }
  const std::vector<double>& probs() const noexcept { return probs_; }
  double operator[](std::size_t i) const { return probs_[i]; }

  /// Inverse-CDF lookup for u in [0,1); ties go to the lower index and
  /// zero-probability entries are never returned.
  std::size_t index_for(double u) const {
    const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf_.begin(),
                                                             static_cast<std::ptrdiff_t>(cdf_.size()) - 1));
  }

 private:
  void build_cdf() {
    cdf_.resize(probs_.size());
    double sum = 0.0;
    double c = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
      const double y = probs_[i] - c;
      const double t = sum + y;
      c = (t - sum) - y;
      sum = t;
      cdf_[i] = sum;
      if (probs_[i] > 0.0) last_positive = i;
    }
    for (std::size_t i = last_positive; i < cdf_.size(); ++i) cdf_[i] = 1.0;
  }

  std::vector<double> probs_;
  std::vector<double> cdf_;
  std::size_t support_size_ = 0;
  DistributionSource source_;
};

/// Description of a random sketch; materialize() or apply_sketch() realize it.
struct SketchOp {
  SketchKind kind = SketchKind::SignProjection;
  std::size_t t = 1;
  std::size_t n = 1;
  std::uint64_t seed = 0;
  /// Required iff kind == RowSample.
  std::optional<std::vector<double>> probabilities;

  void validate() const {
    if (t == 0 || n == 0) throw InvalidArgument("sketch dimensions must be positive");
    if (kind == SketchKind::RowSample) {
      if (!probabilities) throw InvalidArgument("RowSample sketch needs probabilities");
      if (probabilities->size() != n) throw ShapeError("probability vector length != n");
      SampleDistribution check(*probabilities, DistributionSource::Custom);
    } else if (probabilities) {
      throw InvalidArgument("probabilities only apply to RowSample sketches");
    }
    if (kind == SketchKind::IdentityRows && t > n) {
      throw InvalidArgument("IdentityRows sketch needs t <= n");
    }
    if (kind != SketchKind::RowSample && t > kMaxSketchEntries / n) {
      throw InvalidArgument("sketch exceeds the entry limit");
    }
  }
};

inline void check_sketch_size(std::size_t t, std::size_t n) {
  if (t == 0 || n == 0) throw InvalidArgument("sketch dimensions must be positive");
  if (t > kMaxSketchEntries / n) throw InvalidArgument("sketch exceeds the entry limit");
}

/// t x n matrix with i.i.d. entries +-1/sqrt(t).
inline DenseMatrix sign_sketch(std::size_t t, std::size_t n, std::uint64_t seed) {
  check_sketch_size(t, n);
  Rng rng(seed);
  const double v = 1.0 / std::sqrt(static_cast<double>(t));
  RowMatrix r(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(n));
  double* out = r.data();
  const std::size_t total = t * n;
  std::uint64_t word = 0;
  for (std::size_t e = 0; e < total; ++e) {
    if (e % 64 == 0) word = rng.next_u64();
    out[e] = (word & 1ULL) ? v : -v;
    word >>= 1;
  }
  return DenseMatrix(std::move(r));
}

/// t x n matrix with i.i.d. N(0, 1/t) entries.
inline DenseMatrix gaussian_sketch(std::size_t t, std::size_t n, std::uint64_t seed) {
  check_sketch_size(t, n);
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(t));
  RowMatrix r(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(n));
  double* out = r.data();
  for (std::size_t e = 0; e < t * n; ++e) out[e] = scale * rng.next_gaussian();
  return DenseMatrix(std::move(r));
}

/// n x r matrix with orthonormal columns, Haar distributed: Q from the QR of a
/// Gaussian matrix with columns sign-fixed so that diag(R) > 0.
inline Eigen::MatrixXd random_orthonormal(std::size_t n, std::size_t r, Rng& rng) {
  if (r == 0 || r > n) throw InvalidArgument("random_orthonormal needs 1 <= r <= n");
  Eigen::MatrixXd g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(r));
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) g(i, j) = rng.next_gaussian();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
  for (Eigen::Index j = 0; j < g.cols(); ++j) {
    if (qr.matrixQR()(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

/// p_i = ||A_(i)|| ||B_(i)|| / sum_j ||A_(j)|| ||B_(j)||.
inline SampleDistribution amm_row_distribution(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("amm_row_distribution: rows(A)=" + std::to_string(a.rows()) +
                     " != rows(B)=" + std::to_string(b.rows()));
  }
  const Eigen::VectorXd na = a.eigen().rowwise().norm();
  const Eigen::VectorXd nb = b.eigen().rowwise().norm();
  std::vector<double> w(a.rows());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = na(Eigen::Index(i)) * nb(Eigen::Index(i));
  return SampleDistribution::from_weights(std::move(w), DistributionSource::OuterProductNorms);
}

/// p_i = ||U_(i)||^2 / r from an existing SVD.
inline SampleDistribution leverage_distribution(const SvdFactors& f) {
  const Eigen::VectorXd lev = f.U.eigen().rowwise().squaredNorm();
  const double r = static_cast<double>(f.rank());
  const double total = lev.sum();
  if (std::abs(total - r) > 1e-8 * r) {
    throw NumericalFailure("leverage scores sum to " + std::to_string(total) + ", expected rank " +
                           std::to_string(f.rank()));
  }
  if (lev.maxCoeff() > 1.0 + 1e-8) throw NumericalFailure("leverage score above 1");
  std::vector<double> w(lev.data(), lev.data() + lev.size());
  for (double& x : w) x = std::clamp(x, 0.0, 1.0);
  return SampleDistribution::from_weights(std::move(w), DistributionSource::LeverageScores);
}

inline SampleDistribution leverage_distribution(const DenseMatrix& a,
                                                std::optional<double> tol = std::nullopt) {
  return leverage_distribution(svd(a, tol));
}

/// t i.i.d. draws (with replacement) from dist.
inline std::vector<std::size_t> sample_indices(const SampleDistribution& dist, std::size_t t,
                                               std::uint64_t seed) {
  if (t == 0) throw InvalidArgument("t must be >= 1");
  Rng rng(seed);
  std::vector<std::size_t> idx(t);
  for (auto& i : idx) i = dist.index_for(rng.next_unit());
  return idx;
}

/// Row k has a single nonzero 1/sqrt(t p_j) at the k-th sampled index j, so E(S^T S) = I_n.
inline DenseMatrix row_sample_sketch(const SampleDistribution& dist, std::size_t t, std::uint64_t seed) {
  check_sketch_size(t, dist.size());
  const auto idx = sample_indices(dist, t, seed);
  RowMatrix s = RowMatrix::Zero(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(dist.size()));
  for (std::size_t k = 0; k < t; ++k) {
    const double p = dist[idx[k]];
    if (!(p > 0.0)) throw DegenerateDistribution("sampled a zero-probability row");
    s(Eigen::Index(k), Eigen::Index(idx[k])) = 1.0 / std::sqrt(static_cast<double>(t) * p);
  }
  return DenseMatrix(std::move(s));
}

/// Gathers the sampled rows of A, each scaled by 1/sqrt(t p_j), without forming S.
inline DenseMatrix gather_rows(const DenseMatrix& a, const SampleDistribution& dist,
                               const std::vector<std::size_t>& idx) {
  if (dist.size() != a.rows()) throw ShapeError("distribution length != rows(A)");
  const double t = static_cast<double>(idx.size());
  RowMatrix out(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(a.cols()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const double p = dist[idx[k]];
    if (!(p > 0.0)) throw DegenerateDistribution("sampled a zero-probability row");
    out.row(Eigen::Index(k)) = a.eigen().row(Eigen::Index(idx[k])) / std::sqrt(t * p);
  }
  return DenseMatrix(std::move(out));
}

inline DenseMatrix identity_rows(std::size_t t, std::size_t n) {
  if (t > n) throw InvalidArgument("IdentityRows sketch needs t <= n");
  return DenseMatrix(RowMatrix(RowMatrix::Identity(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(n))));
}

inline DenseMatrix materialize(const SketchOp& op) {
  op.validate();
  switch (op.kind) {
    case SketchKind::SignProjection: return sign_sketch(op.t, op.n, op.seed);
    case SketchKind::GaussianProjection: return gaussian_sketch(op.t, op.n, op.seed);
    case SketchKind::IdentityRows: return identity_rows(op.t, op.n);
    case SketchKind::RowSample:
      return row_sample_sketch(SampleDistribution(*op.probabilities, DistributionSource::Custom), op.t,
                               op.seed);
  }
  throw InvalidArgument("unknown sketch kind");
}

/// op applied to A (t x cols(A)). RowSample sketches gather rows directly.
inline DenseMatrix apply_sketch(const SketchOp& op, const DenseMatrix& a) {
  op.validate();
  if (op.n != a.rows()) {
    throw ShapeError("apply_sketch: sketch ambient dimension " + std::to_string(op.n) +
                     " != rows(A)=" + std::to_string(a.rows()));
  }
  switch (op.kind) {
    case SketchKind::RowSample: {
      const SampleDistribution dist(*op.probabilities, DistributionSource::Custom);
      return gather_rows(a, dist, sample_indices(dist, op.t, op.seed));
    }
    case SketchKind::IdentityRows:
      return DenseMatrix(RowMatrix(a.eigen().topRows(static_cast<Eigen::Index>(op.t))));
    default:
      return materialize(op) * a;
  }
}

}  // namespace sketchspec
