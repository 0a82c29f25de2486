#pragma once

// Approximate matrix multiplication A^T B ~ Atil^T Btil where Atil = S A and
// Btil = S B share one sketch S, plus the sample-size formulas that go with
// each sketch family.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sketchspec/dense_matrix.hpp"
#include "sketchspec/error.hpp"
#include "sketchspec/linalg.hpp"
#include "sketchspec/sketch.hpp"

namespace sketchspec {

/// One trial's spectral error against eps * ||A|| * ||B||.
struct ErrorReport {
  double achieved_error = 0.0;
  double bound = 0.0;
  double relative_eps = 0.0;
  double norm_a = 0.0;
  double norm_b = 0.0;
  double eps = 0.0;
  std::size_t t_used = 0;
  bool passed = false;
};

/// A^T B. The exact and the sketched products share this one evaluation path,
/// so an identity sketch reproduces the reference bit for bit.
inline DenseMatrix gram_product(const DenseMatrix& a, const DenseMatrix& b) {
  return DenseMatrix(RowMatrix(a.eigen().transpose() * b.eigen()));
}

/// Exact product and norms, computed once and shared across trials.
struct AmmReference {
  DenseMatrix atb;
  double norm_a;
  double norm_b;

  static AmmReference of(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) {
      throw ShapeError("AMM operands: rows(A)=" + std::to_string(a.rows()) +
                       " != rows(B)=" + std::to_string(b.rows()));
    }
    return AmmReference{gram_product(a, b), spectral_norm(a), spectral_norm(b)};
  }
};

inline ErrorReport amm_error(const AmmReference& ref, const DenseMatrix& a_sk, const DenseMatrix& b_sk,
                             double eps) {
  if (a_sk.rows() != b_sk.rows()) throw ShapeError("sketched operands have different row counts");
  if (a_sk.cols() != ref.atb.rows() || b_sk.cols() != ref.atb.cols()) {
    throw ShapeError("sketched operands do not match the reference product " + ref.atb.shape_string());
  }
  ErrorReport r;
  r.norm_a = ref.norm_a;
  r.norm_b = ref.norm_b;
  r.eps = eps;
  r.t_used = a_sk.rows();
  RowMatrix diff = gram_product(a_sk, b_sk).eigen();
  diff -= ref.atb.eigen();
  r.achieved_error = spectral_norm(DenseMatrix(std::move(diff)));
  r.bound = eps * ref.norm_a * ref.norm_b;
  const double scale = ref.norm_a * ref.norm_b;
  r.relative_eps = scale > 0.0 ? r.achieved_error / scale
                               : (r.achieved_error > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  r.passed = r.achieved_error <= r.bound;
  return r;
}

/// ||Atil^T Btil - A^T B|| together with the bound eps ||A|| ||B||.
inline ErrorReport amm_error(const DenseMatrix& a, const DenseMatrix& b, const DenseMatrix& a_sk,
                             const DenseMatrix& b_sk, double eps) {
  return amm_error(AmmReference::of(a, b), a_sk, b_sk, eps);
}

struct AmmOutcome {
  DenseMatrix a_sketch;
  DenseMatrix b_sketch;
  ErrorReport report;
  /// The realized sketch description (shared by both operands).
  SketchOp op;
  /// Sampled row indices; empty for projection sketches.
  std::vector<std::size_t> indices;
};

namespace detail {

inline void check_amm_operands(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("AMM operands: rows(A)=" + std::to_string(a.rows()) +
                     " != rows(B)=" + std::to_string(b.rows()));
  }
}

}  // namespace detail

/// Applies one sketch op to both operands. Accepts any kind, including the
/// IdentityRows exactness hook.
inline AmmOutcome amm_with_sketch(const DenseMatrix& a, const DenseMatrix& b, const SketchOp& op, double eps,
                                  const AmmReference* ref = nullptr) {
  detail::check_amm_operands(a, b);
  if (op.n != a.rows()) throw ShapeError("sketch ambient dimension != rows(A)");
  op.validate();
  std::vector<std::size_t> idx;
  std::optional<DenseMatrix> as;
  std::optional<DenseMatrix> bs;
  if (op.kind == SketchKind::RowSample) {
    const SampleDistribution dist(*op.probabilities, DistributionSource::Custom);
    idx = sample_indices(dist, op.t, op.seed);
    as.emplace(gather_rows(a, dist, idx));
    bs.emplace(gather_rows(b, dist, idx));
  } else if (op.kind == SketchKind::IdentityRows) {
    as.emplace(apply_sketch(op, a));
    bs.emplace(apply_sketch(op, b));
  } else {
    const DenseMatrix s = materialize(op);
    as.emplace(s * a);
    bs.emplace(s * b);
  }
  const ErrorReport rep = ref ? amm_error(*ref, *as, *bs, eps) : amm_error(a, b, *as, *bs, eps);
  return AmmOutcome{std::move(*as), std::move(*bs), rep, op, std::move(idx)};
}

/// Shared sign sketch R (t x n): Atil = R A, Btil = R B.
inline AmmOutcome amm_project(const DenseMatrix& a, const DenseMatrix& b, std::size_t t, std::uint64_t seed,
                              double eps, const AmmReference* ref = nullptr) {
  detail::check_amm_operands(a, b);
  SketchOp op{SketchKind::SignProjection, t, a.rows(), seed, std::nullopt};
  return amm_with_sketch(a, b, op, eps, ref);
}

/// t i.i.d. row indices from p_i proportional to ||A_(i)|| ||B_(i)||; row j of
/// Atil is A_(i_j) / sqrt(t p_(i_j)), likewise for Btil with the same indices.
inline AmmOutcome amm_row_sample(const DenseMatrix& a, const DenseMatrix& b, std::size_t t, std::uint64_t seed,
                                 double eps, const AmmReference* ref = nullptr) {
  detail::check_amm_operands(a, b);
  const SampleDistribution dist = amm_row_distribution(a, b);
  SketchOp op{SketchKind::RowSample, t, a.rows(), seed, dist.probs()};
  return amm_with_sketch(a, b, op, eps, ref);
}

/// Sample-size regimes. The Table rows need dims (m, p); RegressionRank is
/// the r/eps count used by sketch-and-solve regression.
enum class SampleRegime {
  ProjRank,
  ProjStableRank,
  RowSampleStableRank,
  HoeffdingTable,
  BernsteinTable,
  RankOneTable,
  RegressionRank,
};

inline std::string_view to_string(SampleRegime r) {
  switch (r) {
    case SampleRegime::ProjRank: return "ProjRank";
    case SampleRegime::ProjStableRank: return "ProjStableRank";
    case SampleRegime::RowSampleStableRank: return "RowSampleStableRank";
    case SampleRegime::HoeffdingTable: return "HoeffdingTable";
    case SampleRegime::BernsteinTable: return "BernsteinTable";
    case SampleRegime::RankOneTable: return "RankOneTable";
    case SampleRegime::RegressionRank: return "RegressionRank";
  }
  return "?";
}

inline SampleRegime sample_regime_from_string(std::string_view s) {
  for (auto r : {SampleRegime::ProjRank, SampleRegime::ProjStableRank, SampleRegime::RowSampleStableRank,
                 SampleRegime::HoeffdingTable, SampleRegime::BernsteinTable, SampleRegime::RankOneTable,
                 SampleRegime::RegressionRank}) {
    if (to_string(r) == s) return r;
  }
  throw InvalidQuery("unknown sample-size regime '" + std::string(s) + "'");
}

struct SampleDims {
  std::size_t m;
  std::size_t p;
};

struct SampleSizeQuery {
  SampleRegime regime = SampleRegime::ProjRank;
  /// r, stable rank or gamma depending on the regime.
  double rank_param = 1.0;
  double eps = 0.5;
  std::optional<SampleDims> dims;
  double constant = 1.0;
  /// Second stable rank; selects sqrt(a b) ln(a b / eps^4) / eps^2 for RowSampleStableRank.
  std::optional<double> rank_param_b;
};

/// The regime's formula before the constant and the ceiling. Natural log.
inline double sample_size_formula(const SampleSizeQuery& q) {
  if (!(q.eps > 0.0 && q.eps < 1.0)) throw InvalidQuery("eps must lie in (0,1)");
  if (!(q.rank_param >= 1.0) || !std::isfinite(q.rank_param)) throw InvalidQuery("rank_param must be >= 1");
  if (!(q.constant > 0.0) || !std::isfinite(q.constant)) throw InvalidQuery("constant must be > 0");
  if (q.rank_param_b && !(*q.rank_param_b >= 1.0)) throw InvalidQuery("rank_param_b must be >= 1");
  if (q.rank_param_b && q.regime != SampleRegime::RowSampleStableRank) {
    throw InvalidQuery("rank_param_b only applies to RowSampleStableRank");
  }
  const double e2 = q.eps * q.eps;
  const double r = q.rank_param;
  auto log_mp = [&] {
    if (!q.dims || q.dims->m + q.dims->p < 2) throw InvalidQuery("regime needs dims (m, p)");
    return std::log(static_cast<double>(q.dims->m + q.dims->p));
  };
  switch (q.regime) {
    case SampleRegime::ProjRank: return r / e2;
    case SampleRegime::ProjStableRank: return r / (e2 * e2);
    case SampleRegime::RowSampleStableRank:
      if (q.rank_param_b) {
        const double ab = r * *q.rank_param_b;
        return std::sqrt(ab) * std::log(ab / (e2 * e2)) / e2;
      }
      return r * std::log(r / e2) / e2;
    case SampleRegime::HoeffdingTable: return r * r * log_mp() / e2;
    case SampleRegime::BernsteinTable: return r * log_mp() / e2;
    case SampleRegime::RankOneTable: return r * std::log(r / e2) / e2;
    case SampleRegime::RegressionRank: return r / q.eps;
  }
  throw InvalidQuery("unknown regime");
}

/// t = ceil(C * f(params)); the 1e-9 slack keeps exact products such as
/// 8 / 0.25 from rounding up through representation error.
inline std::size_t sample_size(const SampleSizeQuery& q) {
  const double v = q.constant * sample_size_formula(q);
  if (!(v < 1e15)) throw InvalidQuery("sample size overflows");
  const double t = std::ceil(v - 1e-9);
  return t < 1.0 ? 1 : static_cast<std::size_t>(t);
}

}  // namespace sketchspec
