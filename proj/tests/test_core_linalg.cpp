#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <tuple>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sketchspec/generator.hpp"
#include "sketchspec/linalg.hpp"
#include "sketchspec/sketch.hpp"

namespace {

using namespace sketchspec;
using oracle::Mat;

double max_abs_diff(const DenseMatrix& x, const DenseMatrix& y) { return (x - y).eigen().cwiseAbs().maxCoeff(); }

// Seeded instances of assorted shapes and ranks used by the property tests.
std::vector<DenseMatrix> property_instances() {
  std::vector<DenseMatrix> out;
  std::uint64_t seed = 100;
  for (auto [n, m, r] : std::vector<std::tuple<int, int, int>>{
           {8, 5, 5}, {5, 8, 5}, {12, 7, 3}, {7, 12, 2}, {20, 6, 1}, {9, 9, 9}, {15, 10, 6}, {6, 6, 4}}) {
    out.push_back(oracle::to_dense(oracle::random_rank(n, m, r, seed++)));
  }
  return out;
}

TEST(Svd, DiagonalDropsZeroSingularValue) {
  const SvdFactors f = svd(DenseMatrix::diagonal({3.0, 1.0, 0.0}));
  ASSERT_EQ(f.rank(), 2u);
  EXPECT_NEAR(f.sigma[0], 3.0, 1e-14);
  EXPECT_NEAR(f.sigma[1], 1.0, 1e-14);
}

TEST(Svd, IdentityHasUnitSpectrumAndUVtIsIdentity) {
  const SvdFactors f = svd(DenseMatrix::identity(3));
  ASSERT_EQ(f.rank(), 3u);
  for (double s : f.sigma) EXPECT_NEAR(s, 1.0, 1e-14);
  EXPECT_LE(max_abs_diff(f.U * f.V.transpose(), DenseMatrix::identity(3)), 1e-14);
}

TEST(Svd, SeededReconstructionOrthogonalityAndOracleSpectrum) {
  const Mat x = oracle::random_gaussian(8, 5, 7);
  const DenseMatrix a = oracle::to_dense(x);
  const SvdFactors f = svd(a);
  ASSERT_EQ(f.rank(), 5u);
  const DenseMatrix recon = f.U * DenseMatrix::diagonal(f.sigma) * f.V.transpose();
  EXPECT_LE(frobenius_norm(a - recon), 1e-10 * frobenius_norm(a));
  EXPECT_LE(max_abs_diff(f.U.transpose() * f.U, DenseMatrix::identity(5)), 1e-10);
  EXPECT_LE(max_abs_diff(f.V.transpose() * f.V, DenseMatrix::identity(5)), 1e-10);
  const auto ref = oracle::singular_values(x);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(f.sigma[i], ref[i], 1e-10 * ref[0]);
  for (std::size_t i = 1; i < 5; ++i) EXPECT_GE(f.sigma[i - 1], f.sigma[i]);
}

TEST(Svd, ZeroMatrixHasNoSpectrum) { EXPECT_THROW(svd(DenseMatrix(3, 3)), NoSpectrum); }

TEST(Svd, TallRankDeficientInputStaysFinite) {
  // Exactly rank-deficient tall inputs go through the QR-reduced path.
  const DenseMatrix a = generate({2048, 40, ExactRank{10}, 14});
  const auto s = singular_values(a);
  EXPECT_NEAR(s[0], 1.0, 1e-12);
  EXPECT_NEAR(s[9], 1.0, 1e-12);
  EXPECT_LE(s[10], 1e-12);
  EXPECT_EQ(numerical_rank(a), 10u);
}

TEST(SpectralNorm, Examples) {
  EXPECT_NEAR(spectral_norm(DenseMatrix::diagonal({3.0, 1.0, 0.0})), 3.0, 1e-14);
  EXPECT_EQ(spectral_norm(DenseMatrix(4, 4)), 0.0);
  EXPECT_NEAR(spectral_norm(DenseMatrix{{3.0}, {4.0}}), 5.0, 1e-14);
}

TEST(SpectralNorm, MatchesJacobiOracle) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Mat x = oracle::random_gaussian(9 + seed, 6, seed);
    EXPECT_NEAR(spectral_norm(oracle::to_dense(x)), oracle::spectral(x), 1e-10 * oracle::spectral(x));
  }
}

TEST(SpectralNorm, PowerIterationPathForLargeMinDimension) {
  // min(rows, cols) > 512 switches to power iteration; sigma_1 = 1 by construction.
  const DenseMatrix a = generate({700, 530, PowerLaw{1.0, 0}, 3});
  EXPECT_NEAR(spectral_norm(a), 1.0, 1e-8);
}

TEST(FrobeniusNorm, Examples) {
  EXPECT_NEAR(frobenius_norm(DenseMatrix::diagonal({3.0, 4.0})), 5.0, 1e-14);
  EXPECT_EQ(frobenius_norm(DenseMatrix(2, 3)), 0.0);
  EXPECT_NEAR(frobenius_norm(DenseMatrix::identity(9)), 3.0, 1e-14);
  const Mat x = oracle::random_gaussian(7, 4, 3);
  EXPECT_NEAR(frobenius_norm(oracle::to_dense(x)), oracle::frobenius(x), 1e-12);
}

TEST(StableRank, Examples) {
  EXPECT_NEAR(stable_rank(DenseMatrix::identity(6)), 6.0, 1e-12);
  const DenseMatrix rank1 = DenseMatrix{{1.0}, {2.0}, {3.0}} * DenseMatrix{{4.0, 5.0}};
  EXPECT_NEAR(stable_rank(rank1), 1.0, 1e-12);
  EXPECT_NEAR(stable_rank(DenseMatrix::diagonal({3.0, 4.0})), 1.5625, 1e-14);
  EXPECT_THROW(stable_rank(DenseMatrix(2, 2)), NoSpectrum);
}

TEST(StableRank, BoundedByRankAndScaleInvariant) {
  for (const auto& a : property_instances()) {
    const double sr = stable_rank(a);
    EXPECT_GE(sr, 1.0 - 1e-12);
    EXPECT_LE(sr, static_cast<double>(numerical_rank(a)) + 1e-8);
    EXPECT_NEAR(stable_rank(-3.5 * a), sr, 1e-10 * sr);
  }
}

TEST(PseudoInverse, Examples) {
  EXPECT_LE(max_abs_diff(pseudo_inverse(DenseMatrix::diagonal({2.0, 0.0})), DenseMatrix::diagonal({0.5, 0.0})),
            1e-15);
  Rng rng(4);
  const DenseMatrix q(Eigen::MatrixXd(random_orthonormal(7, 3, rng)));
  EXPECT_LE(max_abs_diff(pseudo_inverse(q), q.transpose()), 1e-12);
  EXPECT_EQ(pseudo_inverse(DenseMatrix(3, 2)), DenseMatrix(2, 3));
}

TEST(PseudoInverse, SeededFullRankMatchesNormalEquationsOracle) {
  const Mat x = oracle::random_gaussian(6, 3, 11);
  const DenseMatrix a = oracle::to_dense(x);
  const DenseMatrix ap = pseudo_inverse(a);
  EXPECT_LE(max_abs_diff(a * ap * a, a), 1e-10);
  EXPECT_LE(max_abs_diff(ap, oracle::to_dense(oracle::pinv(x))), 1e-10);
}

TEST(PseudoInverse, MoorePenroseIdentitiesHoldOnSeededInstances) {
  for (const auto& a : property_instances()) {
    const DenseMatrix ap = pseudo_inverse(a);
    const double tol = 1e-8 * spectral_norm(a);
    const double tol_p = 1e-8 * spectral_norm(ap);
    EXPECT_LE(max_abs_diff(a * ap * a, a), tol);
    EXPECT_LE(max_abs_diff(ap * a * ap, ap), tol_p);
    const DenseMatrix aap = a * ap;
    const DenseMatrix apa = ap * a;
    EXPECT_LE(max_abs_diff(aap, aap.transpose()), 1e-8);
    EXPECT_LE(max_abs_diff(apa, apa.transpose()), 1e-8);
  }
}

TEST(BestRankK, Examples) {
  EXPECT_LE(max_abs_diff(best_rank_k(DenseMatrix::diagonal({5.0, 3.0, 1.0}), 2), DenseMatrix::diagonal({5.0, 3.0, 0.0})),
            1e-14);
  const DenseMatrix a = oracle::to_dense(oracle::random_rank(6, 5, 2, 8));
  EXPECT_EQ(best_rank_k(a, 2), a);
  EXPECT_EQ(best_rank_k(a, 4), a);
  EXPECT_THROW(best_rank_k(a, 0), InvalidArgument);
}

TEST(BestRankK, SeededResidualEqualsNextSingularValue) {
  const Mat x = oracle::random_gaussian(10, 7, 21);
  const DenseMatrix a3 = best_rank_k(oracle::to_dense(x), 3);
  EXPECT_NEAR(oracle::spectral(oracle::sub(x, oracle::from(a3))), oracle::singular_values(x)[3], 1e-10);
  EXPECT_EQ(numerical_rank(a3), 3u);
}

TEST(BestRankK, EckartYoungForEveryK) {
  for (const auto& a : property_instances()) {
    const auto s = singular_values(a);
    const std::size_t r = numerical_rank(a);
    for (std::size_t k = 1; k <= r; ++k) {
      const double expected = k < s.size() && k < r ? s[k] : 0.0;
      EXPECT_NEAR(spectral_norm(a - best_rank_k(a, k)), expected, 1e-8 * s[0]) << "k=" << k;
    }
  }
}

TEST(ProjectOntoRowspace, OwnRowspaceIsIdentityMap) {
  const DenseMatrix a = oracle::gaussian_dense(8, 5, 31);
  EXPECT_LE(max_abs_diff(project_onto_rowspace(a, a), a), 1e-12);
}

TEST(ProjectOntoRowspace, SingleRowGivesMultiplesOfThatRow) {
  const Mat x = oracle::random_gaussian(6, 4, 32);
  Mat first(1, 4);
  for (std::size_t j = 0; j < 4; ++j) first(0, j) = x(0, j);
  const DenseMatrix p = project_onto_rowspace(oracle::to_dense(x), oracle::to_dense(first));
  EXPECT_EQ(numerical_rank(p), 1u);
  for (std::size_t i = 0; i < 6; ++i) {
    const double c = p(i, 0) / first(0, 0);
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(p(i, j), c * first(0, j), 1e-12);
  }
}

TEST(ProjectOntoRowspace, MatchesExplicitPseudoInverseOracleAndIsIdempotent) {
  const Mat a = oracle::random_gaussian(8, 5, 33);
  const Mat c = oracle::random_gaussian(3, 5, 34);
  const DenseMatrix p = project_onto_rowspace(oracle::to_dense(a), oracle::to_dense(c));
  EXPECT_LE(max_abs_diff(p, oracle::to_dense(oracle::project(a, c))), 1e-10);
  EXPECT_LE(max_abs_diff(project_onto_rowspace(p, oracle::to_dense(c)), p), 1e-12);
  EXPECT_THROW(project_onto_rowspace(oracle::to_dense(a), DenseMatrix(2, 4)), ShapeError);
}

TEST(ProjectRankK, DegenerateCasesReduceToTruncation) {
  const DenseMatrix a = oracle::to_dense(oracle::random_rank(9, 6, 4, 35));
  EXPECT_LE(max_abs_diff(project_rank_k(a, a, 4), a), 1e-12);
  EXPECT_LE(max_abs_diff(project_rank_k(a, a, 1), best_rank_k(a, 1)), 1e-12);
  EXPECT_THROW(project_rank_k(a, a, 0), InvalidArgument);
}

TEST(ProjectRankK, MatchesCompositionOfOracles) {
  const Mat a = oracle::random_gaussian(10, 6, 36);
  const Mat c = oracle::random_gaussian(4, 6, 37);
  for (std::size_t k : {1u, 2u, 3u}) {
    const Mat ref = oracle::best_rank_k(oracle::project(a, c), k);
    EXPECT_LE(max_abs_diff(project_rank_k(oracle::to_dense(a), oracle::to_dense(c), k), oracle::to_dense(ref)), 1e-9)
        << "k=" << k;
  }
}

TEST(ProjectRankK, NeverBeatsTheOptimum) {
  std::uint64_t seed = 40;
  for (const auto& a : property_instances()) {
    const DenseMatrix c = sign_sketch(3, a.rows(), seed++) * a;
    const auto s = singular_values(a);
    for (std::size_t k = 1; k <= numerical_rank(a); ++k) {
      const double opt = k < s.size() ? s[k] : 0.0;
      EXPECT_GE(spectral_norm(a - project_rank_k(a, c, k)), opt - 1e-8 * s[0]);
    }
  }
}

TEST(ProjectedFactors, AgreesWithDirectProjection) {
  const DenseMatrix a = oracle::gaussian_dense(12, 7, 41);
  const DenseMatrix c = oracle::gaussian_dense(5, 7, 42);
  const ProjectedFactors pf(a, c);
  EXPECT_EQ(pf.rank(), 5u);
  EXPECT_LE(max_abs_diff(pf.full(), project_onto_rowspace(a, c)), 1e-12);
  for (std::size_t k = 1; k <= 5; ++k) EXPECT_LE(max_abs_diff(pf.rank_k(k), project_rank_k(a, c, k)), 1e-12);
}

TEST(RayleighSandwich, IdenticalSketchHasZeroRatio) {
  const DenseMatrix a = oracle::gaussian_dense(7, 4, 50);
  const auto v = check_rayleigh_sandwich(a, a, 0.01);
  EXPECT_TRUE(v.holds);
  EXPECT_LE(v.worst_ratio, 1e-12);
}

TEST(RayleighSandwich, ScaledSketchHasRatioEps) {
  const DenseMatrix a = oracle::to_dense(oracle::random_rank(7, 5, 3, 51));
  const double eps = 0.3;
  const auto v = check_rayleigh_sandwich(a, std::sqrt(1.0 + eps) * a, 0.5);
  EXPECT_TRUE(v.holds);
  EXPECT_NEAR(v.worst_ratio, eps, 1e-12);
  EXPECT_FALSE(check_rayleigh_sandwich(a, std::sqrt(1.0 + eps) * a, 0.29).holds);
}

TEST(RayleighSandwich, NullSpaceLeakIsInfinite) {
  const DenseMatrix a{{1.0, 0.0}, {0.0, 0.0}};
  const DenseMatrix atil{{1.0, 0.5}};
  const auto v = check_rayleigh_sandwich(a, atil, 0.5);
  EXPECT_FALSE(v.holds);
  EXPECT_TRUE(std::isinf(v.worst_ratio));
}

TEST(RayleighSandwich, DominatesRandomDirectionSearch) {
  const Mat x = oracle::random_gaussian(40, 5, 52);
  const DenseMatrix a = oracle::to_dense(x);
  const DenseMatrix atil = sign_sketch(25, 40, 53) * a;
  const auto v = check_rayleigh_sandwich(a, atil, 0.99);
  const Mat g = oracle::mul(oracle::transpose(x), x);
  const Mat gt = oracle::from(atil.transpose() * atil);
  std::mt19937_64 gen(54);
  std::normal_distribution<double> nd;
  double sampled = 0.0;
  for (int it = 0; it < 100000; ++it) {
    double z[5];
    for (double& e : z) e = nd(gen);
    double qa = 0.0;
    double qt = 0.0;
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) {
        qa += z[i] * g(i, j) * z[j];
        qt += z[i] * gt(i, j) * z[j];
      }
    sampled = std::max(sampled, std::abs(qt - qa) / qa);
  }
  EXPECT_GE(v.worst_ratio, sampled - 1e-12);
  EXPECT_LE(v.worst_ratio, sampled * 1.05);  // 10^5 directions in R^5 get close to the supremum
  // The witness attains the reported ratio.
  ASSERT_TRUE(v.witness_direction.has_value());
  const Eigen::VectorXd w = *v.witness_direction;
  const double qa = (a.eigen() * w).squaredNorm();
  const double qt = (atil.eigen() * w).squaredNorm();
  EXPECT_NEAR(std::abs(qt - qa) / qa, v.worst_ratio, 1e-9);
}

TEST(RayleighSandwich, ImpliesEigenvalueSandwich) {
  // Courant-Fischer: the quadratic-form sandwich bounds every eigenvalue pair.
  int checked = 0;
  for (std::uint64_t seed = 60; seed < 90; ++seed) {
    const Mat x = oracle::random_gaussian(60, 4, seed);
    const DenseMatrix a = oracle::to_dense(x);
    const DenseMatrix atil = sign_sketch(60, 60, seed + 1000) * a;
    const double eps = 0.9;
    const auto v = check_rayleigh_sandwich(a, atil, eps);
    if (!v.holds) continue;
    ++checked;
    const auto ea = oracle::jacobi_eigen(oracle::mul(oracle::transpose(x), x)).vals;
    const auto et = oracle::jacobi_eigen(oracle::from(atil.transpose() * atil)).vals;
    for (std::size_t i = 0; i < 4; ++i) {
      EXPECT_GE(et[i], (1.0 - v.worst_ratio) * ea[i] - 1e-9 * ea[0]);
      EXPECT_LE(et[i], (1.0 + v.worst_ratio) * ea[i] + 1e-9 * ea[0]);
    }
  }
  EXPECT_GE(checked, 10);
}

TEST(RayleighSandwich, RejectsBadArguments) {
  const DenseMatrix a = oracle::gaussian_dense(5, 3, 70);
  EXPECT_THROW(check_rayleigh_sandwich(a, DenseMatrix(2, 4), 0.5), ShapeError);
  EXPECT_THROW(check_rayleigh_sandwich(a, a, 1.5), InvalidArgument);
  EXPECT_THROW(check_rayleigh_sandwich(DenseMatrix(5, 3), a, 0.5), NoSpectrum);
}

TEST(DenseMatrix, RejectsNonFiniteEntriesAndBadShapes) {
  const std::vector<double> bad{1.0, std::numeric_limits<double>::quiet_NaN()};
  EXPECT_THROW(DenseMatrix(1, 2, bad), Error);
  const std::vector<double> three{1.0, 2.0, 3.0};
  EXPECT_THROW(DenseMatrix(2, 2, three), ShapeError);
  EXPECT_THROW((DenseMatrix{{1.0, 2.0}, {3.0}}), ShapeError);
}

}  // namespace
