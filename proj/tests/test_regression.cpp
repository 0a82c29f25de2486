#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "sketchspec/generator.hpp"
#include "sketchspec/regression.hpp"

namespace {

using namespace sketchspec;

Vector to_vec(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), Eigen::Index(v.size())); }

Vector gaussian_vec(std::size_t n, std::uint64_t seed) {
  const oracle::Mat g = oracle::random_gaussian(n, 1, seed);
  return to_vec(g.a);
}

// x = (A^T A)^+ A^T b from the Jacobi oracle.
Vector normal_equations(const oracle::Mat& a, const Vector& b) {
  oracle::Mat bm(b.size(), 1);
  for (Eigen::Index i = 0; i < b.size(); ++i) bm(std::size_t(i), 0) = b(i);
  const oracle::Mat x = oracle::mul(oracle::pinv(a), bm);
  return to_vec(x.a);
}

TEST(SolveExact, SingleColumnExample) {
  Vector b(2);
  b << 3.0, 4.0;
  const RegressionSolution s = solve_exact(DenseMatrix{{1.0}, {0.0}}, b);
  EXPECT_NEAR(s.x(0), 3.0, 1e-15);
  EXPECT_NEAR(s.residual_norm, 4.0, 1e-15);
  EXPECT_FALSE(s.sketched);
}

TEST(SolveExact, ConsistentSystemHasZeroResidual) {
  const DenseMatrix a = oracle::gaussian_dense(20, 5, 1);
  const Vector b = a.eigen() * gaussian_vec(5, 2);
  EXPECT_LE(solve_exact(a, b).residual_norm, 1e-10 * b.norm());
}

TEST(SolveExact, MatchesNormalEquationsOracle) {
  const oracle::Mat a = oracle::random_gaussian(50, 8, 3);
  const Vector b = gaussian_vec(50, 4);
  const RegressionSolution s = solve_exact(oracle::to_dense(a), b);
  EXPECT_LE((s.x - normal_equations(a, b)).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_NEAR(s.residual_norm, (b - oracle::to_dense(a).eigen() * s.x).norm(), 1e-10 * b.norm());
}

TEST(SolveExact, ResidualIsOrthogonalToColumnSpace) {
  for (std::uint64_t seed = 10; seed < 15; ++seed) {
    const DenseMatrix a = oracle::to_dense(oracle::random_rank(40, 9, 4, seed));
    const Vector b = gaussian_vec(40, seed + 100);
    const RegressionSolution s = solve_exact(a, b);
    const double lhs = (a.eigen().transpose() * (b - a.eigen() * s.x)).norm();
    EXPECT_LE(lhs, 1e-8 * spectral_norm(a) * b.norm());
  }
}

TEST(SolveExact, ShapeAndFiniteness) {
  EXPECT_THROW(solve_exact(DenseMatrix(3, 2), Vector::Zero(4)), ShapeError);
  Vector bad = Vector::Zero(3);
  bad(1) = std::nan("");
  EXPECT_THROW(solve_exact(DenseMatrix(3, 2), bad), InvalidArgument);
}

TEST(SolveSketched, IdentitySketchReproducesExactSolution) {
  const DenseMatrix a = oracle::to_dense(oracle::random_rank(30, 6, 4, 20));
  const Vector b = gaussian_vec(30, 21);
  const RegressionSolution ex = solve_exact(a, b);
  const RegressionSolution sk = solve_sketched(a, b, SketchOp{SketchKind::IdentityRows, 30, 30, 0, std::nullopt});
  EXPECT_LE((sk.x - ex.x).norm(), 1e-10 * std::max(1.0, ex.x.norm()));
  EXPECT_TRUE(sk.sketched);
  EXPECT_EQ(sk.t_used, 30u);
}

TEST(SolveSketched, MatchesDenseOracleOnSketchedProblem) {
  const oracle::Mat a = oracle::random_gaussian(40, 5, 22);
  const Vector b = gaussian_vec(40, 23);
  const RegressionSolution sk = solve_sketched(oracle::to_dense(a), b, 12, 24);
  const oracle::Mat r = oracle::from(sign_sketch(12, 40, 24));
  oracle::Mat bm(40, 1);
  for (std::size_t i = 0; i < 40; ++i) bm(i, 0) = b(Eigen::Index(i));
  const oracle::Mat x = oracle::mul(oracle::pinv(oracle::mul(r, a)), oracle::mul(r, bm));
  EXPECT_LE((sk.x - to_vec(x.a)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(solve_sketched(oracle::to_dense(a), b, 12, 24).x, sk.x);
}

TEST(SolveSketched, OrthogonalRightHandSideMeetsDistanceBound) {
  // b orthogonal to colspan(A): x_opt = 0 and ||x~|| is compared with eps / sigma_min * ||b||.
  const DenseMatrix a = oracle::gaussian_dense(200, 5, 25);
  const SvdFactors f = svd(a);
  Vector b = gaussian_vec(200, 26);
  b -= f.U.eigen() * (f.U.eigen().transpose() * b);
  const RegressionSolution ex = solve_exact(a, b);
  EXPECT_LE(ex.x.norm(), 1e-10 * b.norm() / f.sigma.back());
  const double smin = smallest_positive_singular_value(a);
  EXPECT_NEAR(smin, f.sigma.back(), 1e-12);
  int passed = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RegressionSolution sk = solve_sketched(a, b, 400, seed);
    const RegressionReport rep = regression_report(a, b, ex, sk, 0.5, smin);
    EXPECT_NEAR(rep.bound_rhs, 0.5 / smin * ex.residual_norm, 1e-12 * rep.bound_rhs);
    EXPECT_NEAR(rep.solution_distance, (ex.x - sk.x).norm(), 1e-15);
    passed += rep.passed_distance;
  }
  EXPECT_GE(passed, 18);
}

TEST(SolveSketchedMulti, SelfRightHandSideGivesRowspaceProjector) {
  const oracle::Mat a = oracle::random_rank(60, 8, 3, 27);
  const DenseMatrix x = solve_sketched_multi(oracle::to_dense(a), oracle::to_dense(a), 20, 28);
  const oracle::Mat proj = oracle::mul(oracle::pinv(a), a);
  EXPECT_LE((x - oracle::to_dense(proj)).eigen().cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SolveSketchedMulti, ColumnsMatchSingleRightHandSideSolves) {
  const DenseMatrix a = oracle::gaussian_dense(50, 6, 29);
  const DenseMatrix b = oracle::gaussian_dense(50, 3, 30);
  const DenseMatrix x = solve_sketched_multi(a, b, 15, 31);
  for (Eigen::Index j = 0; j < 3; ++j) {
    const RegressionSolution s = solve_sketched(a, b.eigen().col(j), 15, 31);
    EXPECT_LE((x.eigen().col(j) - s.x).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_THROW(solve_sketched_multi(a, DenseMatrix(49, 2), 15, 31), ShapeError);
}

TEST(SolveSketchedMulti, ApproximationPassRate) {
  const DenseMatrix a = oracle::gaussian_dense(500, 5, 32);
  const DenseMatrix b = oracle::gaussian_dense(500, 2, 33);
  const DenseMatrix xopt = pseudo_inverse(a) * b;
  const double opt = spectral_norm(a * xopt - b);
  int passed = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DenseMatrix x = solve_sketched_multi(a, b, 200, seed);
    passed += spectral_norm(a * x - b) <= 1.25 * opt;
  }
  EXPECT_GE(passed, 18);
}

TEST(RegressionReport, ExactAgainstItself) {
  const DenseMatrix a = oracle::gaussian_dense(20, 4, 34);
  const Vector b = gaussian_vec(20, 35);
  const RegressionSolution ex = solve_exact(a, b);
  const RegressionReport rep = regression_report(a, b, ex, ex, 0.1);
  EXPECT_EQ(rep.residual_ratio, 1.0);
  EXPECT_EQ(rep.solution_distance, 0.0);
  EXPECT_TRUE(rep.passed_approx);
  EXPECT_TRUE(rep.passed_distance);
}

TEST(RegressionReport, ConsistentSystemUsesUnitRatio) {
  const DenseMatrix a = oracle::gaussian_dense(30, 4, 36);
  const Vector b = a.eigen() * gaussian_vec(4, 37);
  const RegressionSolution ex = solve_exact(a, b);
  const RegressionSolution sk = solve_sketched(a, b, 10, 38);
  ASSERT_LE(ex.residual_norm, 1e-12);
  ASSERT_LE(sk.residual_norm, 1e-12);
  const RegressionReport rep = regression_report(a, b, ex, sk, 0.1);
  EXPECT_EQ(rep.residual_ratio, 1.0);
  EXPECT_LE(rep.solution_distance, 1e-10);
  EXPECT_EQ(rep.bound_rhs, 0.1 / smallest_positive_singular_value(a) * ex.residual_norm);
}

TEST(RegressionReport, RatioMatchesRecomputationFromRawMatrices) {
  const oracle::Mat am = oracle::random_gaussian(80, 6, 39);
  const DenseMatrix a = oracle::to_dense(am);
  const Vector b = gaussian_vec(80, 40);
  const RegressionSolution ex = solve_exact(a, b);
  const RegressionSolution sk = solve_sketched(a, b, 25, 41);
  const RegressionReport rep = regression_report(a, b, ex, sk, 0.2);
  const Vector xo = normal_equations(am, b);
  double r_opt = 0.0;
  double r_sk = 0.0;
  for (std::size_t i = 0; i < 80; ++i) {
    double po = 0.0;
    double ps = 0.0;
    for (std::size_t j = 0; j < 6; ++j) {
      po += am(i, j) * xo(Eigen::Index(j));
      ps += am(i, j) * sk.x(Eigen::Index(j));
    }
    r_opt += (b(Eigen::Index(i)) - po) * (b(Eigen::Index(i)) - po);
    r_sk += (b(Eigen::Index(i)) - ps) * (b(Eigen::Index(i)) - ps);
  }
  EXPECT_NEAR(rep.residual_ratio, std::sqrt(r_sk / r_opt), 1e-12);
  EXPECT_NEAR(rep.sigma_min, oracle::singular_values(am).back(), 1e-10);
}

TEST(RegressionReport, TamperedResidualIsRejected) {
  const DenseMatrix a = oracle::gaussian_dense(20, 4, 42);
  const Vector b = gaussian_vec(20, 43);
  const RegressionSolution ex = solve_exact(a, b);
  RegressionSolution bad = ex;
  bad.residual_norm *= 1.5;
  EXPECT_THROW(regression_report(a, b, ex, bad, 0.1), MismatchedProblem);
  RegressionSolution wrong_len = ex;
  wrong_len.x = Vector::Zero(3);
  EXPECT_THROW(regression_report(a, b, ex, wrong_len, 0.1), MismatchedProblem);
}

TEST(RegressionProperties, OptimalityFloorAndRowspaceMembership) {
  const oracle::Mat am = oracle::random_rank(120, 10, 6, 44);
  const DenseMatrix a = oracle::to_dense(am);
  const DenseMatrix ap_a = pseudo_inverse(a) * a;
  const Eigen::MatrixXd null_proj = Eigen::MatrixXd::Identity(10, 10) - ap_a.eigen();
  const Vector b = gaussian_vec(120, 45);
  const RegressionSolution ex = solve_exact(a, b);
  EXPECT_LE((null_proj * ex.x).norm(), 1e-8 * ex.x.norm());
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (std::size_t t : {8u, 20u, 60u}) {
      const RegressionSolution sk = solve_sketched(a, b, t, seed);
      EXPECT_GE(sk.residual_norm, ex.residual_norm - 1e-10 * b.norm());
      EXPECT_LE((null_proj * sk.x).norm(), 1e-8 * std::max(sk.x.norm(), 1e-300));
    }
  }
}

TEST(RegressionRhs, DeterministicAndScaled) {
  const DenseMatrix a = generate({400, 10, ExactRank{4}, 46});
  const Vector b1 = regression_rhs(a, 7);
  EXPECT_EQ(b1, regression_rhs(a, 7));
  EXPECT_NE(b1, regression_rhs(a, 8));
  EXPECT_GT(solve_exact(a, b1).residual_norm, 0.0);
}

}  // namespace
