#pragma once

// Reference computations for the unit tests. Nothing here calls Eigen or the
// library's numerics: matrices are plain row-major vectors, products are
// triple loops, and spectra come from a cyclic Jacobi eigensolver on the Gram
// matrix. Random inputs use std::mt19937_64, not the library RNG.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "sketchspec/dense_matrix.hpp"

namespace oracle {

struct Mat {
  std::size_t n = 0;
  std::size_t m = 0;
  std::vector<double> a;  // row-major

  Mat() = default;
  Mat(std::size_t rows, std::size_t cols) : n(rows), m(cols), a(rows * cols, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return a[i * m + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * m + j]; }
};

inline Mat from(const sketchspec::DenseMatrix& d) {
  Mat x(d.rows(), d.cols());
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t j = 0; j < x.m; ++j) x(i, j) = d(i, j);
  return x;
}

inline sketchspec::DenseMatrix to_dense(const Mat& x) { return sketchspec::DenseMatrix(x.n, x.m, x.a); }

inline Mat mul(const Mat& x, const Mat& y) {
  Mat z(x.n, y.m);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t k = 0; k < x.m; ++k) {
      const double v = x(i, k);
      for (std::size_t j = 0; j < y.m; ++j) z(i, j) += v * y(k, j);
    }
  return z;
}

inline Mat transpose(const Mat& x) {
  Mat z(x.m, x.n);
  for (std::size_t i = 0; i < x.n; ++i)
    for (std::size_t j = 0; j < x.m; ++j) z(j, i) = x(i, j);
  return z;
}

inline Mat sub(const Mat& x, const Mat& y) {
  Mat z = x;
  for (std::size_t i = 0; i < z.a.size(); ++i) z.a[i] -= y.a[i];
  return z;
}

inline Mat identity(std::size_t n) {
  Mat z(n, n);
  for (std::size_t i = 0; i < n; ++i) z(i, i) = 1.0;
  return z;
}

inline double frobenius(const Mat& x) {
  double s = 0.0;
  for (double v : x.a) s += v * v;
  return std::sqrt(s);
}

inline double max_abs(const Mat& x) {
  double s = 0.0;
  for (double v : x.a) s = std::max(s, std::abs(v));
  return s;
}

/// Eigen-decomposition of a symmetric matrix: eigenvalues descending, with
/// eigenvectors as the matching columns of `vecs`.
struct Eig {
  std::vector<double> vals;
  Mat vecs;
};

inline Eig jacobi_eigen(Mat s) {
  const std::size_t n = s.n;
  Mat v = identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += s(p, q) * s(p, q);
    if (off < 1e-30 * (1.0 + frobenius(s) * frobenius(s))) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (s(p, q) == 0.0) continue;
        const double theta = (s(q, q) - s(p, p)) / (2.0 * s(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double skp = s(k, p);
          const double skq = s(k, q);
          s(k, p) = c * skp - sn * skq;
          s(k, q) = sn * skp + c * skq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double spk = s(p, k);
          const double sqk = s(q, k);
          s(p, k) = c * spk - sn * sqk;
          s(q, k) = sn * spk + c * sqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return s(x, x) > s(y, y); });
  Eig out{std::vector<double>(n), Mat(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    out.vals[j] = s(order[j], order[j]);
    for (std::size_t k = 0; k < n; ++k) out.vecs(k, j) = v(k, order[j]);
  }
  return out;
}

/// All min(n, m) singular values, descending, from the smaller Gram matrix.
inline std::vector<double> singular_values(const Mat& x) {
  const Mat g = x.n >= x.m ? mul(transpose(x), x) : mul(x, transpose(x));
  std::vector<double> s = jacobi_eigen(g).vals;
  for (double& v : s) v = std::sqrt(std::max(0.0, v));
  return s;
}

inline double spectral(const Mat& x) {
  if (x.n == 0 || x.m == 0) return 0.0;
  return singular_values(x).front();
}

/// Right singular vectors (columns) of x above rel_tol * sigma_1.
inline Mat right_vectors(const Mat& x, double rel_tol = 1e-10) {
  const Eig e = jacobi_eigen(mul(transpose(x), x));
  const double top = std::max(0.0, e.vals.front());
  std::size_t r = 0;
  while (r < e.vals.size() && e.vals[r] > rel_tol * rel_tol * top && e.vals[r] > 0.0) ++r;
  Mat v(x.m, r);
  for (std::size_t i = 0; i < x.m; ++i)
    for (std::size_t j = 0; j < r; ++j) v(i, j) = e.vecs(i, j);
  return v;
}

/// Pseudo-inverse of a symmetric positive semidefinite matrix via Jacobi.
inline Mat psd_pinv(const Mat& s, double rel_tol = 1e-12) {
  const Eig e = jacobi_eigen(s);
  const double top = std::max(0.0, e.vals.front());
  Mat out(s.n, s.n);
  for (std::size_t k = 0; k < s.n; ++k) {
    if (!(e.vals[k] > rel_tol * top)) continue;
    const double inv = 1.0 / e.vals[k];
    for (std::size_t i = 0; i < s.n; ++i)
      for (std::size_t j = 0; j < s.n; ++j) out(i, j) += inv * e.vecs(i, k) * e.vecs(j, k);
  }
  return out;
}

/// X^+ = (X^T X)^+ X^T.
inline Mat pinv(const Mat& x) { return mul(psd_pinv(mul(transpose(x), x)), transpose(x)); }

/// Best rank-k approximation: X V_k V_k^T.
inline Mat best_rank_k(const Mat& x, std::size_t k) {
  const Eig e = jacobi_eigen(mul(transpose(x), x));
  Mat p(x.m, x.m);
  for (std::size_t c = 0; c < std::min(k, x.m); ++c)
    for (std::size_t i = 0; i < x.m; ++i)
      for (std::size_t j = 0; j < x.m; ++j) p(i, j) += e.vecs(i, c) * e.vecs(j, c);
  return mul(x, p);
}

/// Row-space projection A C^+ C.
inline Mat project(const Mat& a, const Mat& c) { return mul(a, mul(pinv(c), c)); }

inline Mat random_gaussian(std::size_t n, std::size_t m, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Mat x(n, m);
  for (double& v : x.a) v = nd(gen);
  return x;
}

/// Gaussian matrix of exact rank r: (n x r)(r x m).
inline Mat random_rank(std::size_t n, std::size_t m, std::size_t r, std::uint64_t seed) {
  return mul(random_gaussian(n, r, seed), random_gaussian(r, m, seed + 0x9E37));
}

inline sketchspec::DenseMatrix gaussian_dense(std::size_t n, std::size_t m, std::uint64_t seed) {
  return to_dense(random_gaussian(n, m, seed));
}

}  // namespace oracle
