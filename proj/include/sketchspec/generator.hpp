#pragma once

// Synthetic test matrices with prescribed spectra: A = U diag(sigma) V^T with
// Haar factors U (stream 1) and V (stream 2) of the generator seed; additive
// noise uses stream 3 and graph edges stream 4.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sketchspec/dense_matrix.hpp"
#include "sketchspec/error.hpp"
#include "sketchspec/rng.hpp"
#include "sketchspec/sketch.hpp"

namespace sketchspec {

/// sigma_j = j^-alpha, j = 1..rank.
struct PowerLaw {
  double alpha = 1.0;
  std::size_t rank = 0;  // 0: min(n, m)
};

/// sigma_j = exp(-beta (j - 1)), j = 1..rank.
struct ExpDecay {
  double beta = 0.1;
  std::size_t rank = 0;
};

/// r unit singular values plus i.i.d. N(0, noise_sigma^2) entries.
struct LowRankPlusNoise {
  std::size_t r = 1;
  double noise_sigma = 0.0;
};

/// r unit singular values.
struct ExactRank {
  std::size_t r = 1;
};

/// Edge-vertex incidence matrix of G(vertices, edge_prob): one row e_i - e_j
/// per edge i < j. Shape is (#edges) x vertices; the requested n is ignored.
struct GraphIncidence {
  std::size_t vertices = 2;
  double edge_prob = 0.5;
};

using Spectrum = std::variant<PowerLaw, ExpDecay, LowRankPlusNoise, ExactRank, GraphIncidence>;

struct GeneratorSpec {
  std::size_t n = 1;
  std::size_t m = 1;
  Spectrum spectrum = ExactRank{};
  std::uint64_t seed = 0;
};

inline std::string_view spectrum_name(const Spectrum& s) {
  struct V {
    std::string_view operator()(const PowerLaw&) const { return "PowerLaw"; }
    std::string_view operator()(const ExpDecay&) const { return "ExpDecay"; }
    std::string_view operator()(const LowRankPlusNoise&) const { return "LowRankPlusNoise"; }
    std::string_view operator()(const ExactRank&) const { return "ExactRank"; }
    std::string_view operator()(const GraphIncidence&) const { return "GraphIncidence"; }
  };
  return std::visit(V{}, s);
}

inline void validate(const GeneratorSpec& g) {
  auto bad = [](const std::string& what) { throw InvalidSpec(what); };
  if (std::holds_alternative<GraphIncidence>(g.spectrum)) {
    const auto& gi = std::get<GraphIncidence>(g.spectrum);
    if (gi.vertices < 2) bad("GraphIncidence needs at least 2 vertices");
    if (!(gi.edge_prob > 0.0 && gi.edge_prob <= 1.0)) bad("edge_prob must lie in (0,1]");
    return;
  }
  if (g.n == 0 || g.m == 0) bad("generator shape must be positive");
  if (g.n > 1'000'000 || g.m > 1'000'000 || g.n * g.m > 200'000'000) bad("generator shape too large");
  const std::size_t q = std::min(g.n, g.m);
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PowerLaw>) {
          if (!(s.alpha >= 0.0) || !std::isfinite(s.alpha)) bad("PowerLaw alpha must be >= 0");
          if (s.rank > q) bad("PowerLaw rank exceeds min(n, m)");
        } else if constexpr (std::is_same_v<T, ExpDecay>) {
          if (!(s.beta >= 0.0) || !std::isfinite(s.beta)) bad("ExpDecay beta must be >= 0");
          if (s.rank > q) bad("ExpDecay rank exceeds min(n, m)");
        } else if constexpr (std::is_same_v<T, LowRankPlusNoise>) {
          if (s.r == 0 || s.r > q) bad("LowRankPlusNoise r must lie in [1, min(n, m)]");
          if (!(s.noise_sigma >= 0.0) || !std::isfinite(s.noise_sigma)) bad("noise_sigma must be >= 0");
        } else if constexpr (std::is_same_v<T, ExactRank>) {
          if (s.r == 0 || s.r > q) bad("ExactRank r must lie in [1, min(n, m)]");
        }
      },
      g.spectrum);
}

/// Prescribed singular values for the spectrum-defined kinds (empty for GraphIncidence).
inline std::vector<double> prescribed_spectrum(const GeneratorSpec& g) {
  const std::size_t q = std::min(g.n, g.m);
  std::vector<double> s;
  if (const auto* p = std::get_if<PowerLaw>(&g.spectrum)) {
    s.resize(p->rank ? p->rank : q);
    for (std::size_t j = 0; j < s.size(); ++j) s[j] = std::pow(static_cast<double>(j + 1), -p->alpha);
  } else if (const auto* e = std::get_if<ExpDecay>(&g.spectrum)) {
    s.resize(e->rank ? e->rank : q);
    for (std::size_t j = 0; j < s.size(); ++j) s[j] = std::exp(-e->beta * static_cast<double>(j));
  } else if (const auto* l = std::get_if<LowRankPlusNoise>(&g.spectrum)) {
    s.assign(l->r, 1.0);
  } else if (const auto* x = std::get_if<ExactRank>(&g.spectrum)) {
    s.assign(x->r, 1.0);
  }
  return s;
}

namespace detail {

inline DenseMatrix graph_incidence(const GraphIncidence& gi, Rng rng) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < gi.vertices; ++i) {
    for (std::size_t j = i + 1; j < gi.vertices; ++j) {
      if (rng.next_unit() < gi.edge_prob) edges.emplace_back(i, j);
    }
  }
  if (edges.empty()) throw InvalidSpec("GraphIncidence produced no edges");
  RowMatrix b = RowMatrix::Zero(static_cast<Eigen::Index>(edges.size()), static_cast<Eigen::Index>(gi.vertices));
  for (std::size_t e = 0; e < edges.size(); ++e) {
    b(Eigen::Index(e), Eigen::Index(edges[e].first)) = 1.0;
    b(Eigen::Index(e), Eigen::Index(edges[e].second)) = -1.0;
  }
  return DenseMatrix(std::move(b));
}

}  // namespace detail

inline DenseMatrix generate(const GeneratorSpec& g) {
  validate(g);
  const Rng root(g.seed);
  if (const auto* gi = std::get_if<GraphIncidence>(&g.spectrum)) return detail::graph_incidence(*gi, root.split(4));
  const std::vector<double> sigma = prescribed_spectrum(g);
  const std::size_t q = sigma.size();
  Rng ru = root.split(1);
  Rng rv = root.split(2);
  const Eigen::MatrixXd u = random_orthonormal(g.n, q, ru);
  const Eigen::MatrixXd v = random_orthonormal(g.m, q, rv);
  const Eigen::Map<const Eigen::VectorXd> s(sigma.data(), static_cast<Eigen::Index>(q));
  RowMatrix a = u * s.asDiagonal() * v.transpose();
  if (const auto* l = std::get_if<LowRankPlusNoise>(&g.spectrum)) {
    if (l->noise_sigma > 0.0) {
      Rng rn = root.split(3);
      double* p = a.data();
      for (std::size_t i = 0; i < g.n * g.m; ++i) p[i] += l->noise_sigma * rn.next_gaussian();
    }
  }
  return DenseMatrix(std::move(a));
}

/// Right-hand side b = A g + noise_scale * h with g, h standard normal, drawn
/// from stream 9 of `seed`. The default noise_scale sqrt(rank / rows) makes
/// ||noise|| comparable to ||A g|| for unit spectra.
inline Vector regression_rhs(const DenseMatrix& a, std::uint64_t seed, std::optional<double> noise_scale = std::nullopt,
                             std::optional<std::size_t> rank = std::nullopt) {
  Rng rng = Rng(seed).split(9);
  Vector g(static_cast<Eigen::Index>(a.cols()));
  for (Eigen::Index i = 0; i < g.size(); ++i) g(i) = rng.next_gaussian();
  Vector b = a.eigen() * g;
  const double r = static_cast<double>(rank.value_or(std::min(a.rows(), a.cols())));
  const double scale = noise_scale.value_or(std::sqrt(r / static_cast<double>(a.rows())));
  for (Eigen::Index i = 0; i < b.size(); ++i) b(i) += scale * rng.next_gaussian();
  return b;
}

}  // namespace sketchspec
