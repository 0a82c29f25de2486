#pragma once

// JSON encodings for sketches, reports and generator specs. Non-finite reals
// are written as the strings "inf", "-inf" or "nan" because JSON has no
// literal for them.

#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "sketchspec/amm.hpp"
#include "sketchspec/error.hpp"
#include "sketchspec/generator.hpp"
#include "sketchspec/regression.hpp"
#include "sketchspec/sketch.hpp"

namespace sketchspec {

using json = nlohmann::ordered_json;

inline json real_to_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double real_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    if (s == "nan") return NAN;
  }
  throw ConfigError("expected a number, got " + j.dump());
}

inline json to_json(const SketchOp& op) {
  json j;
  j["kind"] = std::string(to_string(op.kind));
  j["t"] = op.t;
  j["n"] = op.n;
  j["seed"] = op.seed;
  if (op.probabilities) j["probabilities"] = *op.probabilities;
  return j;
}

inline SketchOp sketch_op_from_json(const json& j) {
  try {
    SketchOp op;
    op.kind = sketch_kind_from_string(j.at("kind").get<std::string>());
    op.t = j.at("t").get<std::size_t>();
    op.n = j.at("n").get<std::size_t>();
    op.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("probabilities")) op.probabilities = j.at("probabilities").get<std::vector<double>>();
    op.validate();
    return op;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sketch op: ") + e.what());
  }
}

inline json to_json(const ErrorReport& r) {
  return json{{"t", r.t_used},
              {"eps", r.eps},
              {"achieved_error", real_to_json(r.achieved_error)},
              {"bound", real_to_json(r.bound)},
              {"relative_eps", real_to_json(r.relative_eps)},
              {"norm_a", r.norm_a},
              {"norm_b", r.norm_b},
              {"passed", r.passed}};
}

inline json to_json(const RegressionReport& r) {
  return json{{"eps", r.eps},
              {"residual_ratio", real_to_json(r.residual_ratio)},
              {"solution_distance", real_to_json(r.solution_distance)},
              {"bound_rhs", real_to_json(r.bound_rhs)},
              {"passed_approx", r.passed_approx},
              {"passed_distance", r.passed_distance}};
}

inline json to_json(const GeneratorSpec& g) {
  json s;
  s["kind"] = std::string(spectrum_name(g.spectrum));
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, PowerLaw>) {
          s["alpha"] = v.alpha;
          if (v.rank) s["rank"] = v.rank;
        } else if constexpr (std::is_same_v<T, ExpDecay>) {
          s["beta"] = v.beta;
          if (v.rank) s["rank"] = v.rank;
        } else if constexpr (std::is_same_v<T, LowRankPlusNoise>) {
          s["r"] = v.r;
          s["noise_sigma"] = v.noise_sigma;
        } else if constexpr (std::is_same_v<T, ExactRank>) {
          s["r"] = v.r;
        } else {
          s["vertices"] = v.vertices;
          s["edge_prob"] = v.edge_prob;
        }
      },
      g.spectrum);
  return json{{"shape", {{"n", g.n}, {"m", g.m}}}, {"spectrum", s}, {"seed", g.seed}};
}

namespace detail {

// Literals built in code are signed even when nonnegative; parsed text is unsigned.
inline bool is_nonnegative_integer(const json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

// Reads a required or optional member with a type check; errors name the path.
template <typename T>
T member(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
    if (!is_nonnegative_integer(j.at(key))) {
      throw ConfigError(where + "." + key + ": expected a nonnegative integer, got " + j.at(key).dump());
    }
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type (" + j.at(key).dump() + ")");
  }
}

template <typename T>
T member_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return member<T>(j, key, where);
}

}  // namespace detail

inline GeneratorSpec generator_from_json(const json& j, const std::string& where = "generator") {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  GeneratorSpec g;
  const json& shape = j.contains("shape") ? j.at("shape") : json::object();
  g.n = detail::member_or<std::size_t>(shape, "n", 1, where + ".shape");
  g.m = detail::member_or<std::size_t>(shape, "m", 1, where + ".shape");
  g.seed = detail::member_or<std::uint64_t>(j, "seed", 0, where);
  if (!j.contains("spectrum")) throw ConfigError(where + ": missing 'spectrum'");
  const json& s = j.at("spectrum");
  const std::string sw = where + ".spectrum";
  const auto kind = detail::member<std::string>(s, "kind", sw);
  if (kind == "PowerLaw") {
    g.spectrum = PowerLaw{detail::member<double>(s, "alpha", sw), detail::member_or<std::size_t>(s, "rank", 0, sw)};
  } else if (kind == "ExpDecay") {
    g.spectrum = ExpDecay{detail::member<double>(s, "beta", sw), detail::member_or<std::size_t>(s, "rank", 0, sw)};
  } else if (kind == "LowRankPlusNoise") {
    g.spectrum = LowRankPlusNoise{detail::member<std::size_t>(s, "r", sw), detail::member<double>(s, "noise_sigma", sw)};
  } else if (kind == "ExactRank") {
    g.spectrum = ExactRank{detail::member<std::size_t>(s, "r", sw)};
  } else if (kind == "GraphIncidence") {
    g.spectrum =
        GraphIncidence{detail::member<std::size_t>(s, "vertices", sw), detail::member<double>(s, "edge_prob", sw)};
  } else {
    throw ConfigError(sw + ".kind: unknown spectrum '" + kind + "'");
  }
  try {
    validate(g);
  } catch (const InvalidSpec& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return g;
}

}  // namespace sketchspec
