#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "swat/core/errors.hpp"
#include "swat/space/index.hpp"

namespace swat {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Smoothness parameter a : (i, j) -> (0, inf]. Coordinates with a = inf are
/// absent (a finite rule). `floor_beyond(R)` is the declared growth bound: a
/// lower bound on a_ij over every channel and every |j| > R. Rules without it
/// cannot be enumerated.
struct SmoothnessRule {
  std::string name;
  std::string family;  // "finite", "logarithmic" (a = Omega(log |j|)), "polynomial" (a = Omega(j^alpha))
  int d = 1;
  std::function<double(int, long)> value;
  std::function<double(long)> floor_beyond;
  nlohmann::json config;  // factory arguments, enough to rebuild the rule

  double operator()(int i, long j) const { return value(i, j); }
  double operator()(const Coord& c) const { return value(c.channel, c.position); }
  bool enumerable() const { return static_cast<bool>(floor_beyond); }

  /// Explicit finite table; coordinates not listed are absent.
  static SmoothnessRule table(int d, std::map<Coord, double> entries, std::string name = "table") {
    long reach = 0;
    for (const auto& [c, v] : entries) {
      if (!(v > 0.0)) throw UsageError("smoothness values must be positive");
      reach = std::max(reach, std::labs(c.position));
    }
    nlohmann::json cfg{{"rule", "table"}, {"d", d}, {"entries", nlohmann::json::array()}};
    for (const auto& [c, v] : entries) cfg["entries"].push_back({c.channel, c.position, v});
    auto shared = std::make_shared<const std::map<Coord, double>>(std::move(entries));
    return {std::move(name), "finite", d,
            [shared](int i, long j) {
              auto it = shared->find({i, j});
              return it == shared->end() ? kInf : it->second;
            },
            [reach](long r) { return r >= reach ? kInf : 0.0; }, std::move(cfg)};
  }

  /// a_ij = base_i * (|j| + 1)^alpha.
  static SmoothnessRule power(std::vector<double> base, double alpha) {
    const int d = static_cast<int>(base.size());
    const double lo = *std::min_element(base.begin(), base.end());
    return {"power", "polynomial", d,
            [base, alpha](int i, long j) {
              return base[static_cast<std::size_t>(i)] * std::pow(static_cast<double>(std::labs(j) + 1), alpha);
            },
            [lo, alpha](long r) { return lo * std::pow(static_cast<double>(r + 2), alpha); },
            {{"rule", "power"}, {"base", base}, {"alpha", alpha}}};
  }

  /// a_ij = base_i + slope * log2(|j| + 1).
  static SmoothnessRule logarithmic(std::vector<double> base, double slope) {
    const int d = static_cast<int>(base.size());
    const double lo = *std::min_element(base.begin(), base.end());
    return {"logarithmic", "logarithmic", d,
            [base, slope](int i, long j) {
              return base[static_cast<std::size_t>(i)] + slope * std::log2(static_cast<double>(std::labs(j) + 1));
            },
            [lo, slope](long r) { return lo + slope * std::log2(static_cast<double>(r + 2)); },
            {{"rule", "logarithmic"}, {"base", base}, {"slope", slope}}};
  }

  /// Listed coordinates take the listed values; every other coordinate gets
  /// far + slope * |j|. Used to plant a few important features at chosen
  /// offsets.
  static SmoothnessRule planted(int d, std::map<Coord, double> entries, double far, double slope) {
    long reach = 0;
    double lowest = kInf;
    for (const auto& [c, v] : entries) {
      reach = std::max(reach, std::labs(c.position));
      lowest = std::min(lowest, v);
    }
    nlohmann::json cfg{{"rule", "planted"}, {"d", d}, {"far", far}, {"slope", slope}, {"entries", nlohmann::json::array()}};
    for (const auto& [c, v] : entries) cfg["entries"].push_back({c.channel, c.position, v});
    auto shared = std::make_shared<const std::map<Coord, double>>(std::move(entries));
    return {"planted", "polynomial", d,
            [shared, far, slope](int i, long j) {
              auto it = shared->find({i, j});
              return it == shared->end() ? far + slope * static_cast<double>(std::labs(j)) : it->second;
            },
            [reach, lowest, far, slope](long r) {
              const double rest = far + slope * static_cast<double>(r + 1);
              return r >= reach ? rest : std::min(rest, lowest);
            },
            std::move(cfg)};
  }

  /// Rank-indexed rule for piecewise targets: positions 1..l (importance
  /// ranks), a_ij = base_i * j^alpha; other positions absent.
  static SmoothnessRule ranks(std::vector<double> base, double alpha, long l) {
    const int d = static_cast<int>(base.size());
    return {"ranks", "polynomial", d,
            [base, alpha, l](int i, long j) {
              if (j < 1 || j > l) return kInf;
              return base[static_cast<std::size_t>(i)] * std::pow(static_cast<double>(j), alpha);
            },
            [l](long r) { return r >= l ? kInf : 0.0; },
            {{"rule", "ranks"}, {"base", base}, {"alpha", alpha}, {"l", l}}};
  }
};

enum class SmoothnessKind { mixed, anisotropic };

inline std::string to_string(SmoothnessKind k) { return k == SmoothnessKind::mixed ? "mixed" : "anisotropic"; }

struct SmoothnessSpec {
  SmoothnessKind kind = SmoothnessKind::mixed;
  SmoothnessRule rule;
  double p = 2.0;
  double theta = 1.0;
};

namespace detail {

inline std::map<Coord, double> rule_entries(const nlohmann::json& j) {
  std::map<Coord, double> entries;
  for (const auto& e : j.at("entries")) entries[{e.at(0).get<int>(), e.at(1).get<long>()}] = e.at(2).get<double>();
  return entries;
}

}  // namespace detail

inline SmoothnessRule rule_from_json(const nlohmann::json& j) {
  try {
    const std::string rule = j.at("rule").get<std::string>();
    if (rule == "table") return SmoothnessRule::table(j.at("d").get<int>(), detail::rule_entries(j));
    if (rule == "power") return SmoothnessRule::power(j.at("base").get<std::vector<double>>(), j.at("alpha").get<double>());
    if (rule == "logarithmic")
      return SmoothnessRule::logarithmic(j.at("base").get<std::vector<double>>(), j.at("slope").get<double>());
    if (rule == "planted")
      return SmoothnessRule::planted(j.at("d").get<int>(), detail::rule_entries(j), j.at("far").get<double>(),
                                     j.at("slope").get<double>());
    if (rule == "ranks")
      return SmoothnessRule::ranks(j.at("base").get<std::vector<double>>(), j.at("alpha").get<double>(),
                                   j.at("l").get<long>());
    throw UsageError("unknown smoothness rule '" + rule + "'");
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("malformed smoothness rule: ") + e.what());
  }
}

inline nlohmann::json spec_to_json(const SmoothnessSpec& spec) {
  nlohmann::json j = spec.rule.config;
  j["kind"] = to_string(spec.kind);
  j["p"] = spec.p;
  j["theta"] = spec.theta;
  return j;
}

inline SmoothnessSpec spec_from_json(const nlohmann::json& j) {
  SmoothnessSpec spec;
  const std::string kind = j.value("kind", std::string("mixed"));
  if (kind == "mixed") spec.kind = SmoothnessKind::mixed;
  else if (kind == "anisotropic") spec.kind = SmoothnessKind::anisotropic;
  else throw UsageError("unknown smoothness kind '" + kind + "'");
  spec.rule = rule_from_json(j);
  spec.p = j.value("p", 2.0);
  spec.theta = j.value("theta", 1.0);
  if (spec.p < 2.0 || spec.theta < 1.0) throw UsageError("smoothness needs p >= 2 and theta >= 1");
  return spec;
}

/// gamma(s) = <a, s> (mixed) or max a_ij s_ij (anisotropic); 0 for s = empty.
inline double gamma_eval(const SmoothnessSpec& spec, const DyadicIndex& s) {
  double g = 0.0;
  for (const auto& [c, v] : s) {
    if (v == 0) continue;
    const double term = spec.rule(c) * v;
    g = spec.kind == SmoothnessKind::mixed ? g + term : std::max(g, term);
  }
  return g;
}

/// Every coordinate with a_ij < bound, in canonical order.
inline std::vector<Coord> coords_below(const SmoothnessRule& rule, double bound, long max_radius = 1L << 20) {
  if (!rule.enumerable()) throw UsageError("smoothness rule '" + rule.name + "' declares no growth bound");
  std::vector<Coord> out;
  for (long r = 0;; ++r) {
    if (r > max_radius) throw ResourceError("coordinate enumeration exceeded radius " + std::to_string(max_radius));
    for (long j : {-r, r}) {
      for (int i = 0; i < rule.d; ++i)
        if (rule(i, j) < bound) out.push_back({i, j});
      if (r == 0) break;
    }
    if (rule.floor_beyond(r) >= bound) break;
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct DerivedSmoothness {
  std::vector<double> abar;            // first k sorted values (fewer for finite rules)
  std::vector<Coord> abar_coords;      // where they sit
  double a_tilde_partial = 0.0;        // (sum_{i<=k} 1/abar_i)^{-1}; an upper bound on a~
  double last_increment = 0.0;         // 1/abar_k, the last partial-sum step
  double a_dagger = 0.0;               // abar_1 (mixed) or a_tilde_partial (anisotropic)
  double weak_norm = 0.0;              // max_{j<=k} j^alpha / abar_j
};

/// Enumerates abar in ascending order by widening |j| until the growth bound
/// proves nothing smaller remains outside.
inline DerivedSmoothness derived_smoothness(const SmoothnessSpec& spec, std::size_t k, double alpha = 1.0,
                                            long max_radius = 1L << 20) {
  if (k == 0) throw UsageError("derived_smoothness needs k >= 1");
  const auto& rule = spec.rule;
  if (!rule.enumerable()) throw UsageError("smoothness rule '" + rule.name + "' declares no growth bound");
  std::vector<std::pair<double, Coord>> seen;
  for (long r = 0;; ++r) {
    if (r > max_radius) throw ResourceError("smoothness enumeration exceeded radius " + std::to_string(max_radius));
    for (long j : {-r, r}) {
      for (int i = 0; i < rule.d; ++i)
        if (double v = rule(i, j); std::isfinite(v)) seen.push_back({v, {i, j}});
      if (r == 0) break;
    }
    const double fb = rule.floor_beyond(r);
    if (fb == kInf) break;
    if (seen.size() >= k) {
      std::nth_element(seen.begin(), seen.begin() + static_cast<long>(k) - 1, seen.end());
      if (fb >= seen[k - 1].first) break;
    }
  }
  std::sort(seen.begin(), seen.end());
  if (seen.size() > k) seen.resize(k);
  if (seen.empty()) throw UsageError("smoothness rule has no coordinates");

  DerivedSmoothness out;
  double inv = 0.0;
  for (std::size_t j = 0; j < seen.size(); ++j) {
    out.abar.push_back(seen[j].first);
    out.abar_coords.push_back(seen[j].second);
    inv += 1.0 / seen[j].first;
    out.weak_norm = std::max(out.weak_norm, std::pow(static_cast<double>(j + 1), alpha) / seen[j].first);
  }
  out.a_tilde_partial = 1.0 / inv;
  out.last_increment = 1.0 / seen.back().first;
  out.a_dagger = spec.kind == SmoothnessKind::mixed ? out.abar.front() : out.a_tilde_partial;
  return out;
}

/// I(T, gamma), d_max, f_max and G(T, gamma) = sum_{gamma(s) < T} 2^s.
struct FeatureIndexSet {
  std::vector<Coord> coords;  // I(T, gamma), canonical order
  std::size_t d_max = 0;
  int f_max = 0;
  double G = 0.0;
  std::vector<DyadicIndex> blocks;  // every s with gamma(s) < T (when requested)
  std::size_t block_count = 0;

  long max_offset() const {
    long u = 0;
    for (const auto& c : coords) u = std::max(u, std::labs(c.position));
    return u;
  }
};

/// Depth-first enumeration of {s : gamma(s) < T}. For T <= 0 nothing
/// qualifies, not even s = empty.
inline FeatureIndexSet feature_index_set(const SmoothnessSpec& spec, double T, std::size_t budget = 2'000'000,
                                         bool keep_blocks = false) {
  FeatureIndexSet out;
  if (!(T > 0.0)) return out;
  out.coords = coords_below(spec.rule, T);
  out.d_max = out.coords.size();
  std::vector<double> a;
  for (const auto& c : out.coords) a.push_back(spec.rule(c));

  std::vector<int> s(out.coords.size(), 0);
  const bool mixed = spec.kind == SmoothnessKind::mixed;
  // The recursion fixes s[pos..] given gamma of the prefix and sum of levels.
  std::function<void(std::size_t, double, long)> walk = [&](std::size_t pos, double g, long level) {
    if (pos == s.size()) {
      if (++out.block_count > budget)
        throw ResourceError("feature_index_set: more than " + std::to_string(budget) + " blocks below T");
      out.G += std::ldexp(1.0, static_cast<int>(level));
      for (std::size_t h = 0; h < s.size(); ++h) out.f_max = std::max(out.f_max, s[h]);
      if (keep_blocks) {
        DyadicIndex blk;
        for (std::size_t h = 0; h < s.size(); ++h)
          if (s[h]) blk.emplace(out.coords[h], s[h]);
        out.blocks.push_back(std::move(blk));
      }
      return;
    }
    for (int v = 0;; ++v) {
      const double term = a[pos] * v;
      const double g2 = mixed ? g + term : std::max(g, term);
      if (!(g2 < T)) break;
      s[pos] = v;
      walk(pos + 1, g2, level + v);
    }
    s[pos] = 0;
  };
  walk(0, 0.0, 0);
  return out;
}

}  // namespace swat
