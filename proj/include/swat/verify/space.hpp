#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "swat/space/index.hpp"
#include "swat/space/smoothness.hpp"
#include "swat/space/target.hpp"
#include "swat/util/rng.hpp"

namespace swat {

/// Checks dyadic_level(r) against a direct scan of 2^{s-1} <= |r| < 2^s
/// (s = 0 holding only r = 0) for every |r| <= limit.
struct DyadicScan {
  long limit = 0;
  long checked = 0;
  std::vector<long> mismatches;
  bool pass() const { return mismatches.empty() && checked == 2 * limit + 1; }
};

inline DyadicScan scan_dyadic_levels(long limit) {
  DyadicScan out{limit, 0, {}};
  for (long r = -limit; r <= limit; ++r) {
    int hits = 0, found = -1;
    for (int s = 0; s <= 62; ++s) {
      const long lo = s == 0 ? 0 : 1L << (s - 1);
      const long hi = s == 0 ? 1 : 1L << s;
      if (lo <= std::labs(r) && std::labs(r) < hi) {
        ++hits;
        found = s;
      }
    }
    ++out.checked;
    if (hits != 1 || dyadic_level(r) != found) out.mismatches.push_back(r);
  }
  return out;
}

/// Brute-force description of I(T) for a finite rule: every block in the
/// box prod_c [0, floor(T / a_c)] is scanned and filtered by gamma(s) < T.
struct BoxCount {
  std::size_t d_max = 0;
  int f_max = 0;
  double G = 0.0;
  std::size_t count = 0;
};

inline BoxCount box_count(SmoothnessKind kind, const std::vector<double>& a, double T) {
  BoxCount out;
  if (T <= 0) return out;
  std::vector<int> hi;
  for (double v : a) hi.push_back(static_cast<int>(std::floor(T / v)));
  std::vector<int> s(a.size(), 0);
  std::vector<bool> used(a.size(), false);
  while (true) {
    double g = 0.0;
    long level = 0;
    for (std::size_t c = 0; c < a.size(); ++c) {
      g = kind == SmoothnessKind::mixed ? g + a[c] * s[c] : std::max(g, a[c] * s[c]);
      level += s[c];
    }
    if (g < T) {
      ++out.count;
      out.G += std::exp2(static_cast<double>(level));
      for (std::size_t c = 0; c < a.size(); ++c) {
        out.f_max = std::max(out.f_max, s[c]);
        if (s[c]) used[c] = true;
      }
    }
    std::size_t c = 0;
    while (c < a.size() && s[c] == hi[c]) s[c++] = 0;
    if (c == a.size()) break;
    ++s[c];
  }
  for (bool u : used) out.d_max += u;
  return out;
}

struct IndexSetAgreement {
  long specs = 0;
  std::vector<nlohmann::json> mismatches;
  bool pass() const { return mismatches.empty(); }
};

/// Random table rules (d in {1, 2}, up to five coordinates with smoothness
/// in [0.6, 4]), both kinds, T in [0.5, 6]; spec q uses make_rng(seed, {q}).
inline IndexSetAgreement compare_index_sets(long specs, std::uint64_t seed) {
  IndexSetAgreement out;
  for (long q = 0; q < specs; ++q) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(q)});
    const int d = static_cast<int>(uniform_int(rng, 1, 2));
    std::map<Coord, double> entries;
    for (long n = uniform_int(rng, 1, 5), i = 0; i < n; ++i)
      entries[{static_cast<int>(uniform_int(rng, 0, d - 1)), uniform_int(rng, -4, 4)}] = uniform(rng, 0.6, 4.0);
    const auto kind = uniform(rng) < 0.5 ? SmoothnessKind::mixed : SmoothnessKind::anisotropic;
    const double T = uniform(rng, 0.5, 6.0);
    const SmoothnessSpec spec{kind, SmoothnessRule::table(d, entries)};
    const auto fis = feature_index_set(spec, T);
    std::vector<double> a;
    for (const auto& [c, v] : entries)
      if (v < T) a.push_back(v);
    const BoxCount box = box_count(kind, a, T);
    ++out.specs;
    if (fis.d_max != box.d_max || fis.f_max != box.f_max || fis.G != box.G || fis.block_count != box.count)
      out.mismatches.push_back({{"spec", spec_to_json(spec)},
                                {"T", T},
                                {"got", {fis.d_max, fis.f_max, fis.G, fis.block_count}},
                                {"oracle", {box.d_max, box.f_max, box.G, box.count}}});
  }
  return out;
}

/// ||f - f_T||_2 <= 2^{-T} ||f||_gamma on unit-norm targets, with the tail
/// cross-checked against the L2 distance to the truncated series.
struct TruncationSweep {
  long targets = 0;
  long checks = 0;
  double max_ratio = 0.0;  // tail / bound
  double max_identity_gap = 0.0;  // |tail - ||f - truncate(f, T)||_2|
  std::vector<nlohmann::json> violations;
  bool pass() const { return violations.empty(); }
};

/// Targets alternate between a mixed and an anisotropic power rule; target
/// q uses make_rng(seed, {q}).
inline TruncationSweep sweep_truncation(long targets, const std::vector<double>& T_grid, std::uint64_t seed) {
  const SmoothnessSpec specs[2] = {{SmoothnessKind::mixed, SmoothnessRule::power({1.0}, 1.0)},
                                   {SmoothnessKind::anisotropic, SmoothnessRule::power({2.0, 3.0}, 1.0)}};
  TruncationSweep out;
  for (long q = 0; q < targets; ++q) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(q)});
    const SyntheticTarget f = sample_target(specs[q % 2], {9.0, 30, 1.0}, rng);
    ++out.targets;
    for (double T : T_grid) {
      const auto rep = truncation_error(f, T);
      const double gap = std::abs(rep.tail - l2_distance(f, truncate(f, T)));
      ++out.checks;
      if (rep.bound > 0) out.max_ratio = std::max(out.max_ratio, rep.tail / rep.bound);
      out.max_identity_gap = std::max(out.max_identity_gap, gap);
      if (rep.tail > rep.bound * (1 + 1e-12) || gap > 1e-12)
        out.violations.push_back({{"target", q}, {"T", T}, {"tail", rep.tail}, {"bound", rep.bound}, {"gap", gap}});
    }
  }
  return out;
}

}  // namespace swat
