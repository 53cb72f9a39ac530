#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"
#include "swat/core/errors.hpp"
#include "swat/core/token_window.hpp"
#include "swat/space/index.hpp"
#include "swat/space/smoothness.hpp"
#include "swat/util/rng.hpp"

namespace swat {

/// f = sum_r c_r psi_r with finite support. Acting on a sequence, f reads
/// coordinates relative to an evaluation position k: f(Sigma_k X).
struct SyntheticTarget {
  int d = 1;
  SmoothnessSpec spec;
  std::map<FreqIndex, double> coeffs;

  double eval(const TokenWindow& x, long k = 0) const {
    double v = 0.0;
    for (const auto& [r, c] : coeffs) v += c * psi_eval(r, x, k);
    return v;
  }

  /// Every coordinate some term depends on, canonical order.
  std::vector<Coord> support() const {
    std::vector<Coord> out;
    for (const auto& [r, c] : coeffs)
      for (const auto& [coord, v] : r) out.push_back(coord);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  /// max |j| over the support: how far from k the target reads.
  long reach() const {
    long u = 0;
    for (const auto& c : support()) u = std::max(u, std::labs(c.position));
    return u;
  }

  /// ||delta_s(f)||_2^2 per block under the uniform measure.
  std::map<DyadicIndex, double> block_energy() const {
    std::map<DyadicIndex, double> out;
    for (const auto& [r, c] : coeffs) out[dyadic_block_of(r)] += c * c;
    return out;
  }

  /// A bound on the Lipschitz constant w.r.t. the sup-norm of the inputs:
  /// sum_r |c_r| sum_{(i,j) in supp r} |d psi_r / d x_ij|_max.
  double lipschitz_bound() const {
    double lip = 0.0;
    for (const auto& [r, c] : coeffs) {
      const double amp = std::pow(std::numbers::sqrt2, static_cast<double>(r.size()));
      double slope = 0.0;
      for (const auto& [coord, ri] : r) slope += 2.0 * std::numbers::pi * static_cast<double>(std::labs(ri));
      lip += std::abs(c) * amp * slope;
    }
    return lip;
  }
};

namespace detail {

inline void require_exact_mode(const SyntheticTarget& f) {
  if (f.spec.p != 2.0) throw UsageError("exact smoothness norms need p = 2; use the Monte-Carlo estimator");
  for (const auto& [r, c] : f.coeffs)
    if (!std::isfinite(c)) throw UsageError("target has a non-finite coefficient");
}

}  // namespace detail

/// (sum_s 2^{theta gamma(s)} ||delta_s f||_2^theta)^{1/theta}, exact by
/// orthonormality (p = 2, uniform P_X).
inline double smoothness_norm(const SyntheticTarget& f) {
  detail::require_exact_mode(f);
  const double th = f.spec.theta;
  double sum = 0.0;
  for (const auto& [s, e] : f.block_energy()) sum += std::exp2(th * gamma_eval(f.spec, s)) * std::pow(std::sqrt(e), th);
  return std::pow(sum, 1.0 / th);
}

struct McEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

/// Monte-Carlo smoothness norm for general p >= 2: each block norm
/// (E|delta_s f|^p)^{1/p} is estimated from its own uniform sample, and the
/// standard error is propagated by the delta method.
inline McEstimate smoothness_norm_mc(const SyntheticTarget& f, long samples, std::uint64_t seed) {
  if (samples < 2) throw UsageError("Monte-Carlo norm needs at least 2 samples");
  const double p = f.spec.p, th = f.spec.theta;
  std::map<DyadicIndex, std::vector<std::pair<FreqIndex, double>>> blocks;
  for (const auto& [r, c] : f.coeffs) blocks[dyadic_block_of(r)].push_back({r, c});

  const long reach = f.reach();
  double sum = 0.0;
  std::vector<std::pair<double, double>> parts;  // (weight * n_s^theta, d/dm of it * se(m))
  std::uint64_t b = 0;
  for (const auto& [s, terms] : blocks) {
    Rng rng = make_rng(seed, {b++});
    TokenWindow x = TokenWindow::zeros(f.d, {-reach, reach});
    double m1 = 0.0, m2 = 0.0;
    for (long n = 0; n < samples; ++n) {
      for (Eigen::Index q = 0; q < x.data().size(); ++q) x.data().data()[q] = uniform(rng);
      double v = 0.0;
      for (const auto& [r, c] : terms) v += c * psi_eval(r, x);
      const double g = std::pow(std::abs(v), p);
      m1 += g;
      m2 += g * g;
    }
    const double mean = m1 / static_cast<double>(samples);
    const double var = std::max(0.0, m2 / static_cast<double>(samples) - mean * mean);
    const double se_mean = std::sqrt(var / static_cast<double>(samples - 1));
    const double w = std::exp2(th * gamma_eval(f.spec, s));
    // block term t = w * mean^{theta/p}
    const double t = w * std::pow(mean, th / p);
    const double dt = mean > 0 ? w * (th / p) * std::pow(mean, th / p - 1.0) * se_mean : 0.0;
    sum += t;
    parts.push_back({t, dt});
  }
  McEstimate out;
  out.value = std::pow(sum, 1.0 / th);
  const double outer = sum > 0 ? (1.0 / th) * std::pow(sum, 1.0 / th - 1.0) : 0.0;
  double var = 0.0;
  for (const auto& [t, dt] : parts) var += dt * dt;
  out.stderr_ = outer * std::sqrt(var);
  return out;
}

/// f_T = sum_{gamma(s) < T} delta_s(f).
inline SyntheticTarget truncate(const SyntheticTarget& f, double T) {
  SyntheticTarget out{f.d, f.spec, {}};
  for (const auto& [r, c] : f.coeffs)
    if (gamma_eval(f.spec, dyadic_block_of(r)) < T) out.coeffs.emplace(r, c);
  return out;
}

struct TruncationReport {
  double tail = 0.0;   // ||f - f_T||_2, exact
  double bound = 0.0;  // 2^{-T} ||f|| with the theta = 1 norm
};

inline TruncationReport truncation_error(const SyntheticTarget& f, double T) {
  detail::require_exact_mode(f);
  TruncationReport rep;
  double tail2 = 0.0, norm1 = 0.0;
  for (const auto& [s, e] : f.block_energy()) {
    const double g = gamma_eval(f.spec, s);
    if (g >= T) tail2 += e;
    norm1 += std::exp2(g) * std::sqrt(e);
  }
  rep.tail = std::sqrt(tail2);
  rep.bound = std::exp2(-T) * norm1;
  return rep;
}

/// ||f - g||_2 under the uniform measure (shared coordinates, shared d).
inline double l2_distance(const SyntheticTarget& f, const SyntheticTarget& g) {
  std::map<FreqIndex, double> diff = f.coeffs;
  for (const auto& [r, c] : g.coeffs) diff[r] -= c;
  double e = 0.0;
  for (const auto& [r, c] : diff) e += c * c;
  return std::sqrt(e);
}

/// Draws a random r with dyadic block s: per coordinate a uniform magnitude
/// in [floor(2^{s-1}), 2^s) and a uniform sign.
inline FreqIndex sample_frequency(const DyadicIndex& s, Rng& rng) {
  FreqIndex r;
  for (const auto& [c, level] : s) {
    const long lo = level == 1 ? 1 : 1L << (level - 1);
    const long hi = (1L << level) - 1;
    const long mag = uniform_int(rng, lo, hi);
    r.emplace(c, uniform(rng) < 0.5 ? -mag : mag);
  }
  return r;
}

struct TargetSamplerConfig {
  double gamma_cap = 8.0;   // blocks are drawn from {s : gamma_floor <= gamma(s) < gamma_cap}
  std::size_t terms = 20;   // support cap (distinct blocks)
  double norm = 1.0;        // rescaled smoothness norm
  double gamma_floor = 0.0;
  bool scale_by_gamma = false;  // coefficient ~ N(0, 2^{-2 gamma(s)}) instead of N(0, 1)
};

/// Blocks drawn without replacement with probability proportional to
/// 2^{-gamma(s)}, one frequency per block, Gaussian coefficients, then a
/// rescale to the requested smoothness norm.
inline SyntheticTarget sample_target(const SmoothnessSpec& spec, const TargetSamplerConfig& cfg, Rng& rng) {
  const FeatureIndexSet fis = feature_index_set(spec, cfg.gamma_cap, 2'000'000, true);
  if (fis.blocks.empty()) throw UsageError("sample_target: no blocks below the gamma cap");
  // Efraimidis-Spirakis keys: the top `terms` of u^{1/w} are a weighted
  // sample without replacement.
  std::vector<std::pair<double, std::size_t>> keys;
  keys.reserve(fis.blocks.size());
  for (std::size_t b = 0; b < fis.blocks.size(); ++b) {
    const double g = gamma_eval(spec, fis.blocks[b]);
    if (g < cfg.gamma_floor) continue;
    keys.push_back({std::log(uniform(rng, 1e-300, 1.0)) / std::exp2(-g), b});
  }
  if (keys.empty()) throw UsageError("sample_target: no blocks between the gamma floor and cap");
  const std::size_t n = std::min(cfg.terms, keys.size());
  std::partial_sort(keys.begin(), keys.begin() + static_cast<long>(n), keys.end(), std::greater<>());

  SyntheticTarget f{spec.rule.d, spec, {}};
  for (std::size_t q = 0; q < n; ++q) {
    const DyadicIndex& blk = fis.blocks[keys[q].second];
    const FreqIndex r = sample_frequency(blk, rng);
    f.coeffs[r] = gaussian(rng, cfg.scale_by_gamma ? std::exp2(-gamma_eval(spec, blk)) : 1.0);
  }
  const double norm = smoothness_norm(f);
  if (norm > 0)
    for (auto& [r, c] : f.coeffs) c *= cfg.norm / norm;
  return f;
}

inline nlohmann::json target_to_json(const SyntheticTarget& f) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& [r, c] : f.coeffs) {
    nlohmann::json coords = nlohmann::json::array(), rv = nlohmann::json::array();
    for (const auto& [coord, v] : r) {
      coords.push_back({coord.channel, coord.position});
      rv.push_back(v);
    }
    terms.push_back({{"coords", coords}, {"r", rv}, {"coefficient", c}});
  }
  return {{"d", f.d}, {"spec", spec_to_json(f.spec)}, {"terms", terms}};
}

inline SyntheticTarget target_from_json(const nlohmann::json& j) {
  SyntheticTarget f;
  try {
    f.d = j.at("d").get<int>();
    f.spec = spec_from_json(j.at("spec"));
    for (const auto& t : j.at("terms")) {
      FreqIndex r;
      const auto& coords = t.at("coords");
      const auto& rv = t.at("r");
      if (coords.size() != rv.size()) throw UsageError("target term: coords and r differ in length");
      for (std::size_t q = 0; q < coords.size(); ++q) {
        const long v = rv[q].get<long>();
        if (v == 0) throw UsageError("target term: stored r entries must be nonzero");
        r.emplace(Coord{coords[q].at(0).get<int>(), coords[q].at(1).get<long>()}, v);
      }
      f.coeffs[r] += t.at("coefficient").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("malformed target: ") + e.what());
  }
  return f;
}

}  // namespace swat
