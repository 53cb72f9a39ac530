#pragma once

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "swat/bounds/report.hpp"
#include "swat/core/errors.hpp"
#include "swat/util/hash.hpp"

namespace swat {

/// Finite prefixes of the sequences in Lemma C.7. A prefix stands for the
/// sequence continued by +infinity, so both sides are exact finite
/// quantities and the lemma applies to it verbatim.
struct TailSumCase {
  std::vector<double> abar;        // positive, non-decreasing, abar_1 >= 1
  std::vector<double> abar_prime;  // positive, non-decreasing, abar'_1 = 1, abar'_i < abar_i (i >= 2)
  double T = 1.0;
  double beta = 1.0;
};

struct TailSumValues {
  double first_lhs = 0.0;   // sum_{<abar, s> < T} 2^{|s|}
  double first_rhs = 0.0;   // 8 prod_{i>=2} 1/(1 - 2^{-(abar_i - abar_1)}) 2^T
  double second_lhs = 0.0;  // sum_{<abar', s> >= T} 2^{-beta <abar, s>}
  double second_rhs = 0.0;  // (1 - 2^{-beta})^{-1} prod_{i>=2} 1/(1 - 2^{-beta (abar_i - abar'_i)}) 2^{-beta T}
  long enumerated = 0;
};

namespace detail {

/// Visits every s in N_0^k with <a, s> < T; cb(s, <a, s>, |s|).
inline long enumerate_below(const std::vector<double>& a, double T, long budget,
                            const std::function<void(const std::vector<int>&, long)>& cb) {
  std::vector<int> s(a.size(), 0);
  long count = 0;
  std::function<void(std::size_t, double, long)> walk = [&](std::size_t pos, double g, long level) {
    if (pos == a.size()) {
      if (++count > budget) throw ResourceError("tail-sum enumeration exceeds " + std::to_string(budget) + " vectors");
      cb(s, level);
      return;
    }
    for (int v = 0; g + a[pos] * v < T; ++v) {
      s[pos] = v;
      walk(pos + 1, g + a[pos] * v, level + v);
    }
    s[pos] = 0;
  };
  if (T > 0) walk(0, 0.0, 0);
  return count;
}

}  // namespace detail

inline void require_tail_hypotheses(const TailSumCase& c) {
  const auto& a = c.abar;
  const auto& ap = c.abar_prime;
  if (a.empty() || a.size() != ap.size()) throw UsageError("abar and abar' need the same non-zero length");
  if (!(c.beta > 0)) throw HypothesisError("beta must be positive");
  if (a[0] < 1.0) throw HypothesisError("abar_1 must be >= 1");
  if (ap[0] != 1.0) throw HypothesisError("abar'_1 must equal 1");
  for (std::size_t i = 1; i < a.size(); ++i) {
    if (a[i] < a[i - 1] || ap[i] < ap[i - 1]) throw HypothesisError("sequences must be non-decreasing");
    if (!(a[i] > a[0])) throw HypothesisError("first product diverges: abar_i must exceed abar_1 for i >= 2");
    if (!(a[i] > ap[i])) throw HypothesisError("second product diverges: abar_i must exceed abar'_i for i >= 2");
  }
}

/// Both sides of both inequalities. The second left side is an infinite sum;
/// it equals prod_i 1/(1 - 2^{-beta abar_i}) minus the finite sum over
/// <abar', s> < T, evaluated in 50-digit arithmetic so the subtraction
/// keeps full double precision.
inline TailSumValues tail_sum_values(const TailSumCase& c, long budget = 20'000'000) {
  require_tail_hypotheses(c);
  using big = boost::multiprecision::cpp_bin_float_50;
  TailSumValues out;
  const std::size_t k = c.abar.size();

  big first = 0;
  out.enumerated = detail::enumerate_below(c.abar, c.T, budget, [&](const std::vector<int>&, long level) {
    first += boost::multiprecision::ldexp(big(1), static_cast<int>(level));
  });
  big prod1 = 1;
  for (std::size_t i = 1; i < k; ++i) prod1 /= 1 - boost::multiprecision::pow(big(2), -(big(c.abar[i]) - c.abar[0]));
  out.first_lhs = static_cast<double>(first);
  out.first_rhs = static_cast<double>(8 * prod1 * boost::multiprecision::pow(big(2), big(c.T)));

  big total = 1;
  for (std::size_t i = 0; i < k; ++i) total /= 1 - boost::multiprecision::pow(big(2), -big(c.beta) * c.abar[i]);
  big below = 0;
  out.enumerated += detail::enumerate_below(c.abar_prime, c.T, budget, [&](const std::vector<int>& s, long) {
    big dot = 0;
    for (std::size_t i = 0; i < k; ++i) dot += big(c.abar[i]) * s[i];
    below += boost::multiprecision::pow(big(2), -big(c.beta) * dot);
  });
  big prod2 = 1;
  for (std::size_t i = 1; i < k; ++i)
    prod2 /= 1 - boost::multiprecision::pow(big(2), -big(c.beta) * (big(c.abar[i]) - c.abar_prime[i]));
  out.second_lhs = static_cast<double>(total - below);
  out.second_rhs = static_cast<double>(prod2 / (1 - boost::multiprecision::pow(big(2), -big(c.beta))) *
                                       boost::multiprecision::pow(big(2), -big(c.beta) * c.T));
  return out;
}

/// Lemma C.7 over a list of configurations; one record per configuration in
/// each of the two reports.
inline std::vector<BoundCheckReport> check_tail_sums(const std::vector<TailSumCase>& cases, long budget = 20'000'000,
                                                     bool keep_records = false) {
  std::vector<BoundCheckReport> out{
      {.lemma = "C.7-first", .statement = "sum_{<abar,s> < T} 2^|s| <= 8 prod 1/(1 - 2^{-(abar_i - abar_1)}) 2^T"},
      {.lemma = "C.7-second", .statement = "sum_{<abar',s> >= T} 2^{-beta <abar,s>} <= (1 - 2^-beta)^-1 prod 1/(1 - 2^{-beta(abar_i - abar'_i)}) 2^{-beta T}"}};
  for (std::size_t q = 0; q < cases.size(); ++q) {
    const auto& c = cases[q];
    const TailSumValues v = tail_sum_values(c, budget);
    const nlohmann::json inputs{{"abar", c.abar}, {"abar_prime", c.abar_prime}, {"T", c.T}, {"beta", c.beta}};
    TrialRecord first, second;
    first.observed = v.first_lhs;
    first.log_bound = std::log(v.first_rhs);
    second.observed = v.second_lhs;
    second.log_bound = std::log(v.second_rhs);
    for (auto* r : {&first, &second}) {
      r->trial = static_cast<long>(q);
      r->probe = "exhaustive";
      r->digest = digest(inputs.dump());
      r->inputs = inputs;
    }
    out[0].add(first, keep_records);
    out[1].add(second, keep_records);
  }
  return out;
}

/// Random admissible configurations: abar_1 in [1, 2], strictly increasing
/// gaps, abar'_i = abar_i / u for i >= 2 with u in [1.2, 3] (kept >= 1).
inline std::vector<TailSumCase> random_tail_cases(long n, std::uint64_t seed, int max_len = 6, double max_T = 10.0) {
  std::vector<TailSumCase> out;
  for (long q = 0; q < n; ++q) {
    Rng rng = make_rng(seed, {0x7a11, static_cast<std::uint64_t>(q)});
    TailSumCase c;
    const long k = uniform_int(rng, 1, max_len);
    c.abar.push_back(uniform(rng, 1.0, 2.0));
    for (long i = 1; i < k; ++i) c.abar.push_back(c.abar.back() + uniform(rng, 0.1, 2.0));
    const double u = uniform(rng, 1.2, 3.0);
    c.abar_prime.push_back(1.0);
    for (long i = 1; i < k; ++i) c.abar_prime.push_back(std::max(c.abar_prime.back(), std::max(1.0, c.abar[static_cast<std::size_t>(i)] / u)));
    c.T = uniform(rng, 0.5, max_T);
    c.beta = uniform(rng, 0.3, 2.0);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace swat
