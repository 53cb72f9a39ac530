#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "swat/bounds/lemmas.hpp"
#include "swat/bounds/tail_sums.hpp"

namespace swat {

inline const std::vector<std::string>& lemma_names() {
  static const std::vector<std::string> names{"softmax-concentration", "softmax-lipschitz", "fnn-lipschitz-norm",
                                              "fnn-perturbation",      "attention",         "composite",
                                              "tail-sums"};
  return names;
}

/// The fixed C.7 configurations: the hand example abar = (1, 2, 4), T = 3,
/// and the geometric prefix abar_i = 2^{i-1} (i <= 6) on T = 1..10.
inline std::vector<TailSumCase> fixed_tail_cases() {
  std::vector<TailSumCase> out{{{1, 2, 4}, {1, 1.5, 3}, 3.0, 1.0}};
  for (int T = 1; T <= 10; ++T)
    out.push_back({{1, 2, 4, 8, 16, 32}, {1, 1.5, 3, 6, 12, 24}, static_cast<double>(T), 1.0});
  return out;
}

struct BoundsSuiteConfig {
  SweepConfig sweep;
  long tail_configs = 40;  // random C.7 configurations on top of the fixed ones
};

/// Runs one named lemma family, or every family for "all". Family i of
/// lemma_names() draws from derive_seed(seed, {i}), so a family gives the
/// same records whether it runs alone or inside "all".
inline std::vector<BoundCheckReport> run_bounds_suite(const std::string& lemma, const BoundsSuiteConfig& cfg,
                                                      std::uint64_t seed) {
  const auto& names = lemma_names();
  if (lemma != "all" && std::find(names.begin(), names.end(), lemma) == names.end())
    throw UsageError("unknown lemma '" + lemma + "'");
  if (cfg.sweep.trials < 1) throw UsageError("bounds sweeps need at least one trial");
  if (cfg.tail_configs < 0) throw UsageError("tail configuration count must be non-negative");
  cfg.sweep.require_hypotheses();
  std::vector<BoundCheckReport> out;
  auto append = [&](std::vector<BoundCheckReport> r) {
    for (auto& x : r) out.push_back(std::move(x));
  };
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string& n = names[i];
    if (lemma != "all" && lemma != n) continue;
    const std::uint64_t s = derive_seed(seed, {i});
    if (n == "softmax-concentration") out.push_back(check_softmax_concentration(cfg.sweep, s));
    if (n == "softmax-lipschitz") out.push_back(check_softmax_lipschitz(cfg.sweep, s));
    if (n == "fnn-lipschitz-norm") append(check_fnn_lipschitz_and_norm(cfg.sweep, s));
    if (n == "fnn-perturbation") out.push_back(check_fnn_perturbation(cfg.sweep, s));
    if (n == "attention") append(check_attention_lipschitz_norm_perturb(cfg.sweep, s));
    if (n == "composite") out.push_back(check_composite_lipschitz(cfg.sweep, s));
    if (n == "tail-sums") {
      auto cases = fixed_tail_cases();
      for (auto& c : random_tail_cases(cfg.tail_configs, s)) cases.push_back(std::move(c));
      append(check_tail_sums(cases, 20'000'000, cfg.sweep.keep_records));
    }
  }
  return out;
}

}  // namespace swat
