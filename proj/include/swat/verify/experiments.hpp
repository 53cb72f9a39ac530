#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <vector>

#include "swat/construct/theorem1.hpp"
#include "swat/construct/theorem2.hpp"
#include "swat/experiments/data.hpp"
#include "swat/experiments/model.hpp"
#include "swat/experiments/studies.hpp"

namespace swat {

/// Small random architecture covering every layer type: 1-2 blocks, 1-3
/// heads, windows 0-2, one or two hidden FNN layers, PE on half the draws
/// and an output clip on about a third.
inline ModelShape random_shape(Rng& rng) {
  ModelShape s;
  s.token_dim = static_cast<int>(uniform_int(rng, 1, 2));
  s.embed_dim = static_cast<int>(uniform_int(rng, 2, 5));
  s.key_dim = static_cast<int>(uniform_int(rng, 1, s.embed_dim));
  s.windows.assign(static_cast<std::size_t>(uniform_int(rng, 1, 2)), 0);
  for (auto& w : s.windows) w = static_cast<int>(uniform_int(rng, 0, 2));
  s.heads = static_cast<int>(uniform_int(rng, 1, 3));
  s.hidden.assign(static_cast<std::size_t>(uniform_int(rng, 1, 2)), 0);
  for (auto& h : s.hidden) h = static_cast<int>(uniform_int(rng, 3, 8));
  s.pe_phi = uniform(rng) < 0.5 ? 0.0 : 2.0 * std::numbers::pi / 7.0;
  if (uniform(rng) < 0.3) s.clip = 1.5;
  return s;
}

/// n noisy samples of a random linear function of channel 0, outputs 0..2.
inline RegressionDataset linear_probe_dataset(const DenseModel& m, int d, long n, std::uint64_t seed) {
  const long r = m.receptive_radius();
  Rng rng(seed);
  const double w = uniform(rng, -1, 1);
  const TargetFunction f{"linear", 0, [w](const TokenWindow& x, long i) { return w * x.at(0, i) + 0.2; }};
  return generate_dataset(f, TokenGenerator::uniform(), d, n, 0.3, IndexRange{-r, 2 + r}, IndexRange{0, 2}, seed);
}

struct GradientSuite {
  long networks = 0;
  long checked = 0;
  long skipped_at_kinks = 0;
  double max_rel_error = 0.0;
  std::set<ParamKind> kinds;
  std::vector<GradientCheckEntry> failures;

  bool pass(double tol = 1e-5) const { return failures.empty() && max_rel_error < tol && kinds.size() == 6; }
};

/// Network q: shape and weights from make_rng(seed, {q}), data seed
/// derive_seed(seed, {q, 1}), coordinates derive_seed(seed, {q, 2}).
inline GradientSuite gradient_suite(long networks, int per_kind, std::uint64_t seed, double tol = 1e-5) {
  GradientSuite out;
  for (long q = 0; q < networks; ++q) {
    const auto uq = static_cast<std::uint64_t>(q);
    Rng rng = make_rng(seed, {uq});
    const ModelShape s = random_shape(rng);
    const DenseModel m = random_model(s, rng);
    const RegressionDataset ds = linear_probe_dataset(m, s.token_dim, 3, derive_seed(seed, {uq, 1}));
    const auto res = gradient_check(m, {&ds.inputs, &ds.outputs, ds.output_range}, per_kind, derive_seed(seed, {uq, 2}));
    ++out.networks;
    out.checked += static_cast<long>(res.entries.size());
    out.skipped_at_kinks += res.skipped_at_kinks;
    out.max_rel_error = std::max(out.max_rel_error, res.max_rel_error);
    for (const auto& e : res.entries) {
      out.kinds.insert(e.kind);
      if (!(e.rel_error < tol)) out.failures.push_back(e);
    }
  }
  return out;
}

/// Theorem-1 network for masking. The target reads offsets -1, 0, 1 (so
/// d_max = 3); the plan extracts I(3.5) = {-2..2}, two tokens more than the
/// target needs, with chi scaled for the given T.
struct MaskFixture1 {
  SyntheticTarget f;
  ExtractionPlan plan;
  TransformerParams net;
  FeatureHead head;

  std::size_t d_max() const { return f.support().size(); }
  Readout readout() const {
    return [this](const TokenWindow& x) { return theorem1_readout(plan, transformer_forward(net, x, {0, 0}), head)(0); };
  }
};

inline MaskFixture1 mask_fixture_theorem1(double T = 14.0) {
  SyntheticTarget f{1, {SmoothnessKind::mixed, SmoothnessRule::power({1.0}, 1.0)}, {}};
  f.coeffs[FreqIndex{{Coord{0, 0}, 1}}] = 0.4;
  f.coeffs[FreqIndex{{Coord{0, -1}, 1}}] = 0.2;
  f.coeffs[FreqIndex{{Coord{0, 1}, -1}}] = 0.2;
  f.coeffs[FreqIndex{{Coord{0, 0}, 1}, {Coord{0, 1}, 1}}] = 0.1;
  const auto plan0 = make_extraction_plan(f.spec, 1, 3.5);
  FeatureHead head(f, plan0.coords);
  auto plan = plan0;
  plan.chi = chi_for(plan.U, static_cast<double>(plan.heads()), head.lipschitz_product(), T);
  auto net = build_theorem1_network(plan);
  return {std::move(f), std::move(plan), std::move(net), std::move(head)};
}

/// Greedy masking with mask value 0 over the whole window [-U, U]. Passes
/// when every step taken while at least d_max tokens remain moves the
/// readout by less than tol.
struct MaskProbe1 {
  MaskResult result;
  std::size_t d_max = 0;
  double max_change_kept = 0.0;  // largest change while >= d_max tokens remain
  bool pass(double tol = 1e-3) const { return max_change_kept < tol; }
};

inline MaskProbe1 mask_probe_theorem1(const MaskFixture1& fx, const TokenWindow& x) {
  MaskProbe1 out;
  out.d_max = fx.d_max();
  out.result = greedy_mask(fx.readout(), x, {-fx.plan.U, fx.plan.U}, 0.0);
  for (std::size_t k = 0; k < out.result.steps.size(); ++k)
    if (out.result.candidates.size() - k - 1 >= out.d_max)
      out.max_change_kept = std::max(out.max_change_kept, out.result.steps[k].change);
  return out;
}

/// Theorem-2 network on a piecewise target: V = 2, importance is channel 0,
/// and the target reads channel 1 of the two most important tokens.
struct MaskFixture2 {
  ImportanceModel importance;
  SyntheticTarget f;
  FeatureHead head;
  Theorem2Network net;

  int V() const { return importance.V; }
  Readout readout() const {
    return [this](const TokenWindow& x) { return theorem2_readout(net, x, {0, 0}, head)(0); };
  }
  /// The top-2 relative positions of the sort order at 0, ascending.
  std::vector<long> top2(const TokenWindow& x) const {
    const auto pi = sort_permutation(importance, x, 0);
    std::vector<long> t{pi[0], pi[1]};
    std::sort(t.begin(), t.end());
    return t;
  }
};

inline MaskFixture2 mask_fixture_theorem2(std::uint64_t bank_seed = 26) {
  const int V = 2;
  const auto m = ImportanceModel::linear(V, 0.3, 1.0, Eigen::Vector2d(1.0, 0.0));
  const SmoothnessSpec spec{SmoothnessKind::mixed, SmoothnessRule::ranks({1.0, 1.0}, 1.0, 2L * V + 1)};
  SyntheticTarget f{2, spec, {}};
  f.coeffs[FreqIndex{{Coord{1, 1}, 1}}] = 0.4;
  f.coeffs[FreqIndex{{Coord{1, 2}, -1}}] = 0.3;
  FeatureHead head(f, feature_index_set(spec, 2.5).coords);
  const auto bank = sample_orthonormal_bank(2L * V + 1, bank_coherence_limit(m.c / 2, 2), bank_seed);
  auto net = make_theorem2_network(m, spec, 2.5, bank, 1e-6 / head.lipschitz_product());
  return {m, std::move(f), std::move(head), std::move(net)};
}

/// An input and its channel-0 reflection 1 - x, which reverses the
/// importance order. Both are masked over [-V, V]; the probe passes when
/// each two-token surviving set is the top-2 of its own sort order and the
/// two sets are disjoint.
struct MaskProbe2 {
  MaskResult a, b;
  std::vector<long> survivors_a, survivors_b, top_a, top_b;
  bool disjoint() const {
    for (long p : survivors_a)
      if (std::count(survivors_b.begin(), survivors_b.end(), p)) return false;
    return true;
  }
  bool pass() const { return survivors_a == top_a && survivors_b == top_b && disjoint(); }
};

inline TokenWindow reflect_importance(const TokenWindow& x) {
  TokenWindow r = x;
  r.data().row(0) = (1.0 - x.data().row(0).array()).matrix();
  return r;
}

inline MaskProbe2 mask_probe_theorem2(const MaskFixture2& fx, const TokenWindow& x) {
  const TokenWindow rev = reflect_importance(x);
  if (!well_separated(fx.importance, x, 0) || !well_separated(fx.importance, rev, 0))
    throw HypothesisError("masking probe needs an input that is well separated in both orders");
  MaskProbe2 out;
  const int V = fx.V();
  const Readout readout = fx.readout();
  out.a = greedy_mask(readout, x, {-V, V}, 0.0);
  out.b = greedy_mask(readout, rev, {-V, V}, 0.0);
  out.survivors_a = out.a.survivors(2);
  out.survivors_b = out.b.survivors(2);
  out.top_a = fx.top2(x);
  out.top_b = fx.top2(rev);
  return out;
}

/// Well-separated input whose reflection is also well separated; draws from rng.
inline TokenWindow sample_reversible_input(const MaskFixture2& fx, Rng& rng, int max_draws = 1000) {
  const int V = fx.V();
  for (int i = 0; i < max_draws; ++i) {
    const auto s = sample_separated_input(fx.importance, 2, {-2 * V, 2 * V}, 0, rng);
    if (well_separated(fx.importance, reflect_importance(s.x), 0)) return s.x;
  }
  throw SamplingError("no input separated in both orders after " + std::to_string(max_draws) + " draws", 0.0);
}

}  // namespace swat
