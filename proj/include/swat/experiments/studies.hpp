#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "swat/construct/common.hpp"
#include "swat/construct/theorem1.hpp"
#include "swat/core/budget.hpp"
#include "swat/experiments/data.hpp"
#include "swat/experiments/rate.hpp"
#include "swat/experiments/train.hpp"
#include "swat/space/target.hpp"

namespace swat {

enum class HeadMode { exact_fT, trained };

inline HeadMode head_mode_from_string(const std::string& s) {
  if (s == "exact" || s == "exact_fT") return HeadMode::exact_fT;
  if (s == "trained") return HeadMode::trained;
  throw UsageError("unknown head mode '" + s + "' (expected exact or trained)");
}

struct ApproxConfig {
  HeadMode head = HeadMode::exact_fT;
  long mc_samples = 2000;
  IndexRange output_range{0, 0};
  // trained mode only
  long train_samples = 1024;
  CapacityRule capacity;
  TrainConfig train;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct ApproxRow {
  double T = 0.0;
  double error = 0.0;       // ||F^_i - F0_i||_{2,P_X}, Monte Carlo
  double error_se = 0.0;
  double truncation = 0.0;  // ||f - f_T||_2, exact
  double extraction = 0.0;  // Lip(f_T) * 2 H U exp(-chi gap): softmax-vs-hardmax allowance (exact head)
  double bound = 0.0;       // 2^{-T}
  long parameters = 0;
  Capacity capacity;

  /// Triangle inequality check for the exact head with a 3 SE Monte-Carlo allowance.
  bool within_decomposition() const { return error - 3.0 * error_se <= truncation + extraction; }
};

namespace detail {

inline RiskEstimate l2_error(const Predictor& F, const TargetFunction& F0, int d, IndexRange window,
                             IndexRange out, long samples, std::uint64_t seed, int jobs) {
  const RiskEstimate r = population_risk(F, F0, TokenGenerator::uniform(), d, window, out, samples, seed, jobs);
  const double e = std::sqrt(std::max(r.value, 0.0));
  return {e, e > 0 ? r.stderr_ / (2.0 * e) : std::sqrt(r.stderr_)};  // delta method
}

}  // namespace detail

/// Error of the extraction network composed with a head, per T. The exact
/// head evaluates f_T on the extracted scratch features; the trained head is
/// the rate-study architecture fitted to noiseless samples. Every T uses
/// the same Monte-Carlo inputs.
inline std::vector<ApproxRow> approximation_study(const SyntheticTarget& f, const std::vector<double>& T_grid,
                                                  const ApproxConfig& cfg) {
  if (T_grid.empty()) throw UsageError("approximation study needs at least one T");
  detail::require_exact_mode(f);
  const TargetFunction F0 = TargetFunction::from_synthetic(f);
  const DerivedSmoothness ds = derived_smoothness(f.spec, 8);
  const int d = f.d;
  std::vector<ApproxRow> rows;
  for (double T : T_grid) {
    if (!(T > 0.0)) throw UsageError("approximation study needs T > 0");
    ApproxRow row;
    row.T = T;
    row.bound = std::exp2(-T);
    row.truncation = truncation_error(f, T).tail;
    const auto ut = static_cast<std::uint64_t>(std::llround(T * 1000.0));
    if (cfg.head == HeadMode::exact_fT) {
      const SyntheticTarget fT = truncate(f, T);
      const ExtractionPlan plan0 = make_extraction_plan(f.spec, d, T);
      const FeatureHead head(fT, plan0.coords);
      const ExtractionPlan plan = make_extraction_plan(f.spec, d, T, head.lipschitz_product());
      const TransformerParams net = build_theorem1_network(plan);
      const long reach = std::max<long>(plan.U, f.reach());
      const IndexRange window = cfg.output_range.widened(reach, reach);
      Predictor F = [&plan, &net, &head](const TokenWindow& x, IndexRange out) {
        return theorem1_readout(plan, transformer_forward(net, x, out), head);
      };
      const RiskEstimate e = detail::l2_error(F, F0, d, window, cfg.output_range, cfg.mc_samples,
                                              derive_seed(cfg.seed, {5}), cfg.jobs);
      row.error = e.value;
      row.error_se = e.stderr_;
      const double H = static_cast<double>(std::max<Eigen::Index>(1, plan.heads()));
      row.extraction = std::max(1.0, fT.lipschitz_bound()) * 2.0 * H * plan.U *
                       std::exp(-plan.chi * measured_gap(plan.U, plan.phi));
      long terms = static_cast<long>(fT.coeffs.size());
      long nz = count_nonzeros(net.embedding.matrix);
      for (const auto& h : net.blocks.front().attention.heads)
        nz += count_nonzeros(h.key) + count_nonzeros(h.query) + count_nonzeros(h.value);
      row.parameters = nz + terms;
      row.capacity = {T, plan.U, plan.heads(), plan.embed_dim(), 0, 0, plan.chi, row.parameters};
    } else {
      Rng irng = make_rng(cfg.seed, {6, ut});
      DenseModel init = capacity_model(f.spec, T, ds.a_dagger, cfg.capacity, irng, &row.capacity);
      const long reach = std::max(init.receptive_radius(), f.reach());
      const IndexRange window = cfg.output_range.widened(reach, reach);
      const RegressionDataset data = generate_dataset(F0, TokenGenerator::uniform(), d, cfg.train_samples, 0.0, window,
                                                      cfg.output_range, derive_seed(cfg.seed, {7, ut}));
      TrainConfig tc = cfg.train;
      tc.seed = derive_seed(cfg.seed, {8, ut});
      TrainResult tr = train_erm(std::move(init), data, tc);
      row.parameters = row.capacity.parameters;
      const RiskEstimate e = detail::l2_error(as_predictor(std::move(tr.model)), F0, d, window, cfg.output_range,
                                              cfg.mc_samples, derive_seed(cfg.seed, {5}), cfg.jobs);
      row.error = e.value;
      row.error_se = e.stderr_;
    }
    rows.push_back(row);
  }
  return rows;
}

inline nlohmann::json to_json(const ApproxRow& r) {
  return {{"T", r.T},
          {"error", r.error},
          {"error_se", r.error_se},
          {"truncation", r.truncation},
          {"extraction", r.extraction},
          {"bound", r.bound},
          {"parameters", r.parameters},
          {"capacity", to_json(r.capacity)}};
}

/// Scalar summary of a model's output used by greedy masking.
using Readout = std::function<double(const TokenWindow&)>;

/// Readout = output at position `index` of a predictor.
inline Readout output_readout(Predictor F, long index = 0) {
  return [F = std::move(F), index](const TokenWindow& x) { return F(x, IndexRange{index, index})(0); };
}

struct MaskStep {
  long position = 0;
  double readout = 0.0;  // after masking `position`
  double change = 0.0;   // |readout - unmasked readout|
};

struct MaskResult {
  double baseline = 0.0;
  std::vector<MaskStep> steps;
  std::vector<long> candidates;

  /// Tokens still unmasked once only k remain (all of them if k exceeds the count).
  std::vector<long> survivors(std::size_t k) const {
    std::vector<long> out;
    const std::size_t masked = candidates.size() > k ? candidates.size() - k : 0;
    std::vector<long> gone;
    for (std::size_t i = 0; i < std::min(masked, steps.size()); ++i) gone.push_back(steps[i].position);
    for (long c : candidates)
      if (std::find(gone.begin(), gone.end(), c) == gone.end()) out.push_back(c);
    return out;
  }
};

/// At each step masks the candidate whose masking keeps the readout closest
/// to its unmasked value (ties: lowest position). Runs `budget` steps or
/// until every candidate is masked.
inline MaskResult greedy_mask(const Readout& readout, const TokenWindow& x, IndexRange candidates, double mask_value,
                              long budget = std::numeric_limits<long>::max()) {
  if (!(mask_value >= 0.0 && mask_value <= 1.0)) throw UsageError("mask value must lie in [0, 1]");
  if (!x.range().contains(candidates)) throw UsageError("mask candidates must lie inside the input window");
  MaskResult res;
  res.baseline = readout(x);
  for (long i = candidates.first; i <= candidates.last; ++i) res.candidates.push_back(i);
  std::vector<long> open = res.candidates;
  TokenWindow cur = x;
  while (!open.empty() && static_cast<long>(res.steps.size()) < budget) {
    std::size_t best = 0;
    double best_change = std::numeric_limits<double>::infinity(), best_value = 0.0;
    for (std::size_t k = 0; k < open.size(); ++k) {
      TokenWindow trial = cur;
      trial.token(open[k]).setConstant(mask_value);
      const double v = readout(trial);
      const double change = std::abs(v - res.baseline);
      if (change < best_change) {
        best_change = change;
        best_value = v;
        best = k;
      }
    }
    cur.token(open[best]).setConstant(mask_value);
    res.steps.push_back({open[best], best_value, best_change});
    open.erase(open.begin() + static_cast<long>(best));
  }
  return res;
}

}  // namespace swat
