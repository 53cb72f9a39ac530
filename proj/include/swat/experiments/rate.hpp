#pragma once

#include <Eigen/Dense>

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "swat/construct/theorem1.hpp"
#include "swat/experiments/data.hpp"
#include "swat/experiments/model.hpp"
#include "swat/experiments/train.hpp"
#include "swat/space/target.hpp"
#include "swat/util/parallel.hpp"

namespace swat {

/// Architecture for a given T. Attention comes from the relative-position
/// extraction plan for I(T, gamma) (M = 1, U = max offset, H = |I(T)|,
/// D = d + H + 2); the head is a ReLU network of `hidden_layers` layers of
/// width W = max(min_width, ceil(width_scale * max(1, H) * 2^{T / a_dagger})).
/// W follows the order T^{1/alpha} 2^{T/a_dagger} with H standing in for
/// T^{1/alpha}; depth is fixed rather than growing like T^2.
struct CapacityRule {
  double width_scale = 1.0;
  long min_width = 4;
  int hidden_layers = 2;
  double init_scale = 1.0;
  std::optional<double> clip;

  long width(double T, double a_dagger, long heads) const {
    const double w = width_scale * static_cast<double>(std::max<long>(1, heads)) * std::exp2(T / a_dagger);
    return std::max(min_width, static_cast<long>(std::ceil(w)));
  }
};

struct Capacity {
  double T = 0.0;
  int U = 1;
  long H = 0;
  long D = 0;
  long W = 0;
  int L = 0;
  double chi = 0.0;
  long parameters = 0;
};

inline nlohmann::json to_json(const Capacity& c) {
  return {{"T", c.T}, {"U", c.U}, {"H", c.H}, {"D", c.D}, {"W", c.W}, {"L", c.L}, {"chi", c.chi},
          {"parameters", c.parameters}};
}

/// Theorem-1 extraction network followed by a freshly initialized head.
inline DenseModel capacity_model(const SmoothnessSpec& spec, double T, double a_dagger, const CapacityRule& rule,
                                 Rng& rng, Capacity* cap = nullptr) {
  const ExtractionPlan plan = make_extraction_plan(spec, spec.rule.d, T);
  DenseModel m = DenseModel::from_params(build_theorem1_network(plan));
  const long W = rule.width(T, a_dagger, plan.heads());
  long in = plan.embed_dim();
  auto& head = m.blocks.back().fnn;
  for (int l = 0; l <= rule.hidden_layers; ++l) {
    const long out = l == rule.hidden_layers ? 1 : W;
    DenseLayer layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    const double sd = rule.init_scale * std::sqrt(2.0 / static_cast<double>(in));
    for (Eigen::Index i = 0; i < layer.W.size(); ++i) layer.W.data()[i] = gaussian(rng, sd);
    head.push_back(std::move(layer));
    in = out;
  }
  m.clip = rule.clip;
  if (cap) {
    *cap = {T, plan.U, plan.heads(), plan.embed_dim(), W, rule.hidden_layers + 1, plan.chi, m.parameter_count()};
  }
  return m;
}

struct RateStudyConfig {
  SmoothnessSpec spec;
  std::vector<long> n_grid{64, 256, 1024, 4096};
  int replicates = 5;
  double sigma = 0.1;
  TargetSamplerConfig target{6.0, 12, 1.0};
  TokenGenerator generator;
  IndexRange output_range{0, 7};
  CapacityRule capacity;
  TrainConfig train;
  long mc_samples = 2000;
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const {
    if (n_grid.size() < 4) throw UsageError("rate study needs at least 4 sample sizes");
    for (std::size_t i = 0; i < n_grid.size(); ++i)
      if (n_grid[i] <= 0 || (i > 0 && n_grid[i] <= n_grid[i - 1]))
        throw UsageError("rate study sample sizes must be positive and increasing");
    if (replicates < 1 || mc_samples < 2) throw UsageError("rate study needs replicates >= 1 and mc_samples >= 2");
    if (sigma < 0) throw UsageError("noise level must be non-negative");
    if (output_range.empty()) throw UsageError("empty output range");
    train.validate();
  }
};

struct RateCell {
  long n = 0;
  int replicate = 0;
  Capacity capacity;
  double initial_risk = 0.0;  // empirical, at initialization
  double train_risk = 0.0;    // empirical, returned iterate
  double risk = 0.0;          // population, Monte Carlo
  double risk_se = 0.0;
  long best_step = 0;
  std::string error;          // training failure, if any
  bool ok() const { return error.empty(); }
};

struct RatePoint {
  long n = 0;
  double mean = 0.0;
  double sd = 0.0;
  int count = 0;
};

struct RateStudyResult {
  std::vector<RatePoint> grid;
  std::vector<RateCell> cells;
  double a_dagger = 0.0;
  double predicted_exponent = 0.0;  // -2 a / (2 a + 1)
  double slope = 0.0;
  double slope_lo = 0.0;            // 95% interval
  double slope_hi = 0.0;

  bool strictly_decreasing() const {
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (!(grid[i].mean < grid[i - 1].mean)) return false;
    return true;
  }
};

/// Mixed smoothness a_0j = |j| + 1 (a_dagger = 1) with theta = 2. Targets
/// put their energy on blocks 2 <= gamma(s) < 4 with coefficients scaled by
/// 2^{-gamma(s)}, so a capacity built for small T misses the neighbouring
/// tokens while the largest one covers the whole support.
inline RateStudyConfig mixed_demo_config() {
  RateStudyConfig c;
  c.spec.kind = SmoothnessKind::mixed;
  c.spec.rule = SmoothnessRule::power({1.0}, 1.0);
  c.spec.theta = 2.0;
  c.target = TargetSamplerConfig{4.0, 12, 1.0, 2.0, true};
  c.capacity.width_scale = 0.5;
  c.capacity.hidden_layers = 2;
  c.train.steps = 3000;
  c.train.batch = 128;
  c.train.lr = 1e-2;
  c.train.eval_every = 100;
  return c;
}

inline double rate_T(long n, double a_dagger) {
  return a_dagger * std::log2(static_cast<double>(n)) / (2.0 * a_dagger + 1.0);
}

/// Least squares of log(mean risk) on log(n) with a Student-t interval.
inline void fit_slope(RateStudyResult& r) {
  std::vector<double> x, y;
  for (const auto& p : r.grid)
    if (p.count > 0 && p.mean > 0) {
      x.push_back(std::log(static_cast<double>(p.n)));
      y.push_back(std::log(p.mean));
    }
  const double k = static_cast<double>(x.size());
  if (x.size() < 2) throw UsageError("slope fit needs two positive points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i], my += y[i];
  mx /= k, my /= k;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
  r.slope = sxy / sxx;
  r.slope_lo = r.slope_hi = r.slope;
  if (x.size() > 2) {
    double sse = 0;
    for (std::size_t i = 0; i < x.size(); ++i) sse += std::pow(y[i] - (my + r.slope * (x[i] - mx)), 2);
    const double se = std::sqrt(sse / (k - 2) / sxx);
    const double t = boost::math::quantile(boost::math::students_t(k - 2), 0.975);
    r.slope_lo = r.slope - t * se;
    r.slope_hi = r.slope + t * se;
  }
}

/// Seeds: target derive(seed, {1, rep}); data derive(seed, {2, n, rep});
/// init and training derive(seed, {3, n, rep}); Monte Carlo derive(seed, {4, rep}).
/// The target and the Monte-Carlo inputs are shared across n within a
/// replicate, so differences between n come from data and training only.
inline RateStudyResult rate_study(const RateStudyConfig& cfg) {
  cfg.validate();
  const DerivedSmoothness ds = derived_smoothness(cfg.spec, 8);
  RateStudyResult res;
  res.a_dagger = ds.a_dagger;
  res.predicted_exponent = -2.0 * ds.a_dagger / (2.0 * ds.a_dagger + 1.0);

  const auto nn = static_cast<long>(cfg.n_grid.size());
  res.cells.resize(static_cast<std::size_t>(nn * cfg.replicates));
  parallel_for(nn * cfg.replicates, cfg.jobs, [&](long c) {
    const long ni = c / cfg.replicates;
    const int rep = static_cast<int>(c % cfg.replicates);
    const long n = cfg.n_grid[static_cast<std::size_t>(ni)];
    const auto un = static_cast<std::uint64_t>(n);
    const auto ur = static_cast<std::uint64_t>(rep);
    RateCell& cell = res.cells[static_cast<std::size_t>(c)];
    cell.n = n;
    cell.replicate = rep;

    Rng trng = make_rng(cfg.seed, {1, ur});
    const SyntheticTarget f = sample_target(cfg.spec, cfg.target, trng);
    const TargetFunction F0 = TargetFunction::from_synthetic(f);

    Rng irng = make_rng(cfg.seed, {3, un, ur});
    DenseModel init = capacity_model(cfg.spec, rate_T(n, ds.a_dagger), ds.a_dagger, cfg.capacity, irng, &cell.capacity);
    const long reach = std::max(init.receptive_radius(), F0.reach);
    const IndexRange window = cfg.output_range.widened(reach, reach);
    const RegressionDataset data =
        generate_dataset(F0, cfg.generator, cfg.spec.rule.d, n, cfg.sigma, window, cfg.output_range,
                         derive_seed(cfg.seed, {2, un, ur}));
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, {3, un, ur});
    try {
      TrainResult tr = train_erm(std::move(init), data, tc);
      cell.initial_risk = tr.initial_risk;
      cell.train_risk = tr.final_risk;
      cell.best_step = tr.best_step;
      const RiskEstimate pr = population_risk(as_predictor(std::move(tr.model)), F0, cfg.generator, cfg.spec.rule.d,
                                              window, cfg.output_range, cfg.mc_samples, derive_seed(cfg.seed, {4, ur}));
      cell.risk = pr.value;
      cell.risk_se = pr.stderr_;
    } catch (const TrainingError& e) {
      cell.error = e.what();
    }
  });

  for (long ni = 0; ni < nn; ++ni) {
    RatePoint p;
    p.n = cfg.n_grid[static_cast<std::size_t>(ni)];
    std::vector<double> v;
    for (int rep = 0; rep < cfg.replicates; ++rep) {
      const auto& cell = res.cells[static_cast<std::size_t>(ni * cfg.replicates + rep)];
      if (cell.ok()) v.push_back(cell.risk);
    }
    p.count = static_cast<int>(v.size());
    for (double r : v) p.mean += r;
    if (p.count) p.mean /= p.count;
    for (double r : v) p.sd += (r - p.mean) * (r - p.mean);
    p.sd = p.count > 1 ? std::sqrt(p.sd / (p.count - 1)) : 0.0;
    res.grid.push_back(p);
  }
  fit_slope(res);
  return res;
}

}  // namespace swat
