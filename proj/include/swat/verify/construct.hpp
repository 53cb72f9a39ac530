#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <ostream>
#include <vector>

#include "json.hpp"
#include "swat/construct/bank.hpp"
#include "swat/construct/theorem1.hpp"
#include "swat/construct/theorem2.hpp"
#include "swat/core/serialize.hpp"
#include "swat/space/importance.hpp"
#include "swat/space/target.hpp"
#include "swat/util/parallel.hpp"

namespace swat {

/// One channel, four planted coordinates with smoothness 1.5, 3, 4.5 and 6.5
/// at offsets 0, -2, 5, -8: I(T) grows from a single token at T = 2 to
/// d_max = 4 with U = 8 at T = 8.
inline SmoothnessSpec theorem1_demo_spec() {
  return {SmoothnessKind::mixed, SmoothnessRule::table(1, {{{0, 0}, 1.5}, {{0, -2}, 3.0}, {{0, 5}, 4.5}, {{0, -8}, 6.5}})};
}

struct Theorem1Config {
  SmoothnessSpec spec = theorem1_demo_spec();
  std::vector<double> T{2, 3, 4, 5, 6, 7, 8};
  long inputs = 1000;
  TargetSamplerConfig target{9.0, 12, 1.0};
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const {
    if (T.empty() || inputs < 1) throw UsageError("theorem 1 check needs at least one T and one input");
    for (double t : T)
      if (!(t > 0)) throw UsageError("theorem 1 check needs T > 0");
    if (spec.rule.d < 1) throw UsageError("theorem 1 check needs d >= 1");
  }
};

struct Theorem1Row {
  long input = 0;
  double deviation = 0.0;   // ||z^1_0 - z~_0||_inf
  double pointwise = 0.0;   // |F^_0 - f_T|
  double error = 0.0;       // F^_0 - f
};

/// Per T: the softmax-vs-hardmax deviation of the scratch block against
/// max(2HU e^{-chi gap}, fp floor), the per-input extraction error of the
/// exact-f_T head against 2^{-T}, and the RMS end-to-end error against
/// ||f - f_T||_2 + 2^{-T}.
struct Theorem1Result {
  double T = 0.0;
  ExtractionPlan plan;
  TransformerParams net;
  double gap = 0.0;
  double bound = 0.0;
  double fp_floor = 0.0;
  double max_deviation = 0.0;
  double max_pointwise = 0.0;
  double rms_error = 0.0;
  double truncation = 0.0;
  double head_lipschitz = 0.0;
  long inputs = 0;
  long extraction_failures = 0;
  long pointwise_failures = 0;
  std::vector<Theorem1Row> rows;

  double end_to_end_bound() const { return truncation + std::exp2(-T); }
  bool pass() const {
    return extraction_failures == 0 && pointwise_failures == 0 && rms_error <= end_to_end_bound();
  }
};

inline nlohmann::json summary_json(const Theorem1Result& r) {
  return {{"summary", true},
          {"T", r.T},
          {"U", r.plan.U},
          {"H", r.plan.heads()},
          {"chi", r.plan.chi},
          {"gap", r.gap},
          {"bound", r.bound},
          {"fp_floor", r.fp_floor},
          {"max_deviation", r.max_deviation},
          {"max_pointwise", r.max_pointwise},
          {"pointwise_bound", std::exp2(-r.T)},
          {"rms_error", r.rms_error},
          {"truncation", r.truncation},
          {"end_to_end_bound", r.end_to_end_bound()},
          {"head_lipschitz", r.head_lipschitz},
          {"inputs", r.inputs},
          {"extraction_failures", r.extraction_failures},
          {"pointwise_failures", r.pointwise_failures},
          {"pass", r.pass()}};
}

inline void write_jsonl(std::ostream& os, const Theorem1Result& r) {
  const double allow = std::max(r.bound, r.fp_floor), pt = std::exp2(-r.T);
  for (const auto& row : r.rows)
    os << nlohmann::json{{"T", r.T},
                         {"input", row.input},
                         {"deviation", row.deviation},
                         {"pointwise", row.pointwise},
                         {"error", row.error},
                         {"pass", row.deviation <= allow && row.pointwise <= pt}}
              .dump()
       << '\n';
  os << summary_json(r).dump() << '\n';
}

/// Input u for T: make_rng(seed, {1, round(1000 T), u}); the target is drawn
/// once from make_rng(seed, {0}) and shared by every T.
inline std::vector<Theorem1Result> verify_theorem1(const Theorem1Config& cfg) {
  cfg.validate();
  Rng trng = make_rng(cfg.seed, {0});
  const SyntheticTarget f = sample_target(cfg.spec, cfg.target, trng);
  const int d = cfg.spec.rule.d;
  std::vector<Theorem1Result> out;
  for (double T : cfg.T) {
    Theorem1Result res;
    res.T = T;
    const SyntheticTarget fT = truncate(f, T);
    const FeatureHead head(fT, feature_index_set(cfg.spec, T).coords);
    res.head_lipschitz = head.lipschitz_product();
    res.plan = make_extraction_plan(cfg.spec, d, T, res.head_lipschitz);
    res.net = build_theorem1_network(res.plan);
    res.truncation = truncation_error(f, T).tail;
    res.inputs = cfg.inputs;
    const long reach = std::max<long>(res.plan.U, f.reach());
    const auto ut = static_cast<std::uint64_t>(std::llround(T * 1000.0));
    std::vector<ExtractionCheck> checks(static_cast<std::size_t>(cfg.inputs));
    res.rows.resize(checks.size());
    parallel_for(cfg.inputs, cfg.jobs, [&](long u) {
      Rng rng = make_rng(cfg.seed, {1, ut, static_cast<std::uint64_t>(u)});
      Eigen::MatrixXd m(d, 2 * reach + 1);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng);
      const TokenWindow x(-reach, m);
      auto& c = checks[static_cast<std::size_t>(u)];
      c = check_extraction(res.plan, res.net, x, {0, 0});
      const double got = theorem1_readout(res.plan, c.state, head)(0);
      auto& row = res.rows[static_cast<std::size_t>(u)];
      row.input = u;
      row.deviation = c.deviation;
      row.pointwise = std::abs(got - fT.eval(x));
      row.error = got - f.eval(x);
    });
    double sq = 0.0;
    for (std::size_t u = 0; u < checks.size(); ++u) {
      const auto& c = checks[u];
      const auto& row = res.rows[u];
      res.gap = c.gap;
      res.bound = c.bound;
      res.fp_floor = std::max(res.fp_floor, c.fp_floor);
      res.max_deviation = std::max(res.max_deviation, row.deviation);
      res.max_pointwise = std::max(res.max_pointwise, row.pointwise);
      res.extraction_failures += !c.pass();
      res.pointwise_failures += !(row.pointwise <= std::exp2(-T));
      sq += row.error * row.error;
    }
    res.rms_error = std::sqrt(sq / static_cast<double>(cfg.inputs));
    out.push_back(std::move(res));
  }
  return out;
}

inline double harmonic_number(long n) {
  double h = 0.0;
  for (long i = 1; i <= n; ++i) h += 1.0 / static_cast<double>(i);
  return h;
}

/// Two channels; importance is channel 0 (beta = 1, c = 1.6 / H_{2V}), the
/// features are ranks 1 and 2 of channel 0 and rank 1 of channel 1, so
/// r_max = 2. eps2 defaults to 3^{-r_max} 2^{-T}, making the Cz envelope 2^{-T}.
struct Theorem2Config {
  int V = 2;
  long trials = 500;
  double T = 2.5;
  double c = 0.0;           // 0: 1.6 / H_{2V}
  double eps2_target = 0.0;  // 0: 3^{-r_max} 2^{-T}
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const {
    if (V < 1 || trials < 1) throw UsageError("theorem 2 check needs V >= 1 and at least one trial");
    if (!(T > 0) || c < 0 || eps2_target < 0) throw UsageError("theorem 2 check needs T > 0, c >= 0, eps2 >= 0");
  }
  double score_gap() const { return c > 0 ? c : 1.6 / harmonic_number(2L * V); }
  SmoothnessSpec spec() const {
    return {SmoothnessKind::mixed, SmoothnessRule::ranks({1.0, 2.0}, 1.0, 2L * V + 1)};
  }
};

struct Theorem2Row {
  long trial = 0;
  long k = 0;
  long proposals = 0;
  std::vector<long> trace;
  std::vector<long> order;
  double deviation = 0.0;
  double cz_deviation = 0.0;
};

struct Theorem2Result {
  int V = 0;
  long d_prime = 0;
  int r_max = 0;
  double chi = 0.0;
  double kappa = 0.0;
  double eps2 = 0.0;
  double envelope = 0.0;
  double bank_coherence = 0.0;
  long trials = 0;
  long trace_matches = 0;
  double max_deviation = 0.0;
  double max_cz_deviation = 0.0;
  std::vector<Theorem2Row> rows;
  Theorem2Network network;

  bool pass() const {
    return trace_matches == trials && max_deviation <= envelope && max_cz_deviation <= envelope;
  }
};

inline nlohmann::json summary_json(const Theorem2Result& r) {
  return {{"summary", true},          {"V", r.V},
          {"d_prime", r.d_prime},     {"r_max", r.r_max},
          {"chi", r.chi},             {"kappa", r.kappa},
          {"eps2", r.eps2},           {"envelope", r.envelope},
          {"bank_coherence", r.bank_coherence},
          {"trials", r.trials},       {"trace_matches", r.trace_matches},
          {"max_deviation", r.max_deviation},
          {"max_cz_deviation", r.max_cz_deviation},
          {"pass", r.pass()}};
}

inline void write_jsonl(std::ostream& os, const Theorem2Result& r) {
  for (const auto& row : r.rows)
    os << nlohmann::json{{"V", r.V},
                         {"trial", row.trial},
                         {"k", row.k},
                         {"proposals", row.proposals},
                         {"trace", row.trace},
                         {"order", row.order},
                         {"deviation", row.deviation},
                         {"cz_deviation", row.cz_deviation},
                         {"pass", row.trace == row.order && row.deviation <= r.envelope &&
                                      row.cz_deviation <= r.envelope}}
              .dump()
       << '\n';
  os << summary_json(r).dump() << '\n';
}

/// Bank from derive_seed(seed, {0}); trial t draws k in [-V, V] and a
/// well-separated input from make_rng(seed, {1, t}).
inline Theorem2Result verify_theorem2(const Theorem2Config& cfg) {
  cfg.validate();
  const int V = cfg.V;
  const auto m = ImportanceModel::linear(V, cfg.score_gap(), 1.0, Eigen::Vector2d(1.0, 0.0));
  const SmoothnessSpec spec = cfg.spec();
  long r_max = 0;
  for (const auto& c : feature_index_set(spec, cfg.T).coords) r_max = std::max(r_max, c.position);
  const double kappa = m.c * std::pow(std::max(1.0, static_cast<double>(r_max)), -m.beta);
  const auto bank = sample_orthonormal_bank(2L * V + 1, bank_coherence_limit(kappa, static_cast<int>(r_max)),
                                            derive_seed(cfg.seed, {0}));
  const double eps2 = cfg.eps2_target > 0 ? cfg.eps2_target
                                          : std::pow(3.0, -static_cast<double>(r_max)) * std::exp2(-cfg.T);
  Theorem2Result res;
  res.network = make_theorem2_network(m, spec, cfg.T, bank, eps2);
  const auto& net = res.network;
  res.V = V;
  res.d_prime = bank.dim();
  res.r_max = net.layout.r_max();
  res.chi = net.chi;
  res.kappa = net.kappa;
  res.eps2 = net.eps2;
  res.envelope = std::pow(3.0, res.r_max) * net.eps2;
  res.bank_coherence = net.bank_coherence;
  res.trials = cfg.trials;
  res.rows.resize(static_cast<std::size_t>(cfg.trials));
  const long span = 2L * V * std::max(1, res.r_max) + m.reach;
  parallel_for(cfg.trials, cfg.jobs, [&](long t) {
    Rng rng = make_rng(cfg.seed, {1, static_cast<std::uint64_t>(t)});
    auto& row = res.rows[static_cast<std::size_t>(t)];
    row.trial = t;
    row.k = uniform_int(rng, -V, V);
    const auto s = sample_separated_input(m, 2, {row.k - span, row.k + span}, row.k, rng);
    row.proposals = s.proposals;
    const auto check = piecewise_extraction_error(net, s.x, row.k);
    row.trace = check.trace;
    row.order = check.order;
    row.deviation = check.deviation;
    row.cz_deviation = check.cz_deviation;
  });
  for (const auto& row : res.rows) {
    res.trace_matches += row.trace == row.order;
    res.max_deviation = std::max(res.max_deviation, row.deviation);
    res.max_cz_deviation = std::max(res.max_cz_deviation, row.cz_deviation);
  }
  return res;
}

/// Single-shot sampling success of the approximately orthonormal bank at
/// d' = ceil(4 ln(2l) / eps^2): seeds 0..seeds-1.
struct BankSuccess {
  long l = 0;
  double epsilon = 0.0;
  long d_prime = 0;
  long seeds = 0;
  long successes = 0;
  double rate() const { return seeds ? static_cast<double>(successes) / static_cast<double>(seeds) : 0.0; }
};

inline BankSuccess bank_success_rate(long l, double epsilon, long seeds) {
  if (seeds < 1) throw UsageError("bank success rate needs at least one seed");
  BankSuccess out{l, epsilon, static_cast<long>(bank_dimension(l, epsilon)), seeds, 0};
  for (long s = 0; s < seeds; ++s) out.successes += try_sample_bank(l, epsilon, static_cast<std::uint64_t>(s)).has_value();
  return out;
}

}  // namespace swat
