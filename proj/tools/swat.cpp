// swat: constructions, bound sweeps, function-space utilities and experiments.
// Exit status: 0 pass, 1 check failed, 2 usage or config error.
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "run.hpp"
#include "swat/core/csv.hpp"
#include "swat/core/serialize.hpp"
#include "swat/experiments/rate.hpp"
#include "swat/experiments/studies.hpp"
#include "swat/util/memory.hpp"
#include "swat/verify/bounds.hpp"
#include "swat/verify/construct.hpp"
#include "swat/verify/experiments.hpp"
#include "swat/verify/space.hpp"

using namespace swat;
using namespace swat::cli;

namespace {

constexpr int kPass = 0, kFail = 1, kUsage = 2;

// ---- config pieces shared by several commands

json sampler_to_json(const TargetSamplerConfig& c) {
  return {{"gamma_cap", c.gamma_cap},
          {"terms", c.terms},
          {"norm", c.norm},
          {"gamma_floor", c.gamma_floor},
          {"scale_by_gamma", c.scale_by_gamma}};
}

TargetSamplerConfig sampler_from_json(const json& j) {
  TargetSamplerConfig c{j.at("gamma_cap").get<double>(), j.at("terms").get<std::size_t>(), j.at("norm").get<double>(),
                        j.at("gamma_floor").get<double>(), j.at("scale_by_gamma").get<bool>()};
  if (!(c.gamma_cap > 0) || c.terms < 1 || !(c.norm > 0)) throw UsageError("target sampler needs gamma_cap, terms, norm > 0");
  return c;
}

json capacity_to_json(const CapacityRule& c) {
  return {{"width_scale", c.width_scale},
          {"min_width", c.min_width},
          {"hidden_layers", c.hidden_layers},
          {"init_scale", c.init_scale},
          {"clip", c.clip ? json(*c.clip) : json(nullptr)}};
}

CapacityRule capacity_from_json(const json& j) {
  CapacityRule c;
  c.width_scale = j.at("width_scale").get<double>();
  c.min_width = j.at("min_width").get<long>();
  c.hidden_layers = j.at("hidden_layers").get<int>();
  c.init_scale = j.at("init_scale").get<double>();
  if (!j.at("clip").is_null()) c.clip = j.at("clip").get<double>();
  if (!(c.width_scale > 0) || c.min_width < 1 || c.hidden_layers < 0) throw UsageError("bad capacity rule");
  return c;
}

json train_to_json(const TrainConfig& c) {
  json frozen = json::array();
  for (auto k : c.frozen) frozen.push_back(to_string(k));
  return {{"steps", c.steps},
          {"batch", c.batch},
          {"lr", c.lr},
          {"schedule", c.schedule},
          {"final_lr_fraction", c.final_lr_fraction},
          {"init_scale", c.init_scale},
          {"gradient_check", c.gradient_check},
          {"eval_every", c.eval_every},
          {"bound", c.bound ? json(*c.bound) : json(nullptr)},
          {"frozen", frozen}};
}

json generator_to_json(const TokenGenerator& g) { return {{"kind", g.kind}, {"rho", g.rho}, {"weights", g.weights}}; }

TokenGenerator generator_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "uniform") return TokenGenerator::uniform();
  if (kind == "ar_mixture")
    return TokenGenerator::ar_mixture(j.at("rho").get<std::vector<double>>(), j.at("weights").get<std::vector<double>>());
  throw UsageError("unknown token generator '" + kind + "'");
}

IndexRange range_from_json(const json& j) {
  const auto v = parse_number_list(j);
  if (v.size() != 2 || v[1] < v[0]) throw UsageError("a range is [first, last] with first <= last");
  return {std::lround(v[0]), std::lround(v[1])};
}

const std::map<std::string, std::function<SmoothnessSpec()>>& named_specs() {
  static const std::map<std::string, std::function<SmoothnessSpec()>> m{
      {"theorem1-demo", theorem1_demo_spec},
      {"mixed-demo", [] { return mixed_demo_config().spec; }},
  };
  return m;
}

SmoothnessSpec spec_from_config(const json& j) {
  if (j.is_object()) return spec_from_json(j);
  const auto name = j.get<std::string>();
  const auto it = named_specs().find(name);
  if (it == named_specs().end()) throw UsageError("unknown spec '" + name + "' (theorem1-demo, mixed-demo or an object)");
  return it->second();
}

std::vector<long> long_list(const json& j) {
  std::vector<long> out;
  for (double v : parse_number_list(j)) {
    if (v != std::floor(v)) throw UsageError("expected integers, got " + std::to_string(v));
    out.push_back(static_cast<long>(v));
  }
  return out;
}

std::string file_digest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw UsageError("cannot read " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return digest(ss.str());
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

std::string T_label(double T) {
  std::string s = fmt(T);
  for (char& c : s)
    if (c == '.') c = 'p';
  return s;
}

const char* verdict(bool pass) { return pass ? "PASS" : "FAIL"; }

struct Ctx {
  Run& run;
  json& cfg;
  int jobs;
};

// ---- construct-verify

json construct_defaults() {
  const Theorem1Config t1;
  return {{"theorem", 1},   {"T", nullptr}, {"spec", "theorem1-demo"},     {"inputs", t1.inputs},
          {"target", sampler_to_json(t1.target)}, {"V", 2},    {"trials", 500}, {"c", 0.0},
          {"eps2", 0.0},    {"save_network", true}};
}

void construct_canonicalize(json& cfg) {
  const int theorem = cfg.at("theorem").get<int>();
  if (theorem != 1 && theorem != 2) throw UsageError("--theorem must be 1 or 2");
  if (cfg.at("T").is_null()) cfg["T"] = theorem == 1 ? json(Theorem1Config{}.T) : json(Theorem2Config{}.T);
  else if (theorem == 1) cfg["T"] = parse_number_list(cfg.at("T"));
  else {
    const auto T = parse_number_list(cfg.at("T"));
    if (T.size() != 1) throw UsageError("theorem 2 takes a single T");
    cfg["T"] = T.front();
  }
}

int construct_verify(Ctx c) {
  const json& cfg = c.cfg;
  const bool save = cfg.at("save_network").get<bool>();
  bool pass = true;
  if (cfg.at("theorem").get<int>() == 1) {
    Theorem1Config t;
    t.spec = spec_from_config(cfg.at("spec"));
    t.T = cfg.at("T").get<std::vector<double>>();
    t.inputs = cfg.at("inputs").get<long>();
    t.target = sampler_from_json(cfg.at("target"));
    t.seed = c.run.seed();
    t.jobs = c.jobs;
    std::ostringstream lines;
    for (const auto& r : verify_theorem1(t)) {
      write_jsonl(lines, r);
      pass = pass && r.pass();
      std::printf("%s theorem 1, T=%s: H=%ld U=%d, max deviation %s (allowance %s), rms error %s (trunc + 2^-T = %s)\n",
                  verdict(r.pass()), fmt(r.T).c_str(), static_cast<long>(r.plan.heads()), r.plan.U,
                  fmt(r.max_deviation).c_str(), fmt(std::max(r.bound, r.fp_floor)).c_str(), fmt(r.rms_error).c_str(),
                  fmt(r.end_to_end_bound()).c_str());
      if (save) {
        json net = transformer_to_json(r.net);
        net["T"] = r.T;
        net["plan"] = {{"U", r.plan.U}, {"chi", r.plan.chi}, {"phi", r.plan.phi}, {"heads", r.plan.heads()}};
        c.run.write_json("theorem1_network_T" + T_label(r.T) + ".json", net);
      }
    }
    c.run.write_jsonl("theorem1.jsonl", lines.str());
  } else {
    Theorem2Config t;
    t.V = cfg.at("V").get<int>();
    t.trials = cfg.at("trials").get<long>();
    t.T = cfg.at("T").get<double>();
    t.c = cfg.at("c").get<double>();
    t.eps2_target = cfg.at("eps2").get<double>();
    t.seed = c.run.seed();
    t.jobs = c.jobs;
    const auto r = verify_theorem2(t);
    pass = r.pass();
    std::ostringstream lines;
    write_jsonl(lines, r);
    const std::string tag = "theorem2_V" + std::to_string(r.V);
    c.run.write_jsonl(tag + ".jsonl", lines.str());
    std::printf("%s theorem 2, V=%d: d'=%ld r_max=%d, argmax trace %ld/%ld, max Cz deviation %s (envelope %s)\n",
                verdict(pass), r.V, r.d_prime, r.r_max, r.trace_matches, r.trials, fmt(r.max_cz_deviation).c_str(),
                fmt(r.envelope).c_str());
    if (save) {
      const auto& n = r.network;
      json net = transformer_to_json(n.net);
      json bank = json::array();
      for (const auto& u : n.bank) bank.push_back(vector_to_json(u));
      json features = json::array();
      for (const auto& f : n.layout.features) features.push_back({f.channel, f.position});
      net["theorem2"] = {{"V", r.V},           {"chi", n.chi},
                         {"kappa", n.kappa},   {"eps2", n.eps2},
                         {"bank_coherence", n.bank_coherence},
                         {"d_prime", n.layout.d_prime},
                         {"features", features},
                         {"rounds", n.layout.rounds},
                         {"bank", bank}};
      c.run.write_json(tag + "_network.json", net);
    }
  }
  return pass ? kPass : kFail;
}

// ---- bounds

json bounds_defaults() {
  const BoundsSuiteConfig b;
  return {{"lemma", "all"},
          {"trials", b.sweep.trials},
          {"tail_configs", b.tail_configs},
          {"keep_records", b.sweep.keep_records},
          {"max_dim", b.sweep.max_dim},
          {"max_embed", b.sweep.max_embed},
          {"max_depth", b.sweep.max_depth},
          {"max_heads", b.sweep.max_heads},
          {"max_window", b.sweep.max_window},
          {"B", b.sweep.B},
          {"r", b.sweep.r},
          {"delta", b.sweep.delta}};
}

int bounds(Ctx c) {
  const json& cfg = c.cfg;
  BoundsSuiteConfig b;
  b.sweep.trials = cfg.at("trials").get<long>();
  b.tail_configs = cfg.at("tail_configs").get<long>();
  b.sweep.keep_records = cfg.at("keep_records").get<bool>();
  b.sweep.max_dim = cfg.at("max_dim").get<int>();
  b.sweep.max_embed = cfg.at("max_embed").get<int>();
  b.sweep.max_depth = cfg.at("max_depth").get<int>();
  b.sweep.max_heads = cfg.at("max_heads").get<int>();
  b.sweep.max_window = cfg.at("max_window").get<int>();
  b.sweep.B = cfg.at("B").get<double>();
  b.sweep.r = cfg.at("r").get<double>();
  b.sweep.delta = cfg.at("delta").get<double>();
  b.sweep.jobs = c.jobs;
  const auto reports = run_bounds_suite(cfg.at("lemma").get<std::string>(), b, c.run.seed());
  std::ostringstream lines;
  bool pass = true;
  for (const auto& r : reports) {
    write_jsonl(lines, r);
    pass = pass && r.pass();
    std::printf("%s %s: %ld trials, max ratio %s, %zu violations\n", verdict(r.pass()), r.lemma.c_str(), r.trials,
                fmt(r.max_ratio).c_str(), r.violations.size());
  }
  c.run.write_jsonl("bounds.jsonl", lines.str());
  return pass ? kPass : kFail;
}

// ---- space

/// Target from a file (spec and sampler ignored) or sampled from make_rng(seed, {0}).
SyntheticTarget space_target(Ctx c) {
  const auto file = c.cfg.at("target_file").get<std::string>();
  if (!file.empty()) return target_from_json(read_json_file(file));
  Rng rng = make_rng(c.run.seed(), {0});
  return sample_target(spec_from_config(c.cfg.at("spec")), sampler_from_json(c.cfg.at("target")), rng);
}

void target_file_canonicalize(json& cfg) {
  const auto file = cfg.at("target_file").get<std::string>();
  if (!file.empty()) cfg["target_file_digest"] = file_digest(file);
}

int space_index_set(Ctx c) {
  const SmoothnessSpec spec = spec_from_config(c.cfg.at("spec"));
  const double T = c.cfg.at("T").get<double>();
  const auto fis = feature_index_set(spec, T);
  CsvWriter csv(c.run, "index_set.csv", {"channel", "position"});
  for (const auto& co : fis.coords) csv.row(co.channel, co.position);
  c.run.write_json("index_set.json", {{"spec", spec_to_json(spec)},
                                      {"T", T},
                                      {"d_max", fis.d_max},
                                      {"f_max", fis.f_max},
                                      {"G", fis.G},
                                      {"block_count", fis.block_count},
                                      {"max_offset", fis.max_offset()}});
  std::printf("I(T=%s): d_max %zu, f_max %d, G %s, %zu blocks, max offset %ld\n", fmt(T).c_str(), fis.d_max, fis.f_max,
              fmt(fis.G).c_str(), fis.block_count, fis.max_offset());
  return kPass;
}

int space_norm(Ctx c) {
  const SyntheticTarget f = space_target(c);
  json out{{"norm", smoothness_norm(f)}, {"terms", f.coeffs.size()}, {"spec", spec_to_json(f.spec)}};
  const long mc = c.cfg.at("mc_samples").get<long>();
  if (mc > 0) {
    const auto e = smoothness_norm_mc(f, mc, derive_seed(c.run.seed(), {1}));
    out["mc"] = {{"samples", mc}, {"value", e.value}, {"stderr", e.stderr_}};
  }
  c.run.write_json("norm_target.json", target_to_json(f));
  c.run.write_json("norm.json", out);
  std::printf("||f||_gamma = %s over %zu terms\n", fmt(out["norm"].get<double>()).c_str(), f.coeffs.size());
  return kPass;
}

int space_truncation(Ctx c) {
  const SyntheticTarget f = space_target(c);
  bool pass = true;
  CsvWriter csv(c.run, "truncation.csv", {"T", "tail", "bound", "ratio", "l2_gap", "pass"});
  for (double T : c.cfg.at("T").get<std::vector<double>>()) {
    const auto rep = truncation_error(f, T);
    const double gap = std::abs(rep.tail - l2_distance(f, truncate(f, T)));
    const bool ok = rep.tail <= rep.bound * (1 + 1e-12) && gap <= 1e-12;
    pass = pass && ok;
    csv.row(T, rep.tail, rep.bound, rep.bound > 0 ? rep.tail / rep.bound : 0.0, gap, ok ? 1 : 0);
  }
  c.run.write_json("truncation_target.json", target_to_json(f));
  c.run.write_json("truncation_summary.json", {{"pass", pass}});
  std::printf("%s truncation inequality on %zu values of T\n", verdict(pass), c.cfg.at("T").size());
  return pass ? kPass : kFail;
}

int space_oracles(Ctx c) {
  const json& cfg = c.cfg;
  const auto dy = scan_dyadic_levels(cfg.at("dyadic_limit").get<long>());
  const auto fis = compare_index_sets(cfg.at("index_specs").get<long>(), derive_seed(c.run.seed(), {1}));
  const auto tr = sweep_truncation(cfg.at("targets").get<long>(), cfg.at("T").get<std::vector<double>>(),
                                   derive_seed(c.run.seed(), {2}));
  const bool pass = dy.pass() && fis.pass() && tr.pass();
  c.run.write_json("oracles.json", {{"dyadic", {{"checked", dy.checked}, {"mismatches", dy.mismatches}}},
                                    {"index_sets", {{"specs", fis.specs}, {"mismatches", fis.mismatches}}},
                                    {"truncation",
                                     {{"targets", tr.targets},
                                      {"checks", tr.checks},
                                      {"max_ratio", tr.max_ratio},
                                      {"max_identity_gap", tr.max_identity_gap},
                                      {"violations", tr.violations}}},
                                    {"pass", pass}});
  std::printf("%s dyadic %ld values / index sets %ld specs / truncation %ld checks (max tail/bound %s)\n",
              verdict(pass), dy.checked, fis.specs, tr.checks, fmt(tr.max_ratio).c_str());
  return pass ? kPass : kFail;
}

// ---- experiments

json rate_defaults() {
  const RateStudyConfig r = mixed_demo_config();
  return {{"spec", "mixed-demo"},
          {"n", r.n_grid},
          {"replicates", r.replicates},
          {"sigma", r.sigma},
          {"target", sampler_to_json(r.target)},
          {"generator", generator_to_json(r.generator)},
          {"output_range", {r.output_range.first, r.output_range.last}},
          {"capacity", capacity_to_json(r.capacity)},
          {"train", train_to_json(r.train)},
          {"mc_samples", r.mc_samples}};
}

int experiment_rate(Ctx c) {
  const json& cfg = c.cfg;
  RateStudyConfig r;
  r.spec = spec_from_config(cfg.at("spec"));
  r.n_grid = long_list(cfg.at("n"));
  r.replicates = cfg.at("replicates").get<int>();
  r.sigma = cfg.at("sigma").get<double>();
  r.target = sampler_from_json(cfg.at("target"));
  r.generator = generator_from_json(cfg.at("generator"));
  r.output_range = range_from_json(cfg.at("output_range"));
  r.capacity = capacity_from_json(cfg.at("capacity"));
  r.train = train_config_from_json(cfg.at("train"));
  r.mc_samples = cfg.at("mc_samples").get<long>();
  r.seed = c.run.seed();
  r.jobs = c.jobs;
  const auto res = rate_study(r);

  CsvWriter csv(c.run, "rate_cells.csv",
                {"n", "replicate", "T", "U", "H", "D", "W", "L", "parameters", "initial_risk", "train_risk", "risk",
                 "risk_se", "best_step", "error"});
  bool cells_ok = true;
  for (const auto& cell : res.cells) {
    cells_ok = cells_ok && cell.ok();
    const auto& k = cell.capacity;
    csv.row(cell.n, cell.replicate, k.T, k.U, k.H, k.D, k.W, k.L, k.parameters, cell.initial_risk, cell.train_risk,
            cell.risk, cell.risk_se, cell.best_step, json(cell.error).dump());
  }
  const bool pass = cells_ok && res.strictly_decreasing() && res.slope < 0;
  json grid = json::array();
  for (const auto& p : res.grid) grid.push_back({{"n", p.n}, {"mean", p.mean}, {"sd", p.sd}, {"count", p.count}});
  c.run.write_json("rate_summary.json", {{"grid", grid},
                                         {"a_dagger", res.a_dagger},
                                         {"predicted_exponent", res.predicted_exponent},
                                         {"slope", res.slope},
                                         {"slope_ci95", {res.slope_lo, res.slope_hi}},
                                         {"strictly_decreasing", res.strictly_decreasing()},
                                         {"first_over_last", res.grid.front().mean / res.grid.back().mean},
                                         {"cells_ok", cells_ok},
                                         {"pass", pass}});
  for (const auto& p : res.grid) std::printf("n=%ld: mean risk %s (sd %s, %d cells)\n", p.n, fmt(p.mean).c_str(), fmt(p.sd).c_str(), p.count);
  std::printf("%s slope %s [%s, %s], predicted %s\n", verdict(pass), fmt(res.slope).c_str(), fmt(res.slope_lo).c_str(),
              fmt(res.slope_hi).c_str(), fmt(res.predicted_exponent).c_str());
  return pass ? kPass : kFail;
}

json approx_defaults() {
  const ApproxConfig a;
  return {{"spec", "theorem1-demo"},
          {"target", sampler_to_json(Theorem1Config{}.target)},
          {"T", {1, 2, 3, 4, 5, 6, 7, 8}},
          {"head", "exact"},
          {"mc_samples", a.mc_samples},
          {"output_range", {a.output_range.first, a.output_range.last}},
          {"train_samples", a.train_samples},
          {"capacity", capacity_to_json(a.capacity)},
          {"train", train_to_json(a.train)}};
}

int experiment_approx(Ctx c) {
  const json& cfg = c.cfg;
  ApproxConfig a;
  a.head = head_mode_from_string(cfg.at("head").get<std::string>());
  a.mc_samples = cfg.at("mc_samples").get<long>();
  a.output_range = range_from_json(cfg.at("output_range"));
  a.train_samples = cfg.at("train_samples").get<long>();
  a.capacity = capacity_from_json(cfg.at("capacity"));
  a.train = train_config_from_json(cfg.at("train"));
  a.seed = derive_seed(c.run.seed(), {1});
  a.jobs = c.jobs;
  Rng rng = make_rng(c.run.seed(), {0});
  const SyntheticTarget f = sample_target(spec_from_config(cfg.at("spec")), sampler_from_json(cfg.at("target")), rng);
  const auto rows = approximation_study(f, cfg.at("T").get<std::vector<double>>(), a);

  const bool exact = a.head == HeadMode::exact_fT;
  bool pass = true;
  CsvWriter csv(c.run, "approx.csv",
                {"T", "error", "error_se", "truncation", "extraction", "bound", "parameters", "U", "H", "D", "W", "L",
                 "chi", "within_decomposition"});
  json table = json::array();
  for (const auto& r : rows) {
    const bool ok = r.within_decomposition();
    if (exact) pass = pass && ok;
    const auto& k = r.capacity;
    csv.row(r.T, r.error, r.error_se, r.truncation, r.extraction, r.bound, r.parameters, k.U, k.H, k.D, k.W, k.L, k.chi,
            ok ? 1 : 0);
    table.push_back(to_json(r));
    std::printf("T=%s: error %s +- %s, truncation %s, 2^-T %s, %ld parameters\n", fmt(r.T).c_str(), fmt(r.error).c_str(),
                fmt(r.error_se).c_str(), fmt(r.truncation).c_str(), fmt(r.bound).c_str(), r.parameters);
  }
  c.run.write_json("approx_target.json", target_to_json(f));
  c.run.write_json("approx_summary.json",
                   {{"head", cfg.at("head")}, {"rows", table}, {"gated", exact}, {"pass", pass}});
  if (exact) std::printf("%s error within truncation + extraction allowance\n", verdict(pass));
  return pass ? kPass : kFail;
}

json mask_defaults() {
  return {{"input", ""},     {"input_digest", ""}, {"network", "theorem1"}, {"T", 14.0},
          {"bank_seed", 26}, {"mask_value", 0.0},  {"budget", -1},          {"tolerance", 1e-3}};
}

void mask_canonicalize(json& cfg) {
  const auto input = cfg.at("input").get<std::string>();
  if (input.empty()) throw UsageError("experiment mask needs --input <csv>");
  cfg["input_digest"] = file_digest(input);
}

int experiment_mask(Ctx c) {
  const json& cfg = c.cfg;
  const TokenWindow x = read_window_csv_file(cfg.at("input").get<std::string>());
  const auto network = cfg.at("network").get<std::string>();
  const double mask_value = cfg.at("mask_value").get<double>();
  const long b = cfg.at("budget").get<long>();
  const long budget = b < 0 ? std::numeric_limits<long>::max() : b;
  json summary{{"network", network}};
  MaskResult res;
  bool pass = true;
  if (network == "theorem1") {
    const auto fx = mask_fixture_theorem1(cfg.at("T").get<double>());
    const int U = fx.plan.U;
    res = greedy_mask(fx.readout(), x, {-U, U}, mask_value, budget);
    double kept = 0.0;
    for (std::size_t k = 0; k < res.steps.size(); ++k)
      if (res.candidates.size() - k - 1 >= fx.d_max()) kept = std::max(kept, res.steps[k].change);
    pass = kept < cfg.at("tolerance").get<double>();
    summary["d_max"] = fx.d_max();
    summary["survivors"] = res.survivors(fx.d_max());
    summary["max_change_while_d_max_remain"] = kept;
    std::printf("%s theorem-1 network: largest readout change while >= %zu tokens remain %s\n", verdict(pass),
                fx.d_max(), fmt(kept).c_str());
  } else if (network == "theorem2") {
    const auto fx = mask_fixture_theorem2(cfg.at("bank_seed").get<std::uint64_t>());
    if (!well_separated(fx.importance, x, 0))
      throw HypothesisError("theorem-2 masking needs an input whose importance scores are well separated at 0");
    res = greedy_mask(fx.readout(), x, {-fx.V(), fx.V()}, mask_value, budget);
    const auto top = fx.top2(x);
    const auto kept = res.survivors(2);
    pass = kept == top;
    summary["survivors"] = kept;
    summary["top2"] = top;
    std::printf("%s theorem-2 network: survivors {%ld, %ld}, top-2 by importance {%ld, %ld}\n", verdict(pass),
                kept.size() > 0 ? kept[0] : 0L, kept.size() > 1 ? kept[1] : 0L, top[0], top[1]);
  } else {
    throw UsageError("unknown mask network '" + network + "' (theorem1 or theorem2)");
  }
  CsvWriter csv(c.run, "mask_trace.csv", {"step", "position", "readout", "change", "remaining"});
  for (std::size_t k = 0; k < res.steps.size(); ++k)
    csv.row(k + 1, res.steps[k].position, res.steps[k].readout, res.steps[k].change, res.candidates.size() - k - 1);
  summary["baseline"] = res.baseline;
  summary["candidates"] = res.candidates;
  summary["pass"] = pass;
  c.run.write_json("mask_summary.json", summary);
  return pass ? kPass : kFail;
}

// ---- dispatch

struct Command {
  std::string name;                  // as in the manifest: "experiment rate"
  std::vector<std::string> section;  // path into the config file
  json defaults;
  std::function<void(json&)> canonicalize;
  std::function<int(Ctx)> body;
  CLI::App* app = nullptr;
  json flags = json::object();
};

void value_flag(Command& cmd, const std::string& flag, const std::string& key, const std::string& help) {
  cmd.app->add_option_function<std::string>(flag, [&cmd, key](const std::string& v) { cmd.flags[key] = flag_value(v); }, help);
}

void bool_flag(Command& cmd, const std::string& flag, const std::string& key, bool value, const std::string& help) {
  cmd.app->add_flag_function(flag, [&cmd, key, value](std::int64_t) { cmd.flags[key] = value; }, help);
}

int run_command(Command& cmd, const std::vector<std::string>& argv, const std::string& out_dir,
                const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<int> jobs) {
  std::optional<Run> run;
  try {
    run.emplace(cmd.name, argv, out_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "swat: %s\n", e.what());
    return kUsage;
  }
  int code = kPass;
  std::string error;
  try {
    json file = json::object();
    if (!config_path.empty()) file = read_json_file(config_path);
    if (!file.is_object()) throw UsageError("config file must hold a JSON object");
    for (const auto& [k, v] : file.items())
      if (k != "seed" && k != "jobs" && k != "construct-verify" && k != "bounds" && k != "space" && k != "experiment")
        throw UsageError("unknown config key '" + k + "'");
    if (!seed && file.contains("seed")) seed = file.at("seed").get<std::uint64_t>();
    if (!jobs && file.contains("jobs")) jobs = file.at("jobs").get<int>();
    run->set_seed(seed.value_or(0));
    const int j = jobs.value_or(default_jobs());
    if (j < 1) throw UsageError("--jobs must be positive");

    json cfg = cmd.defaults;
    const json* sec = &file;
    std::string where;
    for (const auto& s : cmd.section) {
      where += (where.empty() ? "" : ".") + s;
      sec = sec->contains(s) ? &sec->at(s) : nullptr;
      if (!sec) break;
    }
    if (sec) overlay(cfg, *sec, where);
    overlay(cfg, cmd.flags, "flags");
    if (cmd.canonicalize) cmd.canonicalize(cfg);
    run->set_config(cfg);
    code = cmd.body(Ctx{*run, cfg, j});
  } catch (const UsageError& e) {
    code = kUsage, error = e.what();
  } catch (const HypothesisError& e) {
    code = kUsage, error = e.what();
  } catch (const BoundaryError& e) {
    code = kUsage, error = e.what();
  } catch (const DegenerateInputError& e) {
    code = kUsage, error = e.what();
  } catch (const nlohmann::json::exception& e) {
    code = kUsage, error = std::string("config: ") + e.what();
  } catch (const std::exception& e) {
    code = kFail, error = e.what();
  }
  if (!error.empty()) std::fprintf(stderr, "swat %s: %s\n", cmd.name.c_str(), error.c_str());
  run->write_manifest(code, error);
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  keep_freed_memory();
  CLI::App app{"Sliding-window transformer constructions, bound checks and experiments"};
  app.set_version_flag("--version", SWAT_VERSION);
  app.require_subcommand(1);
  std::string config_path, out_dir = "swat-out";
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  app.add_option("--config", config_path, "JSON config file (see docs/config.md)");
  app.add_option("--seed", seed, "root seed (default 0)");
  app.add_option("--jobs", jobs, "worker threads (default: hardware threads)");
  app.add_option("--out-dir", out_dir, "output directory")->envname("SWAT_OUT_DIR")->capture_default_str();

  std::vector<Command> cmds;
  cmds.reserve(16);
  auto add = [&](CLI::App* parent, const std::string& sub, const std::string& help, Command c) -> Command& {
    c.app = parent->add_subcommand(sub, help);
    c.app->fallthrough();
    cmds.push_back(std::move(c));
    return cmds.back();
  };

  auto& cv = add(&app, "construct-verify", "build a Theorem 1 or 2 network and check it",
                 {"construct-verify", {"construct-verify"}, construct_defaults(), construct_canonicalize, construct_verify});
  value_flag(cv, "--theorem", "theorem", "1 or 2");
  value_flag(cv, "--T", "T", "T value(s): 4, 2..8 or 2,3,5");
  value_flag(cv, "--V", "V", "theorem 2 window half-width");
  value_flag(cv, "--inputs", "inputs", "theorem 1 random inputs per T");
  value_flag(cv, "--trials", "trials", "theorem 2 trials");
  value_flag(cv, "--spec", "spec", "theorem 1 smoothness spec name");
  bool_flag(cv, "--no-network", "save_network", false, "skip the serialized network");

  auto& bd = add(&app, "bounds", "randomized sweeps of the Appendix C lemmas",
                 {"bounds", {"bounds"}, bounds_defaults(), nullptr, bounds});
  value_flag(bd, "--lemma", "lemma", "lemma family or 'all'");
  value_flag(bd, "--trials", "trials", "trials per family");
  value_flag(bd, "--tail-configs", "tail_configs", "random tail-sum configurations");
  bool_flag(bd, "--keep-records", "keep_records", true, "write every trial, not only summaries");

  CLI::App* space = app.add_subcommand("space", "function-space utilities");
  space->require_subcommand(1);
  const json space_common{{"spec", "theorem1-demo"}, {"target", sampler_to_json(Theorem1Config{}.target)}, {"target_file", ""}};
  json idx_defaults{{"spec", "theorem1-demo"}, {"T", 4.0}};
  auto& si = add(space, "index-set", "I(T), d_max, f_max and G(T) for a spec",
                 {"space index-set", {"space", "index-set"}, idx_defaults, nullptr, space_index_set});
  value_flag(si, "--spec", "spec", "spec name");
  value_flag(si, "--T", "T", "threshold T");
  json norm_defaults = space_common;
  norm_defaults["mc_samples"] = 0;
  auto& sn = add(space, "norm", "gamma-smoothness norm of a sampled or stored target",
                 {"space norm", {"space", "norm"}, norm_defaults, target_file_canonicalize, space_norm});
  json trunc_defaults = space_common;
  trunc_defaults["T"] = {1, 2, 3, 4, 5, 6, 7, 8};
  auto& st = add(space, "truncation", "truncation error against 2^-T ||f||",
                 {"space truncation", {"space", "truncation"}, trunc_defaults, target_file_canonicalize, space_truncation});
  for (auto* c : {&sn, &st}) {
    value_flag(*c, "--spec", "spec", "spec name");
    value_flag(*c, "--target", "target_file", "target JSON file");
  }
  value_flag(sn, "--mc-samples", "mc_samples", "also estimate the norm by Monte Carlo");
  value_flag(st, "--T", "T", "T values");
  json oracle_defaults{{"dyadic_limit", 1L << 16}, {"index_specs", 60}, {"targets", 1000}, {"T", {1, 2, 3, 4, 5, 6, 7, 8}}};
  auto& so = add(space, "oracles", "dyadic levels, index sets and truncation against brute force",
                 {"space oracles", {"space", "oracles"}, oracle_defaults, nullptr, space_oracles});
  value_flag(so, "--targets", "targets", "random targets for the truncation check");

  CLI::App* exp = app.add_subcommand("experiment", "experiments");
  exp->require_subcommand(1);
  auto& er = add(exp, "rate", "risk against sample size for trained networks",
                 {"experiment rate", {"experiment", "rate"}, rate_defaults(), nullptr, experiment_rate});
  value_flag(er, "--spec", "spec", "smoothness spec name");
  value_flag(er, "--n", "n", "sample sizes, e.g. 64,256,1024,4096");
  value_flag(er, "--replicates", "replicates", "replicates per sample size");
  auto& ea = add(exp, "approx", "approximation error of the extraction network per T",
                 {"experiment approx", {"experiment", "approx"}, approx_defaults(), nullptr, experiment_approx});
  value_flag(ea, "--T", "T", "T values, e.g. 1..8");
  value_flag(ea, "--head", "head", "exact or trained");
  value_flag(ea, "--spec", "spec", "smoothness spec name");
  auto& em = add(exp, "mask", "greedy token masking trace",
                 {"experiment mask", {"experiment", "mask"}, mask_defaults(), mask_canonicalize, experiment_mask});
  value_flag(em, "--input", "input", "window CSV");
  value_flag(em, "--network", "network", "theorem1 or theorem2");
  value_flag(em, "--mask-value", "mask_value", "value written into masked tokens");
  value_flag(em, "--budget", "budget", "masking steps (-1: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }
  std::vector<std::string> args(argv, argv + argc);
  for (auto& c : cmds)
    if (c.app->parsed()) return run_command(c, args, out_dir, config_path, seed, jobs);
  std::fprintf(stderr, "swat: no command\n");
  return kUsage;
}
