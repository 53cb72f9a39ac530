#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "swat/util/parallel.hpp"
#include "swat/util/rng.hpp"

namespace swat {

/// One evaluated inequality: observed <= exp(log_bound).
struct TrialRecord {
  long trial = 0;
  std::uint64_t seed = 0;
  std::string digest;  // fingerprint of the inputs
  double observed = 0.0;
  double log_bound = 0.0;
  std::string probe;  // "random" or the name of a planted worst case
  nlohmann::json inputs;  // worst-case inputs, kept for violations and the worst trial

  /// observed / bound, computed in log space; 0 when observed is 0.
  double ratio() const {
    if (observed <= 0.0) return 0.0;
    return std::exp(std::log(observed) - log_bound);
  }
};

struct BoundCheckReport {
  static constexpr double kSlack = 1e-9;

  std::string lemma;
  std::string statement;
  long trials = 0;
  double max_ratio = 0.0;
  TrialRecord worst{};
  std::vector<TrialRecord> violations{};
  std::vector<TrialRecord> records{};  // every trial, when requested

  bool pass() const { return violations.empty() && max_ratio <= 1.0 + kSlack; }

  /// Streaming fold; max_ratio never decreases.
  void add(TrialRecord r, bool keep) {
    ++trials;
    const double q = r.ratio();
    if (q > 1.0 + kSlack) violations.push_back(r);
    if (q > max_ratio || trials == 1) {
      max_ratio = std::max(max_ratio, q);
      worst = r;
    }
    if (keep) records.push_back(std::move(r));
  }
};

inline nlohmann::json record_to_json(const std::string& lemma, const TrialRecord& r) {
  return {{"lemma", lemma},        {"trial", r.trial},         {"seed", r.seed},
          {"digest", r.digest},    {"observed", r.observed},   {"log_bound", r.log_bound},
          {"ratio", r.ratio()},    {"probe", r.probe},         {"pass", r.ratio() <= 1.0 + BoundCheckReport::kSlack}};
}

inline nlohmann::json summary_to_json(const BoundCheckReport& rep) {
  nlohmann::json v = nlohmann::json::array();
  for (const auto& r : rep.violations) {
    nlohmann::json j = record_to_json(rep.lemma, r);
    j["inputs"] = r.inputs;
    v.push_back(std::move(j));
  }
  nlohmann::json worst = record_to_json(rep.lemma, rep.worst);
  worst["inputs"] = rep.worst.inputs;
  return {{"summary", true},          {"lemma", rep.lemma},     {"statement", rep.statement},
          {"trials", rep.trials},     {"max_ratio", rep.max_ratio}, {"violations", std::move(v)},
          {"worst", std::move(worst)}, {"pass", rep.pass()}};
}

/// One JSON object per kept trial, then the summary record.
inline void write_jsonl(std::ostream& os, const BoundCheckReport& rep) {
  for (const auto& r : rep.records) os << record_to_json(rep.lemma, r).dump() << '\n';
  os << summary_to_json(rep).dump() << '\n';
}

/// Runs `trials` independent trials in parallel. Trial t of a sweep with
/// root seed s and stream id k uses seed derive_seed(s, {k, t}). Each trial
/// returns one record per inequality; reports are folded in trial order so
/// the result does not depend on scheduling. Inputs are only serialized
/// (capture = true) when the worst and the violating trials are replayed.
using TrialFn = std::function<std::vector<TrialRecord>(long, Rng&, bool)>;

inline std::vector<BoundCheckReport> run_sweep(const std::vector<std::pair<std::string, std::string>>& lemmas,
                                               std::uint64_t stream, long trials, std::uint64_t seed, int jobs,
                                               bool keep_records, const TrialFn& trial) {
  auto run = [&](long t, bool capture) {
    const std::uint64_t s = derive_seed(seed, {stream, static_cast<std::uint64_t>(t)});
    Rng rng(s);
    auto recs = trial(t, rng, capture);
    for (auto& r : recs) {
      r.trial = t;
      r.seed = s;
    }
    return recs;
  };
  std::vector<std::vector<TrialRecord>> slots(static_cast<std::size_t>(std::max(0L, trials)));
  parallel_for(trials, jobs, [&](long t) { slots[static_cast<std::size_t>(t)] = run(t, false); });
  std::vector<BoundCheckReport> out;
  for (const auto& [id, text] : lemmas) out.push_back({.lemma = id, .statement = text});
  for (auto& recs : slots)
    for (std::size_t q = 0; q < recs.size() && q < out.size(); ++q) out[q].add(std::move(recs[q]), keep_records);
  for (std::size_t q = 0; q < out.size(); ++q) {
    auto& rep = out[q];
    if (rep.trials) rep.worst.inputs = run(rep.worst.trial, true)[q].inputs;
    for (auto& v : rep.violations) v.inputs = run(v.trial, true)[q].inputs;
  }
  return out;
}

}  // namespace swat
