#pragma once

// Run plumbing for the swat binary: layered config, output registration and
// the manifest written once per run.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "swat/core/errors.hpp"
#include "swat/util/hash.hpp"

#ifndef SWAT_VERSION
#define SWAT_VERSION "0.0.0"
#endif

namespace swat::cli {

using nlohmann::json;
namespace fs = std::filesystem;

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << 'Z';
  return os.str();
}

/// "4", "1..8", "0.5..2:0.5", "64,256,1024" or a JSON number/array.
inline std::vector<double> parse_number_list(const json& j) {
  if (j.is_number()) return {j.get<double>()};
  if (j.is_array()) {
    std::vector<double> out;
    for (const auto& v : j) {
      if (!v.is_number()) throw UsageError("list entries must be numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }
  if (!j.is_string()) throw UsageError("expected a number, a list or a range");
  const std::string s = j.get<std::string>();
  std::vector<double> out;
  try {
    if (const auto dots = s.find(".."); dots != std::string::npos) {
      const auto colon = s.find(':', dots);
      const double lo = std::stod(s.substr(0, dots));
      const double hi = std::stod(s.substr(dots + 2, colon == std::string::npos ? std::string::npos : colon - dots - 2));
      const double step = colon == std::string::npos ? 1.0 : std::stod(s.substr(colon + 1));
      if (!(step > 0) || hi < lo) throw UsageError("bad range '" + s + "'");
      for (long i = 0; lo + static_cast<double>(i) * step <= hi + 1e-9; ++i) out.push_back(lo + static_cast<double>(i) * step);
      return out;
    }
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw UsageError("bad number '" + cell + "'");
    }
  } catch (const std::logic_error&) {
    throw UsageError("cannot parse '" + s + "' as a number list");
  }
  if (out.empty()) throw UsageError("empty number list");
  return out;
}

/// Writes `value` over `base` key by key. Keys must exist in `base`; types
/// must agree with the default (a null default takes anything, a list
/// default also takes a range string or a single number, a string default
/// also takes an object).
inline void overlay(json& base, const json& value, const std::string& where) {
  if (!value.is_object()) throw UsageError(where + ": expected an object");
  for (const auto& [k, v] : value.items()) {
    const std::string path = where + "." + k;
    if (!base.contains(k)) throw UsageError("unknown config key '" + path + "'");
    json& d = base[k];
    if (d.is_null() || v.is_null()) {
      d = v;
    } else if (d.is_object() && v.is_object()) {
      overlay(d, v, path);
    } else if (d.is_array() && v.is_array() && !(v.size() && v.front().is_number())) {
      d = v;
    } else if (d.is_array()) {
      json list = json::array();
      for (double x : parse_number_list(v)) list.push_back(x);
      d = std::move(list);
    } else if (d.is_number() && v.is_number()) {
      d = v;
    } else if (d.is_string() && v.is_object()) {  // named spec or inline definition
      d = v;
    } else if (d.type() == v.type()) {
      d = v;
    } else {
      throw UsageError("config key '" + path + "' expects " + std::string(d.type_name()) + ", got " + v.type_name());
    }
  }
}

/// A command-line value: JSON when it parses as JSON, a plain string otherwise.
inline json flag_value(const std::string& raw) {
  json j = json::parse(raw, nullptr, false);
  return j.is_discarded() ? json(raw) : j;
}

inline std::string canonical(const json& j) { return j.dump(); }

class Run {
 public:
  Run(std::string command, std::vector<std::string> argv, fs::path out_dir)
      : command_(std::move(command)), argv_(std::move(argv)), out_dir_(std::move(out_dir)), started_(utc_now()) {
    std::error_code ec;
    fs::create_directories(out_dir_, ec);
    if (ec || !fs::is_directory(out_dir_)) throw UsageError("cannot create output directory " + out_dir_.string());
  }

  const std::string& command() const { return command_; }
  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t s) { seed_ = s; }
  const std::string& digest() const { return digest_; }

  /// Fixes the effective config; the digest covers everything that shapes
  /// the outputs (seed and jobs are recorded separately).
  void set_config(json cfg) {
    config_ = std::move(cfg);
    digest_ = swat::digest(canonical(config_));
  }

  json stamp(json j) const {
    j["config_digest"] = digest_;
    j["run_seed"] = seed_;
    return j;
  }

  /// Path for an output file, registered in the manifest.
  fs::path output(const std::string& name) {
    outputs_.push_back(name);
    return out_dir_ / name;
  }

  void write_json(const std::string& name, const json& j) {
    std::ofstream os(output(name));
    if (!os) throw UsageError("cannot write " + (out_dir_ / name).string());
    os << stamp(j).dump(1) << '\n';
  }

  /// Re-emits JSON lines with the digest and seed added to each record.
  void write_jsonl(const std::string& name, const std::string& lines) {
    std::ofstream os(output(name));
    if (!os) throw UsageError("cannot write " + (out_dir_ / name).string());
    std::istringstream is(lines);
    std::string line;
    while (std::getline(is, line))
      if (!line.empty()) os << stamp(json::parse(line)).dump() << '\n';
  }

  void write_manifest(int exit_code, const std::string& error) {
    json m{{"command", command_},
           {"argv", argv_},
           {"config", config_},
           {"config_digest", digest_},
           {"seed", seed_},
           {"tool_version", SWAT_VERSION},
           {"started", started_},
           {"finished", utc_now()},
           {"outputs", outputs_},
           {"exit_code", exit_code}};
    if (!error.empty()) m["error"] = error;
    std::ofstream(out_dir_ / manifest_name()) << m.dump(1) << '\n';
  }

  std::string manifest_name() const {
    std::string n = command_;
    for (char& c : n)
      if (c == ' ') c = '-';
    return n + ".manifest.json";
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  fs::path out_dir_;
  std::uint64_t seed_ = 0;
  std::string started_;
  json config_;
  std::string digest_ = swat::digest(canonical(json()));
  std::vector<std::string> outputs_;
};

/// CSV with the config digest and run seed as the two trailing columns.
class CsvWriter {
 public:
  CsvWriter(Run& run, const std::string& name, const std::vector<std::string>& header)
      : os_(run.output(name)), tail_("," + run.digest() + "," + std::to_string(run.seed())) {
    if (!os_) throw UsageError("cannot write " + name);
    os_ << std::setprecision(17);
    for (std::size_t i = 0; i < header.size(); ++i) os_ << (i ? "," : "") << header[i];
    os_ << ",config_digest,run_seed\n";
  }

  template <typename... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((os_ << (first ? "" : ",") << cells, first = false), ...);
    os_ << tail_ << '\n';
  }

 private:
  std::ofstream os_;
  std::string tail_;
};

}  // namespace swat::cli
