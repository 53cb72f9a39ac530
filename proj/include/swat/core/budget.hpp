#pragma once

#include <algorithm>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "swat/core/matrix.hpp"
#include "swat/core/transformer.hpp"

namespace swat {

/// Hyperparameters of the class T(M, U, D, H, L, W, S, B). `windows` holds
/// U_m per block; a single entry applies to every block.
struct ClassBudget {
  int M = 1;
  std::vector<int> windows{1};
  long D = 1;
  int H = 1;
  int L = 1;
  long W = 1;
  long S = 1;
  double B = 1.0;
  std::optional<double> R;

  int window_for(int m) const {
    if (windows.empty()) return 0;
    return windows[std::min<std::size_t>(static_cast<std::size_t>(m), windows.size() - 1)];
  }
};

struct BudgetCheck {
  std::string constraint;
  double observed = 0.0;
  double limit = 0.0;
  bool pass = true;
};

struct BudgetReport {
  std::vector<BudgetCheck> checks;

  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const BudgetCheck& c) { return c.pass; });
  }

  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto& c : checks)
      if (!c.pass) out.push_back(c.constraint);
    return out;
  }

  const BudgetCheck* find(const std::string& constraint) const {
    for (const auto& c : checks)
      if (c.constraint == constraint) return &c;
    return nullptr;
  }

  std::string summary() const {
    std::ostringstream os;
    for (const auto& c : checks)
      os << (c.pass ? "ok   " : "FAIL ") << c.constraint << ": " << c.observed << " <= " << c.limit << '\n';
    return os.str();
  }
};

/// Counts the nonzero parameters of an FNN: sum_i ||A_i||_0 + ||b_i||_0.
inline long fnn_nonzeros(const FnnParams& f, double zero_tol = 0.0) {
  long n = 0;
  for (const auto& l : f.layers) n += count_nonzeros(l.weight, zero_tol) + count_nonzeros(l.bias, zero_tol);
  return n;
}

inline double fnn_sup_norm(const FnnParams& f) {
  double b = 0.0;
  for (const auto& l : f.layers) b = std::max({b, max_abs(l.weight), max_abs(l.bias)});
  return b;
}

inline double attention_sup_norm(const AttentionParams& g) {
  double b = 0.0;
  for (const auto& h : g.heads) b = std::max({b, max_abs(h.key), max_abs(h.query), max_abs(h.value)});
  return b;
}

/// Per-constraint membership of t in the class described by b. Entries with
/// |a| <= zero_tol count as zeros for the sparsity constraint.
inline BudgetReport validate_budget(const TransformerParams& t, const ClassBudget& b, double zero_tol = 0.0) {
  BudgetReport rep;
  auto add = [&](std::string name, double observed, double limit) {
    rep.checks.push_back({std::move(name), observed, limit, observed <= limit});
  };

  add("layers", t.layer_count(), b.M);
  add("embedding sup-norm", max_abs(t.embedding.matrix), b.B);
  add("positional sup-norm", t.embedding.pe_bound(), b.B);
  add("embed dim", static_cast<double>(t.embedding.embed_dim()), static_cast<double>(b.D));
  for (int m = 0; m < t.layer_count(); ++m) {
    const auto& blk = t.blocks[static_cast<std::size_t>(m)];
    const std::string tag = "block " + std::to_string(m) + " ";
    add(tag + "window", blk.attention.window, b.window_for(m));
    add(tag + "heads", blk.attention.head_count(), b.H);
    add(tag + "attention dim", static_cast<double>(blk.attention.embed_dim), static_cast<double>(b.D));
    add(tag + "attention sup-norm", attention_sup_norm(blk.attention), b.B);
    add(tag + "fnn depth", blk.fnn.depth(), b.L);
    add(tag + "fnn width", static_cast<double>(blk.fnn.width()), static_cast<double>(b.W));
    add(tag + "fnn nonzeros", static_cast<double>(fnn_nonzeros(blk.fnn, zero_tol)), static_cast<double>(b.S));
    add(tag + "fnn sup-norm", fnn_sup_norm(blk.fnn), b.B);
  }
  if (b.R) add("clip radius", t.clip.value_or(std::numeric_limits<double>::infinity()), *b.R);
  return rep;
}

}  // namespace swat
