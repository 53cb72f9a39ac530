#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "swat/core/errors.hpp"
#include "swat/core/token_window.hpp"
#include "swat/space/target.hpp"
#include "swat/util/rng.hpp"

namespace swat {

/// Importance function mu with window radius V and separation constants
/// (c, beta). `score(X, j)` is mu(X)_j; it must be shift-equivariant
/// (mu(Sigma_k X)_j = mu(X)_{j+k}) and read tokens within `reach` of j.
struct ImportanceModel {
  int V = 1;
  double c = 0.1;
  double beta = 1.0;
  int reach = 0;
  std::function<double(const TokenWindow&, long)> score;

  /// mu_j = 2 <w, x_j> / ||w||_1 - 1, which lies in [-1, 1] on [0,1]^d.
  static ImportanceModel linear(int V, double c, double beta, Eigen::VectorXd w) {
    const double l1 = w.cwiseAbs().sum();
    if (!(l1 > 0.0) || (w.array() < 0.0).any()) throw UsageError("linear importance needs non-negative weights");
    return {V, c, beta, 0, [w, l1](const TokenWindow& x, long j) { return 2.0 * w.dot(x.token(j)) / l1 - 1.0; }};
  }

  /// Scores over the relative positions -V..V around center k.
  Eigen::VectorXd scores(const TokenWindow& x, long k) const {
    if (!x.range().contains(IndexRange{k - V - reach, k + V + reach}))
      throw BoundaryError("importance window incomplete", 0, 0);
    Eigen::VectorXd s(2 * V + 1);
    for (long j = -V; j <= V; ++j) s(j + V) = score(x, k + j);
    return s;
  }

  /// c * i^{-beta}, the required gap below rank i (1-based).
  double gap(long i) const { return c * std::pow(static_cast<double>(i), -beta); }
};

namespace detail {

inline std::vector<long> argsort_desc(const Eigen::VectorXd& s, long V) {
  std::vector<long> pi(static_cast<std::size_t>(s.size()));
  std::iota(pi.begin(), pi.end(), -V);
  std::stable_sort(pi.begin(), pi.end(), [&](long a, long b) { return s(a + V) > s(b + V); });
  return pi;
}

}  // namespace detail

/// pi(1..2V+1) as relative positions in strictly decreasing score order.
inline std::vector<long> sort_permutation(const ImportanceModel& m, const TokenWindow& x, long k) {
  const Eigen::VectorXd s = m.scores(x, k);
  const auto pi = detail::argsort_desc(s, m.V);
  for (std::size_t i = 1; i < pi.size(); ++i)
    if (!(s(pi[i - 1] + m.V) > s(pi[i] + m.V)))
      throw DegenerateInputError("tied importance scores at relative positions " + std::to_string(pi[i - 1]) +
                                 " and " + std::to_string(pi[i]));
  return pi;
}

/// Eq. (importance): mu_{pi(i)} >= mu_{pi(i+1)} + c i^{-beta} for every i.
inline bool well_separated(const ImportanceModel& m, const TokenWindow& x, long k) {
  const Eigen::VectorXd s = m.scores(x, k);
  const auto pi = detail::argsort_desc(s, m.V);
  for (std::size_t i = 1; i < pi.size(); ++i)
    if (s(pi[i - 1] + m.V) < s(pi[i] + m.V) + m.gap(static_cast<long>(i))) return false;
  return true;
}

/// Pi(Sigma_k X) as a window over slots 1..2V+1.
inline TokenWindow permuted_window(const ImportanceModel& m, const TokenWindow& x, long k) {
  const auto pi = sort_permutation(m, x, k);
  Eigen::MatrixXd out(x.dim(), static_cast<Eigen::Index>(pi.size()));
  for (std::size_t t = 0; t < pi.size(); ++t) out.col(static_cast<Eigen::Index>(t)) = x.token(k + pi[t]);
  return TokenWindow(1, std::move(out));
}

/// g(Sigma_k X) = f(Pi(Sigma_k X)); f reads slots 1..2V+1.
inline double piecewise_target_eval(const SyntheticTarget& f, const ImportanceModel& m, const TokenWindow& x, long k) {
  return f.eval(permuted_window(m, x, k), 0);
}

struct SeparatedSample {
  TokenWindow x;
  long proposals = 0;  // draws needed, including the accepted one
};

/// Well-separated inputs for a linear importance model on channel 0
/// (weight vector e_0): tokens are uniform except channel 0 on the window
/// around k, whose scores are planted with random ranks and gaps
/// c i^{-beta} + slack. Every proposal is checked against Eq. (importance)
/// and rejected on failure.
inline SeparatedSample sample_separated_input(const ImportanceModel& m, int d, IndexRange range, long k, Rng& rng,
                                              long max_proposals = 1000) {
  const long n = 2L * m.V + 1;
  double need = 0.0;
  for (long i = 1; i < n; ++i) need += m.gap(i);
  if (need >= 2.0) throw UsageError("separation constants do not fit in [-1, 1] for this V");
  SeparatedSample out;
  for (out.proposals = 1; out.proposals <= max_proposals; ++out.proposals) {
    Eigen::MatrixXd data(d, range.size());
    for (Eigen::Index q = 0; q < data.size(); ++q) data.data()[q] = uniform(rng);
    // Gaps: required part plus a random share of the remaining room.
    std::vector<double> extra(static_cast<std::size_t>(n));
    double total = 0.0;
    for (auto& e : extra) total += (e = -std::log(uniform(rng, 1e-12, 1.0)));
    const double room = (2.0 - need) * uniform(rng, 0.5, 0.95);
    double top = 1.0 - (2.0 - need - room) * uniform(rng);
    std::vector<long> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), -m.V);
    std::shuffle(order.begin(), order.end(), rng);
    double value = top - room * extra[0] / total;
    for (long i = 0; i < n; ++i) {
      if (i > 0) value -= m.gap(i) + room * extra[static_cast<std::size_t>(i)] / total;
      data(0, k + order[static_cast<std::size_t>(i)] - range.first) = std::clamp((value + 1.0) / 2.0, 0.0, 1.0);
    }
    out.x = TokenWindow(range.first, std::move(data));
    if (well_separated(m, out.x, k)) return out;
  }
  throw SamplingError("no well-separated input after " + std::to_string(max_proposals) + " proposals", 0.0);
}

}  // namespace swat
