#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "swat/construct/bank.hpp"
#include "swat/construct/common.hpp"
#include "swat/core/transformer.hpp"
#include "swat/space/importance.hpp"
#include "swat/space/smoothness.hpp"

namespace swat {

/// Channel layout of the importance-sorted extractor, D = d + d_max + 2d' + 4:
///   [x (d) | scratch (d_max) | mu | 1 | cos | sin | u (d') | w (d')]
/// Scratch slots are ordered by (rank, channel), which is the canonical
/// Coord order of the features with position = rank.
struct Theorem2Layout {
  int d = 1;
  Eigen::Index d_prime = 0;
  std::vector<Coord> features;          // (channel, rank), canonical order
  std::vector<std::vector<int>> rounds;  // rounds[m-1] = channels I_m

  Eigen::Index d_max() const noexcept { return static_cast<Eigen::Index>(features.size()); }
  Eigen::Index D() const noexcept { return d + d_max() + 2 * d_prime + 4; }
  Eigen::Index mu() const noexcept { return d + d_max(); }
  Eigen::Index one() const noexcept { return mu() + 1; }
  Eigen::Index u0() const noexcept { return mu() + 4; }
  Eigen::Index w0() const noexcept { return u0() + d_prime; }
  int r_max() const noexcept { return static_cast<int>(rounds.size()); }

  /// Scratch row of the idx-th channel extracted in round m (1-based).
  Eigen::Index scratch(int m, std::size_t idx) const {
    Eigen::Index row = d;
    for (int q = 1; q < m; ++q) row += static_cast<Eigen::Index>(rounds[static_cast<std::size_t>(q - 1)].size());
    return row + static_cast<Eigen::Index>(idx);
  }
};

/// Coherence the bank must meet so that memory cross-talk costs at most
/// half the rank gap: (2 + kappa)(2 r_max - 1) eps1 <= kappa / 2.
inline double bank_coherence_limit(double kappa, int r_max) {
  return kappa / (2.0 * (2.0 + kappa) * (2.0 * std::max(1, r_max) - 1.0));
}

/// Softmax error per round that keeps the memory state inside the remaining
/// quarter of the gap: (2 + kappa) sqrt(d') * 2 eps2 <= kappa / 4.
inline double state_error_limit(double kappa, Eigen::Index d_prime) {
  return kappa / (8.0 * (2.0 + kappa) * std::sqrt(static_cast<double>(std::max<Eigen::Index>(1, d_prime))));
}

/// chi = (2 r_max^beta / c) log((4V + 2) r_max / eps2).
inline double theorem2_chi(const ImportanceModel& m, int r_max, double eps2) {
  const double r = std::max(1, r_max);
  return 2.0 * std::pow(r, m.beta) / m.c * std::log((4.0 * m.V + 2.0) * r / eps2);
}

struct Theorem2Network {
  TransformerParams net;  // Enc_P and the rounds m = 1..r_max (layers 2..M)
  Theorem2Layout layout;
  ImportanceModel importance;
  /// Layer-1 stand-in: writes mu^_i into the mu channel. Empty means the
  /// exact importance scores (oracle mode).
  std::function<double(const TokenWindow&, long)> mu_hook;
  std::vector<Eigen::VectorXd> bank;
  double chi = 0.0;
  double kappa = 0.0;  // c r_max^{-beta}
  double eps2 = 0.0;
  double bank_coherence = 0.0;

  int V() const noexcept { return importance.V; }
  int layers() const noexcept { return layout.r_max() + 1; }
  const Eigen::VectorXd& u(long i) const {
    const long l = static_cast<long>(bank.size());
    return bank[static_cast<std::size_t>(((i % l) + l) % l)];
  }
  double mu_at(const TokenWindow& x, long i) const { return mu_hook ? mu_hook(x, i) : importance.score(x, i); }
};

/// Rounds m = 1..r_max: key = [mu; u], query = chi [1; -(2 + kappa) w],
/// value copies channels I_m of the attended token into round-m scratch and
/// its u into w. Identity FNNs between rounds; the last round has none.
/// Feature positions of `spec` are ranks 1..2V+1.
inline Theorem2Network build_theorem2_network(const ImportanceModel& m, const SmoothnessSpec& spec, double T,
                                              const OrthonormalBank& bank, double chi, double eps2 = 0.0) {
  const long l = 2L * m.V + 1;
  if (bank.size() != l)
    throw UsageError("bank has " + std::to_string(bank.size()) + " vectors, window needs " + std::to_string(l));
  Theorem2Network out;
  out.importance = m;
  out.chi = chi;
  out.eps2 = eps2;
  out.bank = bank.vectors;
  out.bank_coherence = max_coherence(bank.vectors);
  Theorem2Layout& lay = out.layout;
  lay.d = spec.rule.d;
  lay.d_prime = bank.dim();
  lay.features = feature_index_set(spec, T).coords;
  for (const auto& c : lay.features) {
    if (c.position < 1 || c.position > l)
      throw UsageError("feature " + to_string(c) + " is not a rank in 1.." + std::to_string(l));
    if (lay.rounds.size() < static_cast<std::size_t>(c.position)) lay.rounds.resize(static_cast<std::size_t>(c.position));
    lay.rounds[static_cast<std::size_t>(c.position - 1)].push_back(c.channel);
  }
  const int r_max = lay.r_max();
  out.kappa = m.c * std::pow(std::max(1, r_max), -m.beta);
  if (r_max > 0 && out.bank_coherence > bank_coherence_limit(out.kappa, r_max))
    throw HypothesisError("bank coherence " + std::to_string(out.bank_coherence) + " exceeds the limit " +
                          std::to_string(bank_coherence_limit(out.kappa, r_max)) + " for r_max = " +
                          std::to_string(r_max));

  const Eigen::Index D = lay.D(), dp = lay.d_prime;
  TransformerParams& t = out.net;
  t.embedding.matrix = sparse_identity_block(D, lay.d, 0, 0, lay.d);
  t.embedding.pe = PositionalEncoding::sinusoidal_memory(D, window_angle(m.V), bank.vectors, dp);
  std::vector<Triplet> key{{0, lay.mu(), 1.0}}, query{{0, lay.one(), chi}};
  for (Eigen::Index q = 0; q < dp; ++q) {
    key.emplace_back(1 + q, lay.u0() + q, 1.0);
    query.emplace_back(1 + q, lay.w0() + q, -chi * (2.0 + out.kappa));
  }
  const SparseMatrix K = sparse_from_triplets(1 + dp, D, key), Q = sparse_from_triplets(1 + dp, D, query);
  for (int round = 1; round <= r_max; ++round) {
    std::vector<Triplet> value;
    const auto& channels = lay.rounds[static_cast<std::size_t>(round - 1)];
    for (std::size_t idx = 0; idx < channels.size(); ++idx) value.emplace_back(lay.scratch(round, idx), channels[idx], 1.0);
    for (Eigen::Index q = 0; q < dp; ++q) value.emplace_back(lay.w0() + q, lay.u0() + q, 1.0);
    TransformerBlock block;
    block.attention.window = m.V;
    block.attention.embed_dim = D;
    block.attention.heads.push_back({K, Q, sparse_from_triplets(D, D, value)});
    if (round < r_max) block.fnn = identity_fnn(D);
    t.blocks.push_back(std::move(block));
  }
  t.validate();
  return out;
}

/// The error budget and scale used by default: eps2 = min(target, state
/// limit) and chi from theorem2_chi.
inline Theorem2Network make_theorem2_network(const ImportanceModel& m, const SmoothnessSpec& spec, double T,
                                             const OrthonormalBank& bank, double eps2_target) {
  const auto coords = feature_index_set(spec, T).coords;
  long r_max = 0;
  for (const auto& c : coords) r_max = std::max(r_max, c.position);
  const double kappa = m.c * std::pow(std::max(1.0, static_cast<double>(r_max)), -m.beta);
  const double eps2 = std::min(eps2_target, state_error_limit(kappa, bank.dim()));
  return build_theorem2_network(m, spec, T, bank, theorem2_chi(m, static_cast<int>(r_max), eps2), eps2);
}

/// States z^(1), z^(2), ..., z^(M) restricted to what later rounds need;
/// z^(1) is Enc_P(X) with mu^ written into the mu channel.
inline std::vector<TokenWindow> theorem2_states(const Theorem2Network& n, const TokenWindow& x, IndexRange eval) {
  const int r_max = n.layout.r_max();
  const long R = static_cast<long>(r_max) * n.V();
  const IndexRange ctx = eval.widened(R, R);
  const IndexRange need = ctx.widened(n.importance.reach, n.importance.reach);
  if (!x.range().contains(need))
    throw BoundaryError("theorem-2 network: input window too narrow",
                        need.first < x.first() ? x.first() - need.first : 0,
                        need.last > x.last() ? need.last - x.last() : 0);
  TokenWindow z = embed(n.net.embedding, x.slice(ctx.first, ctx.last));
  for (long i = ctx.first; i <= ctx.last; ++i) z.data()(n.layout.mu(), z.local(i)) = n.mu_at(x, i);
  std::vector<TokenWindow> states{z};
  for (int round = 0; round < r_max; ++round) {
    const long rem = static_cast<long>(r_max - round - 1) * n.V();
    states.push_back(run_blocks(n.net, states.back(), eval.widened(rem, rem), static_cast<std::size_t>(round),
                                static_cast<std::size_t>(round) + 1));
  }
  return states;
}

/// Hardmax reference x~^(M)_k: exact scratch Gamma o Pi o Sigma_k and exact memory.
inline Eigen::VectorXd theorem2_reference(const Theorem2Network& n, const TokenWindow& x, long k,
                                          const Eigen::VectorXd& z1_k) {
  const auto pi = sort_permutation(n.importance, x, k);
  const auto& lay = n.layout;
  Eigen::VectorXd z = z1_k;
  for (int round = 1; round <= lay.r_max(); ++round) {
    const long p = k + pi[static_cast<std::size_t>(round - 1)];
    const auto& channels = lay.rounds[static_cast<std::size_t>(round - 1)];
    for (std::size_t idx = 0; idx < channels.size(); ++idx) z(lay.scratch(round, idx)) = x.at(channels[idx], p);
    z.segment(lay.w0(), lay.d_prime) += n.u(p);
  }
  return z;
}

struct PiecewiseCheck {
  double deviation = 0.0;     // ||x^(M)_k - x~^(M)_k||_inf, mu channel excluded
  double cz_deviation = 0.0;  // ||C z^(M)_k - Gamma o Pi o Sigma_k(X)||_inf
  double envelope = 0.0;      // 3^{r_max} eps2
  std::vector<long> trace;    // argmax relative position per round
  std::vector<long> order;    // pi(1..r_max)
  Eigen::VectorXd state;      // z^(M)_k

  bool trace_matches() const { return trace == order; }
  bool pass() const { return trace_matches() && deviation <= envelope && cz_deviation <= envelope; }
};

inline PiecewiseCheck piecewise_extraction_error(const Theorem2Network& n, const TokenWindow& x, long k) {
  if (!well_separated(n.importance, x, k)) throw HypothesisError("input is not well separated at k = " + std::to_string(k));
  const auto states = theorem2_states(n, x, IndexRange{k, k});
  const auto& lay = n.layout;
  PiecewiseCheck out;
  const auto pi = sort_permutation(n.importance, x, k);
  out.order.assign(pi.begin(), pi.begin() + lay.r_max());
  for (int round = 0; round < lay.r_max(); ++round) {
    const auto& head = n.net.blocks[static_cast<std::size_t>(round)].attention.heads.front();
    Eigen::Index arg = 0;
    attention_weights(head, states[static_cast<std::size_t>(round)], k, n.V()).maxCoeff(&arg);
    out.trace.push_back(static_cast<long>(arg) - n.V());
  }
  out.state = states.back().token(k);
  const Eigen::VectorXd ref = theorem2_reference(n, x, k, states.front().token(k));
  Eigen::VectorXd diff = (out.state - ref).cwiseAbs();
  diff(lay.mu()) = 0.0;
  out.deviation = diff.maxCoeff();
  const Eigen::VectorXd gamma = gamma_extractor(lay.features, permuted_window(n.importance, x, k));
  out.cz_deviation = lay.d_max() ? (out.state.segment(lay.d, lay.d_max()) - gamma).cwiseAbs().maxCoeff() : 0.0;
  out.envelope = std::pow(3.0, lay.r_max()) * n.eps2;
  return out;
}

/// g^_k(X) = f_T(C z^(M)_k) for every k in eval.
inline Eigen::VectorXd theorem2_readout(const Theorem2Network& n, const TokenWindow& x, IndexRange eval,
                                        const FeatureHead& head) {
  const TokenWindow z = theorem2_states(n, x, eval).back();
  Eigen::VectorXd out(eval.size());
  for (long k = eval.first; k <= eval.last; ++k)
    out(k - eval.first) = head(z.token(k).segment(n.layout.d, n.layout.d_max()));
  return out;
}

}  // namespace swat
