#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "swat/bounds/report.hpp"
#include "swat/core/attention.hpp"
#include "swat/core/budget.hpp"
#include "swat/core/errors.hpp"
#include "swat/core/fnn.hpp"
#include "swat/core/serialize.hpp"
#include "swat/core/transformer.hpp"
#include "swat/util/hash.hpp"

namespace swat {

/// Limits for the randomized sweeps. Every trial draws its own shapes and
/// scales inside these limits; bounds are evaluated with the drawn
/// network's actual width, dimension, head count and max |entry| (floored
/// at 1), which is the tightest instance of each lemma.
struct SweepConfig {
  long trials = 10'000;
  int max_dim = 64;      // softmax length, FNN width
  int max_embed = 16;    // attention D
  int max_depth = 4;     // FNN L
  int max_heads = 4;     // H
  int max_window = 3;    // U
  double B = 2.0;        // parameter magnitude limit, >= 1
  double r = 2.0;        // input radius, >= 1
  double delta = 1e-2;   // perturbation size for C.6
  int jobs = 1;
  bool keep_records = false;

  void require_hypotheses() const {
    if (B < 1.0) throw HypothesisError("lemmas C.4-C.6 need B >= 1");
    if (r < 1.0) throw HypothesisError("lemmas C.4-C.6 need r >= 1");
    if (!(delta > 0.0)) throw HypothesisError("perturbation size must be positive");
    if (max_dim < 1 || max_embed < 1 || max_depth < 1 || max_heads < 1 || max_window < 0 || trials < 0)
      throw UsageError("sweep limits must be positive");
  }
};

namespace detail {

inline double log_uniform(Rng& rng, double lo, double hi) { return std::exp(uniform(rng, std::log(lo), std::log(hi))); }

/// Sparsity pattern with a random density, magnitudes uniform in [-b, b].
inline Eigen::MatrixXd random_sparse(Rng& rng, Eigen::Index rows, Eigen::Index cols, double b) {
  const double density = uniform(rng, 0.05, 1.0);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (uniform(rng) < density) m.data()[i] = uniform(rng, -b, b);
  return m;
}

inline Eigen::MatrixXd random_box(Rng& rng, Eigen::Index rows, Eigen::Index cols, double r) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, -r, r);
  return m;
}

/// Entries moved by at most delta and kept inside [-b, b].
inline Eigen::MatrixXd perturbed(Rng& rng, const Eigen::MatrixXd& m, double delta, double b) {
  Eigen::MatrixXd out = m;
  for (Eigen::Index i = 0; i < out.size(); ++i)
    out.data()[i] = std::clamp(out.data()[i] + uniform(rng, -delta, delta), -b, b);
  return out;
}

struct DenseFnn {
  std::vector<Eigen::MatrixXd> A;
  std::vector<Eigen::VectorXd> b;

  FnnParams params() const {
    FnnParams f;
    for (std::size_t i = 0; i < A.size(); ++i) f.layers.push_back({sparse_from_dense(A[i]), b[i]});
    return f;
  }
  double sup() const {
    double s = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i)
      s = std::max({s, A[i].cwiseAbs().maxCoeff(), b[i].size() ? b[i].cwiseAbs().maxCoeff() : 0.0});
    return s;
  }
  Eigen::Index width() const {
    Eigen::Index w = A.front().cols();
    for (const auto& a : A) w = std::max(w, a.rows());
    return w;
  }
};

inline DenseFnn random_fnn(Rng& rng, int max_depth, int max_width, double b) {
  const int L = static_cast<int>(uniform_int(rng, 1, max_depth));
  DenseFnn f;
  Eigen::Index in = uniform_int(rng, 1, max_width);
  for (int l = 0; l < L; ++l) {
    const Eigen::Index out = uniform_int(rng, 1, max_width);
    f.A.push_back(random_sparse(rng, out, in, b));
    f.b.push_back(random_sparse(rng, out, 1, b).col(0));
    in = out;
  }
  return f;
}

struct DenseHead {
  Eigen::MatrixXd K, Q, V;
};

struct DenseAttention {
  int U = 0;
  std::vector<DenseHead> heads;

  AttentionParams params() const {
    AttentionParams g{U, heads.front().V.rows(), {}};
    for (const auto& h : heads) g.heads.push_back({sparse_from_dense(h.K), sparse_from_dense(h.Q), sparse_from_dense(h.V)});
    return g;
  }
  double sup() const {
    double s = 0.0;
    for (const auto& h : heads)
      s = std::max({s, h.K.cwiseAbs().maxCoeff(), h.Q.cwiseAbs().maxCoeff(), h.V.cwiseAbs().maxCoeff()});
    return s;
  }
  Eigen::Index dim() const { return heads.front().V.rows(); }
};

inline DenseAttention random_attention(Rng& rng, const SweepConfig& c, double b) {
  DenseAttention g;
  g.U = static_cast<int>(uniform_int(rng, 0, c.max_window));
  const Eigen::Index D = uniform_int(rng, 1, c.max_embed);
  for (long h = 0, H = uniform_int(rng, 1, c.max_heads); h < H; ++h) {
    const Eigen::Index dp = uniform_int(rng, 1, D);
    g.heads.push_back({random_sparse(rng, dp, D, b), random_sparse(rng, dp, D, b), random_sparse(rng, D, D, b)});
  }
  return g;
}

inline nlohmann::json dense_json(const Eigen::MatrixXd& m) { return matrix_to_json(sparse_from_dense(m)); }

inline std::string fingerprint(std::initializer_list<const Eigen::MatrixXd*> parts) {
  Fnv1a h;
  for (const auto* p : parts) h.update(*p);
  return h.hex();
}

inline std::string fingerprint(const DenseFnn& f, std::initializer_list<const Eigen::MatrixXd*> parts) {
  Fnv1a h;
  for (std::size_t i = 0; i < f.A.size(); ++i) {
    h.update(f.A[i]);
    h.update(Eigen::MatrixXd(f.b[i]));
  }
  for (const auto* p : parts) h.update(*p);
  return h.hex();
}

inline std::string fingerprint(const DenseAttention& g, std::initializer_list<const Eigen::MatrixXd*> parts) {
  Fnv1a h;
  for (const auto& hd : g.heads) {
    h.update(hd.K);
    h.update(hd.Q);
    h.update(hd.V);
  }
  for (const auto* p : parts) h.update(*p);
  return h.hex();
}

inline double sup_norm(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace detail

/// Lemma C.1: theta_{i*} >= theta_i + delta for i != i*  =>
/// ||softmax(theta) - e_{i*}||_1 <= 2 d e^{-delta}.
/// Every fifth trial plants the worst case (all other logits tied at the margin).
inline BoundCheckReport check_softmax_concentration(const SweepConfig& c, std::uint64_t seed) {
  return run_sweep({{"C.1", "||softmax(theta) - e_i*||_1 <= 2 d exp(-delta)"}}, 1, c.trials, seed, c.jobs,
                   c.keep_records, [&](long t, Rng& rng, bool capture) {
                     const Eigen::Index d = uniform_int(rng, 1, c.max_dim);
                     const double delta = detail::log_uniform(rng, 1e-3, 60.0);
                     const bool planted = t % 5 == 0;
                     Eigen::VectorXd theta = detail::random_box(rng, d, 1, 10.0).col(0);
                     const Eigen::Index star = uniform_int(rng, 0, d - 1);
                     theta(star) = -1e300;
                     const double top = theta.maxCoeff();
                     if (planted) theta.setConstant(top);
                     theta(star) = (d > 1 ? top : 0.0) + delta;
                     // |1 - p*| = sum_{i != i*} p_i; forming 1 - p* directly cancels
                     // catastrophically once e^{-delta} nears the ulp of 1.
                     Eigen::VectorXd p = softmax(theta);
                     p(star) = 0.0;
                     TrialRecord r;
                     r.observed = 2.0 * p.sum();
                     r.log_bound = std::log(2.0 * static_cast<double>(d)) - delta;
                     r.probe = planted ? "tied-at-margin" : "random";
                     const Eigen::MatrixXd tm = theta;
                     r.digest = detail::fingerprint({&tm});
                     if (capture) r.inputs = {{"theta", vector_to_json(theta)}, {"delta", delta}, {"i_star", star}};
                     return std::vector<TrialRecord>{r};
                   })
      .front();
}

/// Lemma C.2: ||softmax(theta) - softmax(theta')||_1 <= 2 ||theta - theta'||_inf.
/// Probes: constant shifts (left side 0) and single-coordinate moves.
inline BoundCheckReport check_softmax_lipschitz(const SweepConfig& c, std::uint64_t seed) {
  return run_sweep({{"C.2", "||softmax(theta) - softmax(theta')||_1 <= 2 ||theta - theta'||_inf"}}, 2, c.trials, seed,
                   c.jobs, c.keep_records, [&](long t, Rng& rng, bool capture) {
                     const Eigen::Index d = uniform_int(rng, 1, c.max_dim);
                     const double scale = detail::log_uniform(rng, 1e-2, 50.0);
                     const Eigen::VectorXd theta = detail::random_box(rng, d, 1, scale).col(0);
                     const double step = detail::log_uniform(rng, 1e-6, 10.0);
                     Eigen::VectorXd other = theta;
                     std::string probe = "random";
                     if (t % 5 == 0) {
                       other.array() += step;
                       probe = "constant-shift";
                     } else if (t % 5 == 1) {
                       other(uniform_int(rng, 0, d - 1)) += step;
                       probe = "single-coordinate";
                     } else {
                       other += detail::random_box(rng, d, 1, step).col(0);
                     }
                     TrialRecord r;
                     r.observed = (softmax(theta) - softmax(other)).cwiseAbs().sum();
                     const double dist = (theta - other).cwiseAbs().maxCoeff();
                     r.log_bound = dist > 0 ? std::log(2.0 * dist) : -std::numeric_limits<double>::infinity();
                     r.probe = probe;
                     const Eigen::MatrixXd a = theta, b = other;
                     r.digest = detail::fingerprint({&a, &b});
                     if (capture) r.inputs = {{"theta", vector_to_json(theta)}, {"theta_prime", vector_to_json(other)}};
                     return std::vector<TrialRecord>{r};
                   })
      .front();
}

/// Lemmas C.4 and C.5 for FNNs: ||f(x) - f(x')||_inf <= (BW)^L ||x - x'||_inf
/// and ||f(x)||_inf <= (2BW)^L r. Every fifth trial is the all-B network on
/// non-negative inputs, where every layer attains its row-sum bound.
inline std::vector<BoundCheckReport> check_fnn_lipschitz_and_norm(const SweepConfig& c, std::uint64_t seed) {
  c.require_hypotheses();
  return run_sweep({{"C.4-fnn", "||f(x) - f(x')||_inf <= (BW)^L ||x - x'||_inf"},
                    {"C.5-fnn", "||f(x)||_inf <= (2BW)^L r"}},
                   4, c.trials, seed, c.jobs, c.keep_records, [&](long t, Rng& rng, bool capture) {
                     const double b = uniform(rng, 1.0, c.B);
                     detail::DenseFnn f = detail::random_fnn(rng, c.max_depth, c.max_dim, b);
                     const bool planted = t % 5 == 0;
                     if (planted) {
                       for (auto& a : f.A) a.setConstant(b);
                       for (auto& v : f.b) v.setConstant(b);
                     }
                     const double r = uniform(rng, 1.0, c.r);
                     const Eigen::Index in = f.A.front().cols();
                     Eigen::VectorXd x = detail::random_box(rng, in, 1, r).col(0);
                     if (planted) x = x.cwiseAbs();
                     Eigen::VectorXd x2 = x + detail::random_box(rng, in, 1, detail::log_uniform(rng, 1e-6, r)).col(0);
                     if (planted) x2 = x2.cwiseAbs();
                     const FnnParams p = f.params();
                     const double B = std::max(1.0, f.sup()), W = static_cast<double>(f.width());
                     const double L = static_cast<double>(f.A.size());
                     const double dist = (x - x2).cwiseAbs().maxCoeff();
                     const double r_obs = std::max({1.0, detail::sup_norm(x), detail::sup_norm(x2)});
                     const Eigen::VectorXd y = fnn_forward(p, x), y2 = fnn_forward(p, x2);
                     const Eigen::MatrixXd xm = x, x2m = x2;
                     const std::string dg = detail::fingerprint(f, {&xm, &x2m});
                     TrialRecord lip, norm;
                     lip.observed = (y - y2).cwiseAbs().maxCoeff();
                     lip.log_bound = L * std::log(B * W) + (dist > 0 ? std::log(dist) : -INFINITY);
                     norm.observed = std::max(detail::sup_norm(y), detail::sup_norm(y2));
                     norm.log_bound = L * std::log(2.0 * B * W) + std::log(r_obs);
                     for (auto* rec : {&lip, &norm}) {
                       rec->probe = planted ? "all-B" : "random";
                       rec->digest = dg;
                       if (capture)
                         rec->inputs = {{"fnn", fnn_to_json(p)}, {"x", vector_to_json(x)}, {"x_prime", vector_to_json(x2)}};
                     }
                     return std::vector<TrialRecord>{lip, norm};
                   });
}

/// Lemma C.6 for FNNs: parameters within delta entry-wise, both networks
/// inside the class  =>  ||f(x) - f~(x)||_inf <= 2 (2BW)^L delta r.
inline BoundCheckReport check_fnn_perturbation(const SweepConfig& c, std::uint64_t seed) {
  c.require_hypotheses();
  return run_sweep({{"C.6-fnn", "||f(x) - f~(x)||_inf <= 2 (2BW)^L delta r"}}, 6, c.trials, seed, c.jobs,
                   c.keep_records, [&](long t, Rng& rng, bool capture) {
                     const double b = uniform(rng, 1.0, c.B);
                     const detail::DenseFnn f = detail::random_fnn(rng, c.max_depth, c.max_dim, b);
                     const double delta = detail::log_uniform(rng, 1e-6, c.delta);
                     detail::DenseFnn g = f;
                     const bool bias_only = t % 5 == 0 && f.A.size() == 1;
                     for (std::size_t l = 0; l < g.A.size(); ++l) {
                       if (!bias_only) g.A[l] = detail::perturbed(rng, f.A[l], delta, b);
                       g.b[l] = detail::perturbed(rng, Eigen::MatrixXd(f.b[l]), delta, b).col(0);
                     }
                     double moved = 0.0;
                     for (std::size_t l = 0; l < g.A.size(); ++l)
                       moved = std::max({moved, detail::sup_norm(g.A[l] - f.A[l]), detail::sup_norm(g.b[l] - f.b[l])});
                     const double r = uniform(rng, 1.0, c.r);
                     const Eigen::VectorXd x = detail::random_box(rng, f.A.front().cols(), 1, r).col(0);
                     const double B = std::max({1.0, f.sup(), g.sup()}), W = static_cast<double>(f.width());
                     const double L = static_cast<double>(f.A.size());
                     TrialRecord rec;
                     rec.observed = (fnn_forward(f.params(), x) - fnn_forward(g.params(), x)).cwiseAbs().maxCoeff();
                     rec.log_bound = std::log(2.0) + L * std::log(2.0 * B * W) +
                                     (moved > 0 ? std::log(moved) : -INFINITY) +
                                     std::log(std::max(1.0, detail::sup_norm(x)));
                     rec.probe = bias_only ? "bias-only" : "random";
                     const Eigen::MatrixXd xm = x;
                     rec.digest = detail::fingerprint(g, {&xm});
                     if (capture)
                       rec.inputs = {{"fnn", fnn_to_json(f.params())}, {"fnn_perturbed", fnn_to_json(g.params())},
                                     {"x", vector_to_json(x)}};
                     return std::vector<TrialRecord>{rec};
                   })
      .front();
}

/// Lemmas C.4, C.5, C.6 for attention, per trial on one random layer:
///   ||g(X) - g(X')||_inf <= 6 H B^3 D^4 r^2 ||X - X'||_inf
///   ||g(X)||_inf         <= 2 H B D r
///   ||g(X) - g~(X)||_inf <= 5 H B^2 D^4 r^3 delta
/// Every fifth trial zeroes all V_h, where g is the identity.
inline std::vector<BoundCheckReport> check_attention_lipschitz_norm_perturb(const SweepConfig& c, std::uint64_t seed) {
  c.require_hypotheses();
  return run_sweep(
      {{"C.4-attention", "||g(X) - g(X')||_inf <= 6 H B^3 D^4 r^2 ||X - X'||_inf"},
       {"C.5-attention", "||g(X)||_inf <= 2 H B D r"},
       {"C.6-attention", "||g(X) - g~(X)||_inf <= 5 H B^2 D^4 r^3 delta"}},
      5, c.trials, seed, c.jobs, c.keep_records, [&](long t, Rng& rng, bool capture) {
        const double b = uniform(rng, 1.0, c.B);
        detail::DenseAttention g = detail::random_attention(rng, c, b);
        const bool zero_values = t % 5 == 0;
        if (zero_values)
          for (auto& h : g.heads) h.V.setZero();
        const double delta = detail::log_uniform(rng, 1e-6, c.delta);
        detail::DenseAttention gp = g;
        for (auto& h : gp.heads) {
          h.K = detail::perturbed(rng, h.K, delta, b);
          h.Q = detail::perturbed(rng, h.Q, delta, b);
          h.V = detail::perturbed(rng, h.V, delta, b);
        }
        double moved = 0.0;
        for (std::size_t h = 0; h < g.heads.size(); ++h)
          moved = std::max({moved, detail::sup_norm(g.heads[h].K - gp.heads[h].K),
                            detail::sup_norm(g.heads[h].Q - gp.heads[h].Q), detail::sup_norm(g.heads[h].V - gp.heads[h].V)});
        const double r = uniform(rng, 1.0, c.r);
        const Eigen::Index D = g.dim();
        const long n = 2L * g.U + 1 + uniform_int(rng, 0, 4);
        const Eigen::MatrixXd X = detail::random_box(rng, D, n, r);
        Eigen::MatrixXd X2 = X + detail::random_box(rng, D, n, detail::log_uniform(rng, 1e-6, r));
        X2 = X2.cwiseMax(-r).cwiseMin(r);
        const IndexRange eval{g.U, n - 1 - g.U};
        const AttentionParams p = g.params(), pp = gp.params();
        const Eigen::MatrixXd y = attention_forward(p, TokenWindow(0, X), eval).data();
        const Eigen::MatrixXd y2 = attention_forward(p, TokenWindow(0, X2), eval).data();
        const Eigen::MatrixXd yp = attention_forward(pp, TokenWindow(0, X), eval).data();
        const double H = static_cast<double>(g.heads.size());
        const double B = std::max({1.0, g.sup(), gp.sup()}), Dd = static_cast<double>(D);
        const double r_obs = std::max({1.0, detail::sup_norm(X), detail::sup_norm(X2)});
        const double dist = detail::sup_norm(X - X2);
        TrialRecord lip, norm, pert;
        lip.observed = detail::sup_norm(y - y2);
        lip.log_bound = std::log(6.0 * H) + 3 * std::log(B) + 4 * std::log(Dd) + 2 * std::log(r_obs) +
                        (dist > 0 ? std::log(dist) : -INFINITY);
        norm.observed = std::max(detail::sup_norm(y), detail::sup_norm(y2));
        norm.log_bound = std::log(2.0 * H * B * Dd * r_obs);
        pert.observed = detail::sup_norm(y - yp);
        pert.log_bound = std::log(5.0 * H) + 2 * std::log(B) + 4 * std::log(Dd) + 3 * std::log(r_obs) +
                         (moved > 0 ? std::log(moved) : -INFINITY);
        const std::string dg = detail::fingerprint(g, {&X, &X2});
        for (auto* rec : {&lip, &norm, &pert}) {
          rec->probe = zero_values ? "zero-values" : "random";
          rec->digest = dg;
          if (capture)
            rec->inputs = {{"attention", attention_to_json(p)}, {"attention_perturbed", attention_to_json(pp)},
                           {"X", detail::dense_json(X)}, {"X_prime", detail::dense_json(X2)}};
        }
        return std::vector<TrialRecord>{lip, norm, pert};
      });
}

/// Two blocks (attention then FNN, twice) with the per-layer constants
/// multiplied directly: C.5 carries the input radius through the layers and
/// C.4 supplies each layer's Lipschitz factor at that radius.
inline BoundCheckReport check_composite_lipschitz(const SweepConfig& c, std::uint64_t seed) {
  c.require_hypotheses();
  return run_sweep(
             {{"C.4-composite", "||F(X) - F(X')||_inf <= prod of per-layer constants ||X - X'||_inf"}}, 7, c.trials,
             seed, c.jobs, c.keep_records,
             [&](long, Rng& rng, bool capture) {
               const double b = uniform(rng, 1.0, c.B);
               const double r = uniform(rng, 1.0, c.r);
               TransformerParams t;
               std::vector<detail::DenseAttention> gs;
               std::vector<detail::DenseFnn> fs;
               detail::DenseAttention g1 = detail::random_attention(rng, c, b);
               const Eigen::Index D = g1.dim();
               t.embedding.matrix = sparse_identity_block(D, D, 0, 0, D);
               t.embedding.pe = PositionalEncoding::zero(D);
               gs.push_back(g1);
               for (int m = 0; m < 2; ++m) {
                 if (m == 1) {
                   detail::DenseAttention g;
                   g.U = static_cast<int>(uniform_int(rng, 0, c.max_window));
                   for (long h = 0, H = uniform_int(rng, 1, c.max_heads); h < H; ++h) {
                     const Eigen::Index dp = uniform_int(rng, 1, D);
                     g.heads.push_back({detail::random_sparse(rng, dp, D, b), detail::random_sparse(rng, dp, D, b),
                                        detail::random_sparse(rng, D, D, b)});
                   }
                   gs.push_back(g);
                 }
                 detail::DenseFnn f;
                 const int L = static_cast<int>(uniform_int(rng, 1, std::min(2, c.max_depth)));
                 Eigen::Index in = D;
                 for (int l = 0; l < L; ++l) {
                   const Eigen::Index out = l + 1 == L ? D : uniform_int(rng, 1, std::min(16, c.max_dim));
                   f.A.push_back(detail::random_sparse(rng, out, in, b));
                   f.b.push_back(detail::random_sparse(rng, out, 1, b).col(0));
                   in = out;
                 }
                 fs.push_back(f);
                 t.blocks.push_back({gs[static_cast<std::size_t>(m)].params(), f.params()});
               }
               const long radius = t.receptive_radius();
               const long n = 2 * radius + 1;
               const Eigen::MatrixXd X = detail::random_box(rng, D, n, r);
               const Eigen::MatrixXd X2 =
                   (X + detail::random_box(rng, D, n, detail::log_uniform(rng, 1e-6, r))).cwiseMax(-r).cwiseMin(r);
               const IndexRange eval{radius, radius};
               const double dist = detail::sup_norm(X - X2);
               // Radius and Lipschitz factor layer by layer.
               double rad = std::max({1.0, detail::sup_norm(X), detail::sup_norm(X2)}), log_lip = 0.0;
               for (int m = 0; m < 2; ++m) {
                 const auto& g = gs[static_cast<std::size_t>(m)];
                 const auto& f = fs[static_cast<std::size_t>(m)];
                 const double H = static_cast<double>(g.heads.size()), Bg = std::max(1.0, g.sup());
                 const double Dd = static_cast<double>(D);
                 log_lip += std::log(6.0 * H) + 3 * std::log(Bg) + 4 * std::log(Dd) + 2 * std::log(rad);
                 rad = 2.0 * H * Bg * Dd * rad;
                 const double Bf = std::max(1.0, f.sup()), W = static_cast<double>(f.width());
                 const double L = static_cast<double>(f.A.size());
                 log_lip += L * std::log(Bf * W);
                 rad = std::pow(2.0 * Bf * W, L) * rad;
               }
               TrialRecord rec;
               const Eigen::MatrixXd y = transformer_forward(t, TokenWindow(0, X), eval);
               const Eigen::MatrixXd y2 = transformer_forward(t, TokenWindow(0, X2), eval);
               rec.observed = detail::sup_norm(y - y2);
               rec.log_bound = log_lip + (dist > 0 ? std::log(dist) : -INFINITY);
               rec.probe = "random";
               rec.digest = detail::fingerprint({&X, &X2});
               if (capture)
                 rec.inputs = {{"transformer", transformer_to_json(t)}, {"X", detail::dense_json(X)},
                               {"X_prime", detail::dense_json(X2)}};
               return std::vector<TrialRecord>{rec};
             })
      .front();
}

}  // namespace swat
