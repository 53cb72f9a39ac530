#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "swat/core/errors.hpp"
#include "swat/core/matrix.hpp"
#include "swat/core/transformer.hpp"
#include "swat/util/rng.hpp"

// Dense trainable mirror of TransformerParams with hand-written reverse-mode
// gradients. Forward semantics are identical to transformer_forward; the
// positional encoding is fixed and carries no parameters.

namespace swat {

enum class ParamKind { embedding, key, query, value, fnn_weight, fnn_bias };

inline const char* to_string(ParamKind k) {
  switch (k) {
    case ParamKind::embedding: return "embedding";
    case ParamKind::key: return "key";
    case ParamKind::query: return "query";
    case ParamKind::value: return "value";
    case ParamKind::fnn_weight: return "fnn_weight";
    case ParamKind::fnn_bias: return "fnn_bias";
  }
  return "?";
}

struct DenseHead {
  Eigen::MatrixXd K, Q, V;
};

struct DenseLayer {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

struct DenseBlock {
  int window = 0;
  std::vector<DenseHead> heads;
  std::vector<DenseLayer> fnn;
};

struct DenseModel {
  Eigen::MatrixXd E;
  PositionalEncoding pe;
  std::vector<DenseBlock> blocks;
  std::optional<double> clip;

  static DenseModel from_params(const TransformerParams& t) {
    t.validate();
    DenseModel m;
    m.E = Eigen::MatrixXd(t.embedding.matrix);
    m.pe = t.embedding.pe;
    for (const auto& b : t.blocks) {
      DenseBlock db;
      db.window = b.attention.window;
      for (const auto& h : b.attention.heads)
        db.heads.push_back({Eigen::MatrixXd(h.key), Eigen::MatrixXd(h.query), Eigen::MatrixXd(h.value)});
      for (const auto& l : b.fnn.layers) db.fnn.push_back({Eigen::MatrixXd(l.weight), l.bias});
      m.blocks.push_back(std::move(db));
    }
    m.clip = t.clip;
    return m;
  }

  TransformerParams to_params() const {
    TransformerParams t;
    t.embedding.matrix = sparse_from_dense(E);
    t.embedding.pe = pe;
    Eigen::Index dim = E.rows();
    for (const auto& b : blocks) {
      TransformerBlock tb;
      tb.attention.window = b.window;
      tb.attention.embed_dim = dim;
      for (const auto& h : b.heads)
        tb.attention.heads.push_back({sparse_from_dense(h.K), sparse_from_dense(h.Q), sparse_from_dense(h.V)});
      for (const auto& l : b.fnn) tb.fnn.layers.push_back({sparse_from_dense(l.W), l.b});
      if (!b.fnn.empty()) dim = b.fnn.back().W.rows();
      t.blocks.push_back(std::move(tb));
    }
    t.clip = clip;
    t.validate();
    return t;
  }

  long receptive_radius() const noexcept {
    long r = 0;
    for (const auto& b : blocks) r += b.window;
    return r;
  }

  /// Same shapes, all zeros.
  DenseModel zeros_like() const {
    DenseModel g = *this;
    g.for_each([](ParamKind, Eigen::Map<Eigen::VectorXd> v) { v.setZero(); });
    return g;
  }

  /// Visits every trainable tensor as a flat view, in a fixed order.
  template <class F>
  void for_each(F&& f) {
    auto view = [](auto& m) { return Eigen::Map<Eigen::VectorXd>(m.data(), m.size()); };
    f(ParamKind::embedding, view(E));
    for (auto& b : blocks) {
      for (auto& h : b.heads) {
        f(ParamKind::key, view(h.K));
        f(ParamKind::query, view(h.Q));
        f(ParamKind::value, view(h.V));
      }
      for (auto& l : b.fnn) {
        f(ParamKind::fnn_weight, view(l.W));
        f(ParamKind::fnn_bias, view(l.b));
      }
    }
  }

  long parameter_count() {
    long n = 0;
    for_each([&](ParamKind, Eigen::Map<Eigen::VectorXd> v) { n += v.size(); });
    return n;
  }

  double sup_norm() {
    double s = 0.0;
    for_each([&](ParamKind, Eigen::Map<Eigen::VectorXd> v) {
      if (v.size()) s = std::max(s, v.cwiseAbs().maxCoeff());
    });
    return s;
  }
};

namespace detail {

struct HeadCache {
  Eigen::MatrixXd keys, queries, values;  // over ctx, eval, ctx
  std::vector<Eigen::VectorXd> weights;   // softmax per eval column
};

struct BlockCache {
  TokenWindow in;                         // attention input over ctx
  IndexRange eval;                        // attention output range
  std::vector<HeadCache> heads;
  Eigen::MatrixXd attended;               // attention output over eval
  std::vector<Eigen::MatrixXd> pre;       // fnn pre-activations
};

}  // namespace detail

struct ForwardCache {
  TokenWindow x;                          // input slice actually read
  std::vector<detail::BlockCache> blocks;
  Eigen::MatrixXd raw;                    // output before clipping
  Eigen::MatrixXd out;
};

/// Forward pass over `eval` keeping everything backward needs.
inline ForwardCache forward_cached(const DenseModel& m, const TokenWindow& x, IndexRange eval) {
  long remaining = m.receptive_radius();
  ForwardCache c;
  c.x = x.slice(eval.first - remaining, eval.last + remaining);
  if (c.x.dim() != m.E.cols()) throw UsageError("model expects tokens of dimension " + std::to_string(m.E.cols()));
  Eigen::MatrixXd z0 = m.E * c.x.data();
  for (Eigen::Index j = 0; j < z0.cols(); ++j) {
    auto col = z0.col(j);
    m.pe.add_to(col, c.x.offset() + static_cast<long>(j));
  }
  TokenWindow z(c.x.offset(), std::move(z0));
  for (const auto& b : m.blocks) {
    remaining -= b.window;
    detail::BlockCache bc;
    bc.eval = eval.widened(remaining, remaining);
    bc.in = std::move(z);
    const long w = 2L * b.window + 1;
    const auto& ctx = bc.in.data();
    const auto zq = ctx.middleCols(bc.in.local(bc.eval.first), bc.eval.size());
    bc.attended = zq;
    for (const auto& h : b.heads) {
      detail::HeadCache hc;
      hc.keys = h.K * ctx;
      hc.queries = h.Q * zq;
      hc.values = h.V * ctx;
      const Eigen::Index base = bc.in.local(bc.eval.first) - b.window;
      for (Eigen::Index j = 0; j < bc.eval.size(); ++j) {
        Eigen::VectorXd a = softmax(hc.keys.middleCols(base + j, w).transpose() * hc.queries.col(j));
        bc.attended.col(j).noalias() += hc.values.middleCols(base + j, w) * a;
        hc.weights.push_back(std::move(a));
      }
      bc.heads.push_back(std::move(hc));
    }
    Eigen::MatrixXd h = bc.attended;
    for (std::size_t l = 0; l < b.fnn.size(); ++l) {
      if (l > 0) h = h.cwiseMax(0.0);
      Eigen::MatrixXd pre = b.fnn[l].W * h;
      pre.colwise() += b.fnn[l].b;
      bc.pre.push_back(pre);
      h = std::move(pre);
    }
    z = TokenWindow(bc.eval.first, std::move(h));
    c.blocks.push_back(std::move(bc));
  }
  c.raw = std::move(z.data());
  c.out = m.clip ? clip_values(c.raw, *m.clip) : c.raw;
  return c;
}

inline Eigen::MatrixXd dense_forward(const DenseModel& m, const TokenWindow& x, IndexRange eval) {
  return forward_cached(m, x, eval).out;
}

/// Accumulates d<dout, F(X)>/dtheta into grad.
inline void backward(const DenseModel& m, const ForwardCache& c, Eigen::MatrixXd dout, DenseModel& grad) {
  if (m.clip)
    for (Eigen::Index i = 0; i < dout.size(); ++i)
      if (!(std::abs(c.raw.data()[i]) < *m.clip)) dout.data()[i] = 0.0;
  Eigen::MatrixXd dz = std::move(dout);
  for (std::size_t bi = m.blocks.size(); bi-- > 0;) {
    const auto& b = m.blocks[bi];
    const auto& bc = c.blocks[bi];
    auto& gb = grad.blocks[bi];
    for (std::size_t l = b.fnn.size(); l-- > 0;) {
      const Eigen::MatrixXd input = l == 0 ? bc.attended : Eigen::MatrixXd(bc.pre[l - 1].cwiseMax(0.0));
      gb.fnn[l].W.noalias() += dz * input.transpose();
      gb.fnn[l].b += dz.rowwise().sum();
      Eigen::MatrixXd din = b.fnn[l].W.transpose() * dz;
      if (l > 0) din = din.cwiseProduct((bc.pre[l - 1].array() > 0.0).cast<double>().matrix());
      dz = std::move(din);
    }
    // dz is now d/d(attended) over bc.eval.
    const auto& ctx = bc.in.data();
    const Eigen::Index q0 = bc.in.local(bc.eval.first);
    const Eigen::Index base = q0 - b.window;
    const long w = 2L * b.window + 1;
    Eigen::MatrixXd dctx = Eigen::MatrixXd::Zero(ctx.rows(), ctx.cols());
    dctx.middleCols(q0, bc.eval.size()) += dz;  // residual
    for (std::size_t hi = 0; hi < b.heads.size(); ++hi) {
      const auto& h = b.heads[hi];
      const auto& hc = bc.heads[hi];
      Eigen::MatrixXd dkeys = Eigen::MatrixXd::Zero(hc.keys.rows(), hc.keys.cols());
      Eigen::MatrixXd dvalues = Eigen::MatrixXd::Zero(hc.values.rows(), hc.values.cols());
      Eigen::MatrixXd dqueries(hc.queries.rows(), hc.queries.cols());
      for (Eigen::Index j = 0; j < bc.eval.size(); ++j) {
        const Eigen::VectorXd& a = hc.weights[static_cast<std::size_t>(j)];
        const auto g = dz.col(j);
        dvalues.middleCols(base + j, w).noalias() += g * a.transpose();
        const Eigen::VectorXd da = hc.values.middleCols(base + j, w).transpose() * g;
        const Eigen::VectorXd ds = a.cwiseProduct((da.array() - a.dot(da)).matrix());
        dqueries.col(j).noalias() = hc.keys.middleCols(base + j, w) * ds;
        dkeys.middleCols(base + j, w).noalias() += hc.queries.col(j) * ds.transpose();
      }
      auto& gh = gb.heads[hi];
      gh.V.noalias() += dvalues * ctx.transpose();
      gh.K.noalias() += dkeys * ctx.transpose();
      gh.Q.noalias() += dqueries * ctx.middleCols(q0, bc.eval.size()).transpose();
      dctx.noalias() += h.V.transpose() * dvalues + h.K.transpose() * dkeys;
      dctx.middleCols(q0, bc.eval.size()).noalias() += h.Q.transpose() * dqueries;
    }
    dz = std::move(dctx);
  }
  grad.E.noalias() += dz * c.x.data().transpose();
}

/// Sign pattern of every ReLU pre-activation and clip test; finite
/// differences are only meaningful when it is the same on both sides.
inline std::vector<bool> activation_pattern(const DenseModel& m, const ForwardCache& c) {
  std::vector<bool> p;
  for (const auto& bc : c.blocks)
    for (std::size_t l = 0; l + 1 < bc.pre.size(); ++l)
      for (Eigen::Index i = 0; i < bc.pre[l].size(); ++i) p.push_back(bc.pre[l].data()[i] > 0.0);
  if (m.clip)
    for (Eigen::Index i = 0; i < c.raw.size(); ++i) p.push_back(std::abs(c.raw.data()[i]) < *m.clip);
  return p;
}

/// Squared loss sum_t sum_j (F(X^t)_j - Y^t_j)^2 / (n * outputs) over a set of
/// sample indices, with its gradient accumulated into `grad` when given.
struct LossBatch {
  const std::vector<TokenWindow>* inputs;
  const std::vector<Eigen::VectorXd>* outputs;
  IndexRange output_range;
};

inline double squared_loss(const DenseModel& m, const LossBatch& batch, const std::vector<long>& idx,
                           DenseModel* grad, std::vector<bool>* pattern = nullptr) {
  const double scale = 1.0 / (static_cast<double>(idx.size()) * static_cast<double>(batch.output_range.size()));
  double loss = 0.0;
  for (long t : idx) {
    const ForwardCache c = forward_cached(m, (*batch.inputs)[static_cast<std::size_t>(t)], batch.output_range);
    if (c.out.rows() != 1) throw UsageError("regression model must output a scalar per position");
    const Eigen::RowVectorXd r = c.out.row(0) - (*batch.outputs)[static_cast<std::size_t>(t)].transpose();
    loss += r.squaredNorm() * scale;
    if (grad) backward(m, c, 2.0 * scale * r, *grad);
    if (pattern) {
      auto p = activation_pattern(m, c);
      pattern->insert(pattern->end(), p.begin(), p.end());
    }
  }
  return loss;
}

struct GradientCheckEntry {
  ParamKind kind;
  long coordinate = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradientCheckResult {
  std::vector<GradientCheckEntry> entries;
  long skipped_at_kinks = 0;
  double max_rel_error = 0.0;
};

/// Central differences at h = rel_step * max(1, |theta_k|) on `per_kind`
/// random coordinates of each parameter kind present. Coordinates where the
/// ReLU/clip pattern differs between theta +- h are redrawn. The relative
/// error is |g - fd| / max(|g|, |fd|, floor * max(1, loss)): the floor keeps
/// vanishing gradients, where the difference quotient is pure rounding
/// (about eps * loss / h), from dominating the comparison.
inline GradientCheckResult gradient_check(const DenseModel& model, const LossBatch& batch, int per_kind,
                                          std::uint64_t seed, double rel_step = 1e-4, double floor = 1e-6) {
  std::vector<long> all(static_cast<std::size_t>(batch.inputs->size()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<long>(i);
  DenseModel grad = model.zeros_like();
  const double loss = squared_loss(model, batch, all, &grad);
  const double denom_floor = floor * std::max(1.0, loss);

  // Flat offsets of every tensor, grouped by kind.
  DenseModel probe = model;
  std::vector<std::pair<ParamKind, std::pair<double*, long>>> tensors;
  probe.for_each([&](ParamKind k, Eigen::Map<Eigen::VectorXd> v) { tensors.push_back({k, {v.data(), v.size()}}); });
  std::vector<std::pair<double*, long>> gtensors;
  grad.for_each([&](ParamKind, Eigen::Map<Eigen::VectorXd> v) { gtensors.push_back({v.data(), v.size()}); });

  GradientCheckResult res;
  Rng rng = make_rng(seed, {0x6c});
  for (ParamKind kind : {ParamKind::embedding, ParamKind::key, ParamKind::query, ParamKind::value,
                         ParamKind::fnn_weight, ParamKind::fnn_bias}) {
    std::vector<std::size_t> owners;
    long total = 0;
    for (std::size_t i = 0; i < tensors.size(); ++i)
      if (tensors[i].first == kind && tensors[i].second.second > 0) {
        owners.push_back(i);
        total += tensors[i].second.second;
      }
    if (total == 0) continue;
    int done = 0, attempts = 0;
    while (done < per_kind && attempts < 50 * per_kind) {
      ++attempts;
      long k = uniform_int(rng, 0, total - 1);
      std::size_t owner = owners.front();
      for (std::size_t o : owners) {
        if (k < tensors[o].second.second) {
          owner = o;
          break;
        }
        k -= tensors[o].second.second;
      }
      double* slot = tensors[owner].second.first + k;
      const double saved = *slot;
      const double h = rel_step * std::max(1.0, std::abs(saved));
      std::vector<bool> pp, pm;
      *slot = saved + h;
      const double fp = squared_loss(probe, batch, all, nullptr, &pp);
      *slot = saved - h;
      const double fm = squared_loss(probe, batch, all, nullptr, &pm);
      *slot = saved;
      if (pp != pm) {
        ++res.skipped_at_kinks;
        continue;
      }
      GradientCheckEntry e{kind, k, gtensors[owner].first[k], (fp - fm) / (2.0 * h), 0.0};
      e.rel_error = std::abs(e.analytic - e.numeric) / std::max({std::abs(e.analytic), std::abs(e.numeric), denom_floor});
      res.max_rel_error = std::max(res.max_rel_error, e.rel_error);
      res.entries.push_back(e);
      ++done;
    }
  }
  return res;
}

/// Random model with the given shape: entries N(0, scale^2 / fan_in).
struct ModelShape {
  int token_dim = 1;
  int embed_dim = 4;
  int key_dim = 4;
  std::vector<int> windows{1};
  int heads = 1;
  std::vector<int> hidden{8};  // fnn hidden widths; output is embed_dim except the last block's (1)
  double pe_phi = 0.0;         // 0: no positional encoding
  std::optional<double> clip;
};

inline DenseModel random_model(const ModelShape& s, Rng& rng, double scale = 1.0) {
  auto fill = [&](Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    const double sd = scale / std::sqrt(static_cast<double>(std::max<Eigen::Index>(c, 1)));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gaussian(rng, sd);
    return m;
  };
  DenseModel m;
  m.E = fill(s.embed_dim, s.token_dim);
  m.pe = s.pe_phi > 0 && s.embed_dim >= 2 ? PositionalEncoding::sinusoidal(s.embed_dim, s.pe_phi)
                                          : PositionalEncoding::zero(s.embed_dim);
  for (std::size_t bi = 0; bi < s.windows.size(); ++bi) {
    DenseBlock b;
    b.window = s.windows[bi];
    for (int h = 0; h < s.heads; ++h) b.heads.push_back({fill(s.key_dim, s.embed_dim), fill(s.key_dim, s.embed_dim),
                                                         fill(s.embed_dim, s.embed_dim)});
    const bool last = bi + 1 == s.windows.size();
    int in = s.embed_dim;
    std::vector<int> dims = s.hidden;
    dims.push_back(last ? 1 : s.embed_dim);
    for (int out : dims) {
      DenseLayer l{fill(out, in), Eigen::VectorXd(out)};
      for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b(i) = gaussian(rng, 0.1 * scale);
      b.fnn.push_back(std::move(l));
      in = out;
    }
    m.blocks.push_back(std::move(b));
  }
  m.clip = s.clip;
  return m;
}

}  // namespace swat
