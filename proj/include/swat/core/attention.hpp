#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "swat/core/errors.hpp"
#include "swat/core/matrix.hpp"
#include "swat/core/token_window.hpp"

namespace swat {

/// Softmax with max-subtraction; safe for logits in the thousands.
inline Eigen::VectorXd softmax(const Eigen::Ref<const Eigen::VectorXd>& logits) {
  if (logits.size() == 0) throw UsageError("softmax of an empty vector");
  if (!logits.allFinite()) throw UsageError("softmax of non-finite logits");
  Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

struct AttentionHead {
  SparseMatrix key;    // D' x D
  SparseMatrix query;  // D' x D
  SparseMatrix value;  // D x D
};

/// Sliding-window multi-head self-attention with residual:
///   g(X)_i = x_i + sum_h V_h X[i-U:i+U] softmax((K_h X[i-U:i+U])^T (Q_h x_i)).
struct AttentionParams {
  int window = 0;
  Eigen::Index embed_dim = 0;
  std::vector<AttentionHead> heads;

  int head_count() const noexcept { return static_cast<int>(heads.size()); }

  void validate() const {
    if (window < 0) throw UsageError("attention window must be non-negative");
    for (std::size_t h = 0; h < heads.size(); ++h) {
      const auto& hd = heads[h];
      const std::string tag = "attention head " + std::to_string(h);
      if (hd.key.cols() != embed_dim || hd.query.cols() != embed_dim)
        throw UsageError(tag + ": key/query must have D columns");
      if (hd.key.rows() != hd.query.rows()) throw UsageError(tag + ": key and query row counts differ");
      if (hd.key.rows() > embed_dim) throw UsageError(tag + ": D' exceeds D");
      if (hd.value.rows() != embed_dim || hd.value.cols() != embed_dim)
        throw UsageError(tag + ": value must be D x D");
      if (!all_finite(hd.key) || !all_finite(hd.query) || !all_finite(hd.value))
        throw UsageError(tag + ": non-finite entries");
    }
  }
};

namespace detail {

inline void require_window(const TokenWindow& z, IndexRange needed, const char* what) {
  if (!z.range().contains(needed)) {
    throw BoundaryError(what, needed.first < z.first() ? z.first() - needed.first : 0,
                        needed.last > z.last() ? needed.last - z.last() : 0);
  }
}

}  // namespace detail

/// Attention logits of one head at position i over [i-U, i+U].
inline Eigen::VectorXd attention_scores(const AttentionHead& head, const TokenWindow& z, long i,
                                        int window) {
  detail::require_window(z, IndexRange{i - window, i + window}, "attention window incomplete");
  Eigen::MatrixXd keys = head.key * z.data().middleCols(z.local(i - window), 2 * window + 1);
  Eigen::VectorXd q = head.query * z.token(i);
  return keys.transpose() * q;
}

inline Eigen::VectorXd attention_weights(const AttentionHead& head, const TokenWindow& z, long i,
                                         int window) {
  return softmax(attention_scores(head, z, i, window));
}

/// Evaluates g on `eval`. Every requested output needs its complete window;
/// there is no implicit padding.
inline TokenWindow attention_forward(const AttentionParams& g, const TokenWindow& z, IndexRange eval) {
  if (z.dim() != g.embed_dim)
    throw UsageError("attention_forward: token dimension " + std::to_string(z.dim()) + ", expected " +
                     std::to_string(g.embed_dim));
  if (eval.empty()) return TokenWindow::zeros(z.dim(), eval);
  const int u = g.window;
  const IndexRange ctx = eval.widened(u, u);
  detail::require_window(z, ctx, "attention_forward: incomplete window");

  const auto ctx_cols = z.data().middleCols(z.local(ctx.first), ctx.size());
  Eigen::MatrixXd out = z.data().middleCols(z.local(eval.first), eval.size());
  const long w = 2L * u + 1;
  for (const auto& head : g.heads) {
    const Eigen::MatrixXd keys = head.key * ctx_cols;
    const Eigen::MatrixXd queries = head.query * z.data().middleCols(z.local(eval.first), eval.size());
    const Eigen::MatrixXd values = head.value * ctx_cols;
    for (long c = 0; c < eval.size(); ++c) {
      // Local column c of eval sits at ctx column c + u; its window starts at c.
      const Eigen::VectorXd a = softmax(keys.middleCols(c, w).transpose() * queries.col(c));
      out.col(c).noalias() += values.middleCols(c, w) * a;
    }
  }
  return TokenWindow(eval.first, std::move(out));
}

}  // namespace swat
