#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "swat/core/attention.hpp"
#include "swat/core/embedding.hpp"
#include "swat/core/errors.hpp"
#include "swat/core/fnn.hpp"
#include "swat/core/token_window.hpp"

namespace swat {

struct TransformerBlock {
  AttentionParams attention;
  FnnParams fnn;
};

/// F = f_M o g_M o ... o f_1 o g_1 o Enc_P, optionally followed by clip_R.
struct TransformerParams {
  EmbeddingParams embedding;
  std::vector<TransformerBlock> blocks;
  std::optional<double> clip;

  int layer_count() const noexcept { return static_cast<int>(blocks.size()); }

  /// Sum of the attention windows: how far the output at i can see.
  long receptive_radius() const noexcept {
    long r = 0;
    for (const auto& b : blocks) r += b.attention.window;
    return r;
  }

  Eigen::Index output_dim() const noexcept {
    for (auto it = blocks.rbegin(); it != blocks.rend(); ++it)
      if (!it->fnn.layers.empty()) return it->fnn.output_dim();
    return blocks.empty() ? embedding.embed_dim() : blocks.back().attention.embed_dim;
  }

  void validate() const {
    embedding.validate();
    Eigen::Index dim = embedding.embed_dim();
    for (std::size_t m = 0; m < blocks.size(); ++m) {
      const auto& b = blocks[m];
      b.attention.validate();
      b.fnn.validate();
      const std::string tag = "block " + std::to_string(m);
      if (b.attention.embed_dim != dim) throw UsageError(tag + ": attention dimension does not chain");
      if (!b.fnn.layers.empty()) {
        if (b.fnn.input_dim() != dim) throw UsageError(tag + ": fnn input dimension does not chain");
        dim = b.fnn.output_dim();
      }
    }
    if (clip && !(*clip > 0.0)) throw UsageError("clip radius must be positive");
  }
};

inline Eigen::MatrixXd clip_values(Eigen::MatrixXd z, double r) { return z.cwiseMax(-r).cwiseMin(r); }

/// Runs blocks [first, last) on an already embedded window. Each block
/// consumes its attention window on both sides of `eval_widened`.
inline TokenWindow run_blocks(const TransformerParams& t, TokenWindow z, IndexRange eval, std::size_t first,
                              std::size_t last) {
  long remaining = 0;
  for (std::size_t m = first; m < last; ++m) remaining += t.blocks[m].attention.window;
  for (std::size_t m = first; m < last; ++m) {
    const auto& b = t.blocks[m];
    remaining -= b.attention.window;
    TokenWindow a = attention_forward(b.attention, z, eval.widened(remaining, remaining));
    z = TokenWindow(a.offset(), fnn_forward_columns(b.fnn, a.data()));
  }
  return z;
}

namespace detail {

inline void require_context(const TransformerParams& t, const TokenWindow& x, IndexRange eval) {
  const long r = t.receptive_radius();
  const IndexRange need = eval.widened(r, r);
  if (!x.range().contains(need)) {
    const long left = need.first < x.first() ? x.first() - need.first : 0;
    const long right = need.last > x.last() ? need.last - x.last() : 0;
    throw BoundaryError("transformer_forward: input needs " + std::to_string(left) + " more token(s) on the left and " +
                            std::to_string(right) + " on the right",
                        left, right);
  }
}

}  // namespace detail

/// Columns of the result correspond to eval.first .. eval.last.
inline Eigen::MatrixXd transformer_forward(const TransformerParams& t, const TokenWindow& x, IndexRange eval) {
  detail::require_context(t, x, eval);
  const long r = t.receptive_radius();
  TokenWindow z = embed(t.embedding, x.slice(eval.first - r, eval.last + r));
  z = run_blocks(t, std::move(z), eval, 0, t.blocks.size());
  if (t.clip) return clip_values(std::move(z.data()), *t.clip);
  return std::move(z.data());
}

/// Every intermediate state: trace[0] = Enc_P(X), trace[2m+1] after g_{m+1},
/// trace[2m+2] after f_{m+1}. Each state is restricted to the range the
/// remaining blocks still need.
inline std::vector<TokenWindow> transformer_trace(const TransformerParams& t, const TokenWindow& x,
                                                  IndexRange eval) {
  detail::require_context(t, x, eval);
  long remaining = t.receptive_radius();
  std::vector<TokenWindow> trace;
  trace.push_back(embed(t.embedding, x.slice(eval.first - remaining, eval.last + remaining)));
  for (const auto& b : t.blocks) {
    remaining -= b.attention.window;
    trace.push_back(attention_forward(b.attention, trace.back(), eval.widened(remaining, remaining)));
    const TokenWindow& a = trace.back();
    trace.emplace_back(a.offset(), fnn_forward_columns(b.fnn, a.data()));
  }
  return trace;
}

}  // namespace swat
