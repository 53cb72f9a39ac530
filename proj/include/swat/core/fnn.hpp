#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <string>
#include <vector>

#include "swat/core/errors.hpp"
#include "swat/core/matrix.hpp"

namespace swat {

struct AffineLayer {
  SparseMatrix weight;
  Eigen::VectorXd bias;
};

/// Position-wise ReLU network
///   f(x) = (A_L relu(.) + b_L) o ... o (A_1 x + b_1).
/// ReLU sits between affine maps only; the last affine map is not rectified.
/// A network with no layers is the identity.
struct FnnParams {
  std::vector<AffineLayer> layers;

  int depth() const noexcept { return static_cast<int>(layers.size()); }
  Eigen::Index input_dim() const noexcept { return layers.empty() ? 0 : layers.front().weight.cols(); }
  Eigen::Index output_dim() const noexcept { return layers.empty() ? 0 : layers.back().weight.rows(); }

  /// max_i d_i over all layer dimensions including the input.
  Eigen::Index width() const noexcept {
    Eigen::Index w = input_dim();
    for (const auto& l : layers) w = std::max(w, l.weight.rows());
    return w;
  }

  void validate() const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.bias.size() != l.weight.rows())
        throw UsageError("fnn layer " + std::to_string(i) + ": bias length does not match weight rows");
      if (i > 0 && l.weight.cols() != layers[i - 1].weight.rows())
        throw UsageError("fnn layer " + std::to_string(i) + ": input dimension does not chain");
      if (!all_finite(l.weight) || !l.bias.allFinite())
        throw UsageError("fnn layer " + std::to_string(i) + ": non-finite entries");
    }
  }
};

inline Eigen::VectorXd fnn_forward(const FnnParams& f, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (f.layers.empty()) return x;
  if (x.size() != f.input_dim())
    throw UsageError("fnn_forward: input has dimension " + std::to_string(x.size()) + ", expected " +
                     std::to_string(f.input_dim()));
  Eigen::VectorXd h = x;
  for (std::size_t i = 0; i < f.layers.size(); ++i) {
    if (i > 0) h = h.cwiseMax(0.0);
    h = f.layers[i].weight * h + f.layers[i].bias;
  }
  return h;
}

/// Applies f to every column of `tokens`.
inline Eigen::MatrixXd fnn_forward_columns(const FnnParams& f, const Eigen::MatrixXd& tokens) {
  if (f.layers.empty()) return tokens;
  if (tokens.rows() != f.input_dim())
    throw UsageError("fnn_forward: token dimension " + std::to_string(tokens.rows()) + ", expected " +
                     std::to_string(f.input_dim()));
  Eigen::MatrixXd h = tokens;
  for (std::size_t i = 0; i < f.layers.size(); ++i) {
    if (i > 0) h = h.cwiseMax(0.0);
    Eigen::MatrixXd next = f.layers[i].weight * h;
    next.colwise() += f.layers[i].bias;
    h = std::move(next);
  }
  return h;
}

}  // namespace swat
