#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

#include "swat/construct/common.hpp"
#include "swat/core/transformer.hpp"
#include "swat/space/smoothness.hpp"

namespace swat {

/// Relative-position extraction: head h copies channel coords[h].channel
/// from relative offset coords[h].position into scratch slot d + h.
/// Layout of z^0: [x (d) | scratch (H) | cos | sin].
struct ExtractionPlan {
  int d = 1;
  std::vector<Coord> coords;
  int U = 1;
  double chi = 0.0;
  double phi = 0.0;

  Eigen::Index heads() const noexcept { return static_cast<Eigen::Index>(coords.size()); }
  Eigen::Index embed_dim() const noexcept { return d + heads() + 2; }
  Eigen::Index scratch(Eigen::Index h) const noexcept { return d + h; }

  void validate() const {
    if (U < 0) throw UsageError("plan window must be non-negative");
    for (const auto& c : coords) {
      if (std::labs(c.position) > U)
        throw UsageError("plan coordinate " + to_string(c) + " lies outside the window U = " + std::to_string(U));
      if (c.channel < 0 || c.channel >= d) throw UsageError("plan coordinate " + to_string(c) + " has no such channel");
    }
  }
};

/// Plan for I(T, gamma): U is the largest offset (at least 1), phi = 2 pi / (2U+1)
/// and chi = chi_for(U, H, lipschitz_product, T).
inline ExtractionPlan make_extraction_plan(const SmoothnessSpec& spec, int d, double T, double lipschitz_product = 1.0) {
  const FeatureIndexSet fis = feature_index_set(spec, T);
  ExtractionPlan plan;
  plan.d = d;
  plan.coords = fis.coords;
  plan.U = static_cast<int>(std::max<long>(1, fis.max_offset()));
  plan.phi = window_angle(plan.U);
  plan.chi = chi_for(plan.U, std::max<double>(1.0, static_cast<double>(plan.heads())), lipschitz_product, T);
  plan.validate();
  return plan;
}

/// Enc_P followed by a single attention block (identity FNN, i.e. no layers).
/// K_h reads (cos, sin); Q_h = chi * rotation(j_h phi) on (cos, sin);
/// V_h = delta_{d+h, i_h}.
inline TransformerParams build_theorem1_network(const ExtractionPlan& plan) {
  plan.validate();
  const Eigen::Index D = plan.embed_dim();
  TransformerParams t;
  t.embedding.matrix = sparse_identity_block(D, plan.d, 0, 0, plan.d);
  t.embedding.pe = PositionalEncoding::sinusoidal(D, plan.phi);
  TransformerBlock block;
  block.attention.window = plan.U;
  block.attention.embed_dim = D;
  for (Eigen::Index h = 0; h < plan.heads(); ++h) {
    const auto& c = plan.coords[static_cast<std::size_t>(h)];
    const double a = static_cast<double>(c.position) * plan.phi;
    AttentionHead head;
    head.key = sparse_from_triplets(2, D, {{0, D - 2, 1.0}, {1, D - 1, 1.0}});
    head.query = sparse_from_triplets(2, D,
                                      {{0, D - 2, plan.chi * std::cos(a)},
                                       {0, D - 1, -plan.chi * std::sin(a)},
                                       {1, D - 2, plan.chi * std::sin(a)},
                                       {1, D - 1, plan.chi * std::cos(a)}});
    head.value = sparse_from_triplets(D, D, {{plan.scratch(h), c.channel, 1.0}});
    block.attention.heads.push_back(std::move(head));
  }
  t.blocks.push_back(std::move(block));
  t.validate();
  return t;
}

/// z~_j = z^0_j + sum_h V_h z^0_{j + j_h}: the hardmax reference token.
inline Eigen::VectorXd hard_extract_oracle(const ExtractionPlan& plan, const TokenWindow& x, long j) {
  const Eigen::Index D = plan.embed_dim();
  Eigen::VectorXd z = Eigen::VectorXd::Zero(D);
  z.head(plan.d) = x.token(j);
  z(D - 2) = std::cos(static_cast<double>(j) * plan.phi);
  z(D - 1) = std::sin(static_cast<double>(j) * plan.phi);
  for (Eigen::Index h = 0; h < plan.heads(); ++h) {
    const auto& c = plan.coords[static_cast<std::size_t>(h)];
    z(plan.scratch(h)) = x.at(c.channel, j + c.position);
  }
  return z;
}

/// Softmax-vs-hardmax comparison over an evaluation range.
struct ExtractionCheck {
  double deviation = 0.0;  // max_j ||z^1_j - z~_j||_inf
  double bound = 0.0;      // 2 H U exp(-chi * gap)
  double paper_bound = 0.0;  // 2 H U exp(-chi / U^2)
  double fp_floor = 0.0;   // rounding allowance of the forward pass
  double gap = 0.0;        // measured min (1 - cos(m phi))
  bool gap_claim_holds = false;  // gap >= 1 / U^2
  Eigen::MatrixXd state;   // z^1 on the range

  bool pass() const { return deviation <= std::max(bound, fp_floor); }
};

inline ExtractionCheck check_extraction(const ExtractionPlan& plan, const TransformerParams& net,
                                        const TokenWindow& x, IndexRange eval) {
  ExtractionCheck out;
  out.gap = measured_gap(plan.U, plan.phi);
  out.gap_claim_holds = out.gap >= 1.0 / (static_cast<double>(plan.U) * plan.U);
  const double h = static_cast<double>(plan.heads());
  out.bound = 2.0 * h * plan.U * std::exp(-plan.chi * out.gap);
  out.paper_bound = 2.0 * h * plan.U * std::exp(-plan.chi / (static_cast<double>(plan.U) * plan.U));
  const double scale = std::max(1.0, x.data().cwiseAbs().maxCoeff());
  out.fp_floor = 4.0 * std::numeric_limits<double>::epsilon() * (2.0 * plan.U + 1.0) * scale;
  out.state = transformer_forward(net, x, eval);
  for (long j = eval.first; j <= eval.last; ++j) {
    const Eigen::VectorXd ref = hard_extract_oracle(plan, x, j);
    out.deviation = std::max(out.deviation, (out.state.col(j - eval.first) - ref).cwiseAbs().maxCoeff());
  }
  return out;
}

/// F^_j(X) = f_T(C z^1_j) with an exact truncated-series head.
inline Eigen::VectorXd theorem1_readout(const ExtractionPlan& plan, const Eigen::MatrixXd& state,
                                        const FeatureHead& head) {
  Eigen::VectorXd out(state.cols());
  for (Eigen::Index c = 0; c < state.cols(); ++c) out(c) = head(state.col(c).segment(plan.d, plan.heads()));
  return out;
}

}  // namespace swat
