#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include "swat/core/errors.hpp"
#include "swat/core/fnn.hpp"
#include "swat/core/matrix.hpp"
#include "swat/space/target.hpp"

namespace swat {

/// f(x) = eta(x) - eta(-x) = x on all of R^dim; lies in Psi(2, 2 dim, 4 dim, 1).
inline FnnParams identity_fnn(Eigen::Index dim) {
  if (dim < 1) throw UsageError("identity_fnn needs dim >= 1");
  std::vector<Triplet> up, down;
  for (Eigen::Index i = 0; i < dim; ++i) {
    up.emplace_back(2 * i, i, 1.0);
    up.emplace_back(2 * i + 1, i, -1.0);
    down.emplace_back(i, 2 * i, 1.0);
    down.emplace_back(i, 2 * i + 1, -1.0);
  }
  FnnParams f;
  f.layers.push_back({sparse_from_triplets(2 * dim, dim, up), Eigen::VectorXd::Zero(2 * dim)});
  f.layers.push_back({sparse_from_triplets(dim, 2 * dim, down), Eigen::VectorXd::Zero(dim)});
  return f;
}

/// chi = U^2 log(2 H U (B'W)^L 2^T), evaluated in log space so that
/// 2 H U exp(-chi / U^2) (B'W)^L = 2^{-T}.
inline double chi_for(double U, double H, double lipschitz_product, double T) {
  if (U < 1 || H < 1 || lipschitz_product < 1 || T < 0)
    throw UsageError("chi_for: need U, H, Lipschitz product >= 1 and T >= 0");
  return U * U * (std::log(2.0 * H * U) + std::log(lipschitz_product) + T * std::numbers::ln2);
}

/// min_{1 <= m <= 2U} (1 - cos(m phi)): the score gap per unit of chi.
inline double measured_gap(int U, double phi) {
  double g = 2.0;
  for (int m = 1; m <= 2 * U; ++m) g = std::min(g, 1.0 - std::cos(m * phi));
  return g;
}

inline double window_angle(int U) { return 2.0 * std::numbers::pi / (2.0 * U + 1.0); }

/// Exact readout of a truncated series from extracted features: slot h of
/// the feature vector stands for coordinate coords[h].
class FeatureHead {
 public:
  FeatureHead(SyntheticTarget f, std::vector<Coord> coords) : f_(std::move(f)), coords_(std::move(coords)) {
    for (std::size_t h = 0; h < coords_.size(); ++h) slot_[coords_[h]] = static_cast<Eigen::Index>(h);
    for (const auto& c : f_.support())
      if (!slot_.contains(c)) throw UsageError("feature head: term reads " + to_string(c) + " which is not extracted");
  }

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& features) const {
    double v = 0.0;
    for (const auto& [r, c] : f_.coeffs) {
      double term = c;
      for (const auto& [coord, ri] : r) term *= psi_1d(ri, features(slot_.at(coord)));
      v += term;
    }
    return v;
  }

  const SyntheticTarget& target() const noexcept { return f_; }
  /// Sup-norm Lipschitz bound of the head, floored at 1 for use in chi.
  double lipschitz_product() const { return std::max(1.0, f_.lipschitz_bound()); }

 private:
  SyntheticTarget f_;
  std::vector<Coord> coords_;
  std::map<Coord, Eigen::Index> slot_;
};

}  // namespace swat
