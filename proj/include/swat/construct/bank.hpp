#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "swat/core/errors.hpp"
#include "swat/util/rng.hpp"

namespace swat {

/// l unit vectors in R^{d'} with entries +-1/sqrt(d') and pairwise
/// |<u_i, u_j>| <= epsilon; index i is read periodically (i mod l).
struct OrthonormalBank {
  std::vector<Eigen::VectorXd> vectors;
  double epsilon = 0.0;   // requested coherence
  double achieved = 0.0;  // max_{i != j} |<u_i, u_j>|
  int attempts = 0;

  Eigen::Index dim() const noexcept { return vectors.empty() ? 0 : vectors.front().size(); }
  long size() const noexcept { return static_cast<long>(vectors.size()); }
  const Eigen::VectorXd& at(long i) const {
    const long l = size();
    return vectors[static_cast<std::size_t>(((i % l) + l) % l)];
  }
};

/// d' = ceil(4 ln(2l) / eps^2).
inline Eigen::Index bank_dimension(long l, double epsilon) {
  if (l < 1) throw UsageError("bank needs at least one vector");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw UsageError("bank coherence must lie in (0, 1)");
  return static_cast<Eigen::Index>(std::ceil(4.0 * std::log(2.0 * static_cast<double>(l)) / (epsilon * epsilon)));
}

inline double max_coherence(const std::vector<Eigen::VectorXd>& u) {
  double worst = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = i + 1; j < u.size(); ++j) worst = std::max(worst, std::abs(u[i].dot(u[j])));
  return worst;
}

/// One Rademacher draw at the Lemma A.3 dimension; nullopt if it is too coherent.
inline std::optional<OrthonormalBank> try_sample_bank(long l, double epsilon, std::uint64_t seed) {
  const Eigen::Index dim = bank_dimension(l, epsilon);
  Rng rng = make_rng(seed, {0xba4c});
  std::bernoulli_distribution coin(0.5);
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  OrthonormalBank bank;
  bank.epsilon = epsilon;
  bank.attempts = 1;
  for (long i = 0; i < l; ++i) {
    Eigen::VectorXd u(dim);
    for (Eigen::Index q = 0; q < dim; ++q) u(q) = coin(rng) ? s : -s;
    bank.vectors.push_back(std::move(u));
  }
  bank.achieved = max_coherence(bank.vectors);
  if (bank.achieved > epsilon) return std::nullopt;
  return bank;
}

/// Wholesale resampling until the coherence target is met.
inline OrthonormalBank sample_orthonormal_bank(long l, double epsilon, std::uint64_t seed, int max_retries = 20) {
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    if (auto bank = try_sample_bank(l, epsilon, derive_seed(seed, {static_cast<std::uint64_t>(attempt)}))) {
      bank->attempts = attempt + 1;
      return *std::move(bank);
    }
  }
  throw SamplingError("no bank with coherence <= " + std::to_string(epsilon) + " in " + std::to_string(max_retries) +
                          " draws",
                      0.0);
}

}  // namespace swat
