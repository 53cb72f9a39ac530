#pragma once

#include <bit>
#include <cmath>
#include <compare>
#include <cstdlib>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "swat/core/errors.hpp"
#include "swat/core/token_window.hpp"

namespace swat {

/// Coordinate (i, j) of a d x infinity input: channel i (0-based row) and
/// position j. Ordered by (position, channel), the canonical order used for
/// Gamma and for every scratch layout built from it.
struct Coord {
  int channel = 0;
  long position = 0;

  friend auto operator<=>(const Coord& a, const Coord& b) {
    if (auto c = a.position <=> b.position; c != 0) return c;
    return a.channel <=> b.channel;
  }
  friend bool operator==(const Coord&, const Coord&) = default;

  Coord shifted(long j) const noexcept { return {channel, position + j}; }
};

inline std::string to_string(const Coord& c) {
  return "(" + std::to_string(c.channel) + "," + std::to_string(c.position) + ")";
}

/// r in Z_0^{d x infinity} with finite support; stored entries are nonzero.
using FreqIndex = std::map<Coord, long>;
/// s in N_0^{d x infinity} with finite support; stored entries are >= 1.
using DyadicIndex = std::map<Coord, int>;

/// The unique s >= 0 with floor(2^{s-1}) <= |r| < 2^s.
inline int dyadic_level(long r) noexcept {
  return static_cast<int>(std::bit_width(static_cast<unsigned long>(std::labs(r))));
}

inline DyadicIndex dyadic_block_of(const FreqIndex& r) {
  DyadicIndex s;
  for (const auto& [c, v] : r)
    if (v != 0) s.emplace(c, dyadic_level(v));
  return s;
}

/// sum_ij s_ij, so that 2^s = 2^{total_level(s)}.
inline long total_level(const DyadicIndex& s) {
  long n = 0;
  for (const auto& [c, v] : s) n += v;
  return n;
}

/// One-dimensional basis: sqrt2 cos(2 pi |r| x) for r < 0, 1 for r = 0,
/// sqrt2 sin(2 pi |r| x) for r > 0.
inline double psi_1d(long r, double x) noexcept {
  if (r == 0) return 1.0;
  const double t = 2.0 * std::numbers::pi * static_cast<double>(std::labs(r)) * x;
  return std::numbers::sqrt2 * (r < 0 ? std::cos(t) : std::sin(t));
}

inline double psi_1d_derivative(long r, double x) noexcept {
  if (r == 0) return 0.0;
  const double w = 2.0 * std::numbers::pi * static_cast<double>(std::labs(r));
  return std::numbers::sqrt2 * w * (r < 0 ? -std::sin(w * x) : std::cos(w * x));
}

/// psi_r(Sigma_k X): the product over the support of r, read relative to
/// position k. The empty product is 1.
inline double psi_eval(const FreqIndex& r, const TokenWindow& x, long k = 0) {
  double v = 1.0;
  for (const auto& [c, ri] : r) {
    if (c.channel < 0 || c.channel >= x.dim())
      throw UsageError("psi_eval: channel " + std::to_string(c.channel) + " outside the token dimension");
    v *= psi_1d(ri, x.at(c.channel, k + c.position));
  }
  return v;
}

/// Gamma(Sigma_k X) = [X_{i_1, k + j_1}, ...] in the order of `coords`.
inline Eigen::VectorXd gamma_extractor(const std::vector<Coord>& coords, const TokenWindow& x, long k = 0) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(coords.size()));
  for (std::size_t h = 0; h < coords.size(); ++h) {
    const Coord& c = coords[h];
    if (c.channel < 0 || c.channel >= x.dim()) throw UsageError("gamma_extractor: channel out of range");
    out(static_cast<Eigen::Index>(h)) = x.at(c.channel, k + c.position);
  }
  return out;
}

}  // namespace swat
