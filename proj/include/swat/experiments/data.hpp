#pragma once

#include <Eigen/Dense>

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "swat/core/errors.hpp"
#include "swat/core/token_window.hpp"
#include "swat/space/target.hpp"
#include "swat/util/parallel.hpp"
#include "swat/util/rng.hpp"

namespace swat {

/// Shift-invariant token generator: fills a d x N window.
///  - uniform:      i.i.d. U[0,1] entries.
///  - ar_mixture:   per sequence pick component k with probability w_k; each
///                  channel follows a stationary Gaussian AR(1) z_j = rho_k
///                  z_{j-1} + sqrt(1 - rho_k^2) e_j started from N(0,1), and
///                  x = Phi(z). Marginals are U[0,1], the law is stationary.
struct TokenGenerator {
  std::string kind = "uniform";
  std::vector<double> rho{0.0};
  std::vector<double> weights{1.0};

  static TokenGenerator uniform() { return {}; }
  static TokenGenerator ar_mixture(std::vector<double> rho, std::vector<double> weights) {
    if (rho.empty() || rho.size() != weights.size()) throw UsageError("ar_mixture needs matching rho and weights");
    for (double r : rho)
      if (!(std::abs(r) < 1.0)) throw UsageError("ar_mixture needs |rho| < 1");
    return {"ar_mixture", std::move(rho), std::move(weights)};
  }

  TokenWindow operator()(Rng& rng, int d, IndexRange range) const {
    Eigen::MatrixXd x(d, range.size());
    if (kind == "uniform") {
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = swat::uniform(rng);
      return TokenWindow(range.first, std::move(x));
    }
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    const double r = rho[pick(rng)];
    const double s = std::sqrt(1.0 - r * r);
    static const boost::math::normal_distribution<double> phi;
    for (int c = 0; c < d; ++c) {
      double z = gaussian(rng);
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (j > 0) z = r * z + s * gaussian(rng);
        x(c, j) = boost::math::cdf(phi, z);
      }
    }
    return TokenWindow(range.first, std::move(x));
  }
};

/// F(X)_i for i in a range: a sequence-to-sequence map evaluated position-wise.
struct TargetFunction {
  std::string name;
  long reach = 0;  // F(X)_i reads X[i - reach, i + reach]
  std::function<double(const TokenWindow&, long)> at;

  static TargetFunction from_synthetic(const SyntheticTarget& f) {
    return {"synthetic", f.reach(), [f](const TokenWindow& x, long i) { return f.eval(x, i); }};
  }

  Eigen::VectorXd operator()(const TokenWindow& x, IndexRange out) const {
    Eigen::VectorXd y(out.size());
    for (long i = out.first; i <= out.last; ++i) y(i - out.first) = at(x, i);
    return y;
  }
};

/// Any model mapping an input window to outputs over `out`.
using Predictor = std::function<Eigen::VectorXd(const TokenWindow&, IndexRange)>;

struct RegressionDataset {
  std::vector<TokenWindow> inputs;
  std::vector<Eigen::VectorXd> outputs;  // Y over `output_range`
  IndexRange output_range{0, 0};
  IndexRange window{0, 0};
  double sigma = 0.0;
  std::string target;
  std::uint64_t seed = 0;

  long size() const noexcept { return static_cast<long>(inputs.size()); }
};

/// Y = F(X) + xi with xi ~ N(0, sigma^2) i.i.d. Sample t draws from
/// derive_seed(seed, {t}) so any prefix of the dataset is reproducible.
inline RegressionDataset generate_dataset(const TargetFunction& f, const TokenGenerator& gen, int d, long n,
                                          double sigma, IndexRange window, IndexRange output_range,
                                          std::uint64_t seed) {
  if (!window.contains(output_range.widened(f.reach, f.reach)))
    throw UsageError("dataset window does not cover the target's reach around the output range");
  RegressionDataset ds;
  ds.output_range = output_range;
  ds.window = window;
  ds.sigma = sigma;
  ds.target = f.name;
  ds.seed = seed;
  for (long t = 0; t < n; ++t) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(t)});
    TokenWindow x = gen(rng, d, window);
    Eigen::VectorXd y = f(x, output_range);
    if (sigma > 0)
      for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += gaussian(rng, sigma);
    ds.inputs.push_back(std::move(x));
    ds.outputs.push_back(std::move(y));
  }
  return ds;
}

/// (1 / (n (r - l + 1))) sum_i sum_j (F(X^i)_j - Y^i_j)^2.
inline double empirical_risk(const Predictor& F, const RegressionDataset& ds) {
  if (ds.inputs.empty()) throw UsageError("empirical risk of an empty dataset");
  double total = 0.0;
  for (long t = 0; t < ds.size(); ++t) {
    const Eigen::VectorXd p = F(ds.inputs[static_cast<std::size_t>(t)], ds.output_range);
    const Eigen::VectorXd& y = ds.outputs[static_cast<std::size_t>(t)];
    if (p.size() != y.size()) throw UsageError("prediction and target shapes differ");
    total += (p - y).squaredNorm();
  }
  return total / (static_cast<double>(ds.size()) * static_cast<double>(ds.output_range.size()));
}

struct RiskEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
};

/// Monte-Carlo R_{l,r}(F, F0) = (1/(r-l+1)) sum_i E ||F_i - F0_i||^2 with
/// per-sample averages over the output range as the i.i.d. draws.
inline RiskEstimate population_risk(const Predictor& F, const TargetFunction& F0, const TokenGenerator& gen, int d,
                                    IndexRange window, IndexRange output_range, long samples, std::uint64_t seed,
                                    int jobs = 1) {
  std::vector<double> per(static_cast<std::size_t>(samples));
  parallel_for(samples, jobs, [&](long t) {
    Rng rng = make_rng(seed, {0x9e15, static_cast<std::uint64_t>(t)});
    const TokenWindow x = gen(rng, d, window);
    per[static_cast<std::size_t>(t)] = (F(x, output_range) - F0(x, output_range)).squaredNorm() /
                                       static_cast<double>(output_range.size());
  });
  RiskEstimate r;
  double mean = 0.0, sq = 0.0;
  for (double v : per) mean += v;
  mean /= static_cast<double>(samples);
  for (double v : per) sq += (v - mean) * (v - mean);
  r.value = mean;
  r.stderr_ = samples > 1 ? std::sqrt(sq / static_cast<double>(samples - 1) / static_cast<double>(samples)) : 0.0;
  return r;
}

}  // namespace swat
