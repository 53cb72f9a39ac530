#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "swat/space/importance.hpp"
#include "swat/space/target.hpp"

using namespace swat;

namespace {

TokenWindow random_window(Rng& rng, Eigen::Index d, long first, long last) {
  Eigen::MatrixXd m(d, last - first + 1);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng);
  return TokenWindow(first, m);
}

SmoothnessSpec mixed(SmoothnessRule rule) { return {SmoothnessKind::mixed, std::move(rule)}; }
SmoothnessSpec aniso(SmoothnessRule rule) { return {SmoothnessKind::anisotropic, std::move(rule)}; }

// Independent oracle for feature_index_set: scan the whole box
// prod_c [0, floor(T / a_c)] and filter by gamma(s) < T written out directly.
struct BoxOracle {
  std::size_t d_max = 0;
  int f_max = 0;
  double G = 0.0;
  std::size_t count = 0;
};

BoxOracle box_oracle(SmoothnessKind kind, const std::vector<double>& a, double T) {
  BoxOracle out;
  if (T <= 0) return out;
  std::vector<int> hi;
  for (double v : a) hi.push_back(static_cast<int>(std::floor(T / v)));
  std::vector<int> s(a.size(), 0);
  std::vector<bool> used(a.size(), false);
  while (true) {
    double g = 0.0;
    long level = 0;
    for (std::size_t c = 0; c < a.size(); ++c) {
      g = kind == SmoothnessKind::mixed ? g + a[c] * s[c] : std::max(g, a[c] * s[c]);
      level += s[c];
    }
    if (g < T) {
      ++out.count;
      out.G += std::pow(2.0, static_cast<double>(level));
      for (std::size_t c = 0; c < a.size(); ++c) {
        out.f_max = std::max(out.f_max, s[c]);
        if (s[c]) used[c] = true;
      }
    }
    std::size_t c = 0;
    while (c < a.size() && s[c] == hi[c]) s[c++] = 0;
    if (c == a.size()) break;
    ++s[c];
  }
  for (bool u : used) out.d_max += u;
  return out;
}

}  // namespace

TEST(Dyadic, ExamplesFromTheInequality) {
  EXPECT_TRUE(dyadic_block_of(FreqIndex{}).empty());
  EXPECT_EQ(dyadic_level(0), 0);
  EXPECT_EQ(dyadic_level(1), 1);
  EXPECT_EQ(dyadic_level(-1), 1);
  EXPECT_EQ(dyadic_level(3), 2);
  EXPECT_EQ(dyadic_level(-4), 3);
  const DyadicIndex s = dyadic_block_of({{{0, 0}, -3}, {{0, 2}, 1}});
  EXPECT_EQ(s, (DyadicIndex{{{0, 0}, 2}, {{0, 2}, 1}}));
}

TEST(Dyadic, ExhaustivePartitionUpTo2To16) {
  for (long r = -(1L << 16); r <= (1L << 16); ++r) {
    int hits = 0, found = -1;
    for (int s = 0; s <= 20; ++s) {
      const long lo = static_cast<long>(std::floor(std::pow(2.0, s - 1)));
      const long hi = 1L << s;
      if (lo <= std::labs(r) && std::labs(r) < hi) {
        ++hits;
        found = s;
      }
    }
    ASSERT_EQ(hits, 1) << r;
    ASSERT_EQ(dyadic_level(r), found) << r;
  }
}

TEST(Psi, EmptySupportIsOne) {
  Rng rng(1);
  EXPECT_EQ(psi_eval({}, random_window(rng, 2, -3, 3)), 1.0);
}

TEST(Psi, CosineBranchAtZero) {
  const TokenWindow x(0, Eigen::MatrixXd::Zero(1, 1));
  EXPECT_DOUBLE_EQ(psi_eval({{{0, 0}, -1}}, x), std::numbers::sqrt2);
  EXPECT_DOUBLE_EQ(psi_eval({{{0, 0}, 1}}, x), 0.0);
}

TEST(Psi, OrthonormalUnderMidpointQuadrature) {
  // Midpoint rule with N nodes integrates trigonometric polynomials of degree
  // < N exactly; frequencies here stay below 8 per coordinate.
  const int n = 32;
  std::vector<FreqIndex> basis;
  for (long r1 = -2; r1 <= 2; ++r1)
    for (long r2 = -1; r2 <= 1; ++r2) {
      FreqIndex r;
      if (r1) r[{0, 0}] = r1;
      if (r2) r[{0, 1}] = r2;
      basis.push_back(r);
    }
  TokenWindow x(0, Eigen::MatrixXd::Zero(1, 2));
  for (std::size_t a = 0; a < basis.size(); ++a)
    for (std::size_t b = a; b < basis.size(); ++b) {
      double ip = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          x.data()(0, 0) = (i + 0.5) / n;
          x.data()(0, 1) = (j + 0.5) / n;
          ip += psi_eval(basis[a], x) * psi_eval(basis[b], x);
        }
      ip /= n * n;
      EXPECT_NEAR(ip, a == b ? 1.0 : 0.0, 1e-2);
    }
}

TEST(Psi, OutsideWindowIsBoundaryError) {
  const TokenWindow x(0, Eigen::MatrixXd::Zero(1, 3));
  EXPECT_THROW(psi_eval({{{0, 5}, 1}}, x), BoundaryError);
}

TEST(Gamma, Examples) {
  const auto rule = SmoothnessRule::table(1, {{{0, 0}, 1.0}, {{0, 1}, 2.0}});
  const DyadicIndex s{{{0, 0}, 2}, {{0, 1}, 1}};
  EXPECT_EQ(gamma_eval(mixed(rule), {}), 0.0);
  EXPECT_EQ(gamma_eval(aniso(rule), {}), 0.0);
  EXPECT_DOUBLE_EQ(gamma_eval(mixed(rule), s), 4.0);
  EXPECT_DOUBLE_EQ(gamma_eval(aniso(rule), s), 2.0);
}

TEST(Norm, SingleTermIsTwoToGamma) {
  const auto spec = mixed(SmoothnessRule::power({1.0}, 1.0));
  SyntheticTarget f{1, spec, {{{{{0, 0}, 3}, {{0, 1}, -1}}, 1.0}}};
  // s = (2 at j=0, 1 at j=1): gamma = 1*2 + 2*1 = 4.
  EXPECT_DOUBLE_EQ(smoothness_norm(f), 16.0);
  SyntheticTarget one{1, spec, {{FreqIndex{}, 1.0}}};
  EXPECT_DOUBLE_EQ(smoothness_norm(one), 1.0);
}

TEST(Norm, TwoTermsInOneBlock) {
  const auto spec = mixed(SmoothnessRule::power({1.0}, 1.0));
  const double c = 0.7;
  SyntheticTarget f{1, spec, {{{{{0, 0}, 2}}, c}, {{{{0, 0}, -3}}, c}}};
  EXPECT_DOUBLE_EQ(smoothness_norm(f), std::pow(2.0, 2.0) * std::sqrt(2 * c * c));
}

TEST(Norm, ExactRequiresPTwo) {
  auto spec = mixed(SmoothnessRule::power({1.0}, 1.0));
  spec.p = 4.0;
  EXPECT_THROW(smoothness_norm(SyntheticTarget{1, spec, {{FreqIndex{}, 1.0}}}), UsageError);
}

TEST(Norm, MonteCarloAgreesWithExact) {
  Rng rng(21);
  const auto spec = mixed(SmoothnessRule::power({1.0, 1.5}, 1.0));
  for (int trial = 0; trial < 5; ++trial) {
    const SyntheticTarget f = sample_target(spec, {6.0, 12, 1.0}, rng);
    const McEstimate mc = smoothness_norm_mc(f, 20000, 100 + trial);
    EXPECT_NEAR(mc.value, smoothness_norm(f), 3.0 * mc.stderr_ + 1e-12);
  }
}

TEST(Derived, FiniteRuleATilde) {
  const auto rule = SmoothnessRule::table(1, {{{0, 0}, 1.0}, {{0, 1}, 2.0}, {{0, -1}, 4.0}});
  const auto out = derived_smoothness(mixed(rule), 10);
  EXPECT_EQ(out.abar, (std::vector<double>{1, 2, 4}));
  EXPECT_NEAR(out.a_tilde_partial, 4.0 / 7.0, 1e-15);
  EXPECT_EQ(out.a_dagger, 1.0);
  EXPECT_NEAR(derived_smoothness(aniso(rule), 10).a_dagger, 4.0 / 7.0, 1e-15);
}

TEST(Derived, ConstantFiniteRule) {
  std::map<Coord, double> e;
  for (long j = 0; j < 6; ++j) e[{0, j}] = 1.0;
  EXPECT_NEAR(derived_smoothness(mixed(SmoothnessRule::table(1, e)), 50).a_tilde_partial, 1.0 / 6.0, 1e-15);
}

TEST(Derived, WeakNormOfLinearRule) {
  const auto spec = mixed(SmoothnessRule::power({1.0}, 1.0));
  const auto out = derived_smoothness(spec, 100, 1.0);
  ASSERT_EQ(out.abar.size(), 100u);
  // Brute force: a_j = |j|+1 over a wide range, sorted.
  std::vector<double> all;
  for (long j = -200; j <= 200; ++j) all.push_back(std::labs(j) + 1.0);
  std::sort(all.begin(), all.end());
  double weak = 0.0;
  for (std::size_t j = 0; j < 100; ++j) {
    EXPECT_EQ(out.abar[j], all[j]);
    weak = std::max(weak, (j + 1.0) / all[j]);
  }
  EXPECT_DOUBLE_EQ(out.weak_norm, weak);
  EXPECT_LE(out.weak_norm, 2.0);
}

TEST(Derived, RefusesRuleWithoutGrowthBound) {
  SmoothnessRule r{"bare", "polynomial", 1, [](int, long) { return 1.0; }, {}, {}};
  EXPECT_THROW(derived_smoothness(mixed(r), 3), UsageError);
  EXPECT_THROW(feature_index_set(mixed(r), 2.0), UsageError);
}

TEST(FeatureIndex, BelowEverySmoothnessIsEmpty) {
  const auto fis = feature_index_set(mixed(SmoothnessRule::power({1.0}, 1.0)), 1.0);
  EXPECT_TRUE(fis.coords.empty());
  EXPECT_EQ(fis.d_max, 0u);
  EXPECT_EQ(fis.G, 1.0);
}

TEST(FeatureIndex, MixedLinearRuleAtTwo) {
  const auto fis = feature_index_set(mixed(SmoothnessRule::power({1.0}, 1.0)), 2.0);
  EXPECT_EQ(fis.coords, (std::vector<Coord>{{0, 0}}));
  EXPECT_EQ(fis.G, 3.0);
  EXPECT_EQ(fis.f_max, 1);
}

TEST(FeatureIndex, AnisotropicMatchesProductFormula) {
  // For anisotropic gamma the constraint separates per coordinate, so
  // G = prod_c sum_{s_c a_c < T} 2^{s_c}.
  const auto spec = aniso(SmoothnessRule::power({1.0}, 1.0));
  for (double T : {2.0, 2.5, 3.0, 4.5, 6.0}) {
    const auto fis = feature_index_set(spec, T);
    double G = 1.0;
    for (long j = -20; j <= 20; ++j) {
      const double a = std::labs(j) + 1.0;
      double part = 0.0;
      for (int s = 0; s * a < T; ++s) part += std::pow(2.0, s);
      G *= part;
    }
    EXPECT_DOUBLE_EQ(fis.G, G) << T;
  }
}

TEST(FeatureIndex, MatchesBoxOracleOnRandomSpecs) {
  Rng rng(31);
  for (int trial = 0; trial < 60; ++trial) {
    const int d = static_cast<int>(uniform_int(rng, 1, 2));
    std::map<Coord, double> entries;
    const long n = uniform_int(rng, 1, 5);
    for (long q = 0; q < n; ++q)
      entries[{static_cast<int>(uniform_int(rng, 0, d - 1)), uniform_int(rng, -4, 4)}] = uniform(rng, 0.6, 4.0);
    const auto kind = uniform(rng) < 0.5 ? SmoothnessKind::mixed : SmoothnessKind::anisotropic;
    const double T = uniform(rng, 0.5, 6.0);
    const auto fis = feature_index_set({kind, SmoothnessRule::table(d, entries)}, T);
    std::vector<double> a;
    for (const auto& [c, v] : entries)
      if (v < T) a.push_back(v);
    const BoxOracle oracle = box_oracle(kind, a, T);
    EXPECT_EQ(fis.d_max, oracle.d_max);
    EXPECT_EQ(fis.f_max, oracle.f_max);
    EXPECT_EQ(fis.G, oracle.G);
    EXPECT_EQ(fis.block_count, oracle.count);
  }
}

TEST(FeatureIndex, BudgetExceededIsResourceError) {
  EXPECT_THROW(feature_index_set(aniso(SmoothnessRule::power({0.2}, 0.5)), 6.0, 1000), ResourceError);
}

TEST(Truncation, AboveEveryBlockIsZero) {
  const auto spec = mixed(SmoothnessRule::power({1.0}, 1.0));
  SyntheticTarget f{1, spec, {{{{{0, 0}, 1}}, 0.5}}};
  EXPECT_EQ(truncation_error(f, 2.0).tail, 0.0);
}

TEST(Truncation, SingleTermTail) {
  const auto spec = mixed(SmoothnessRule::table(1, {{{0, 0}, 2.5}}));
  // |r| = 3 sits in block s = 2, gamma = 5.
  const double c = -0.3;
  SyntheticTarget f{1, spec, {{{{{0, 0}, 3}}, c}}};
  const auto rep = truncation_error(f, 3.0);
  EXPECT_DOUBLE_EQ(rep.tail, std::abs(c));
  EXPECT_DOUBLE_EQ(rep.bound, std::pow(2.0, -3.0) * std::pow(2.0, 5.0) * std::abs(c));
  EXPECT_LE(rep.tail, rep.bound);
}

TEST(Truncation, RandomTargetsObeyTailBound) {
  Rng rng(41);
  const auto spec = mixed(SmoothnessRule::power({1.0}, 1.0));
  for (int trial = 0; trial < 30; ++trial) {
    const SyntheticTarget f = sample_target(spec, {9.0, 50, 1.0}, rng);
    EXPECT_NEAR(smoothness_norm(f), 1.0, 1e-12);
    for (double T = 0.5; T <= 9.0; T += 0.5) {
      const auto rep = truncation_error(f, T);
      EXPECT_LE(rep.tail, rep.bound * (1 + 1e-12));
      EXPECT_NEAR(rep.tail, l2_distance(f, truncate(f, T)), 1e-12);
    }
  }
}

TEST(Target, JsonRoundTrip) {
  Rng rng(2);
  const auto spec = aniso(SmoothnessRule::logarithmic({1.0, 2.0}, 1.5));
  const SyntheticTarget f = sample_target(spec, {5.0, 10, 1.0}, rng);
  const SyntheticTarget g = target_from_json(nlohmann::json::parse(target_to_json(f).dump()));
  EXPECT_EQ(f.coeffs, g.coeffs);
  EXPECT_EQ(smoothness_norm(f), smoothness_norm(g));
}

TEST(Target, LipschitzBoundHoldsOnRandomPairs) {
  Rng rng(3);
  const auto spec = mixed(SmoothnessRule::power({1.0}, 1.0));
  const SyntheticTarget f = sample_target(spec, {6.0, 15, 1.0}, rng);
  const long u = f.reach();
  for (int trial = 0; trial < 200; ++trial) {
    TokenWindow x = random_window(rng, 1, -u, u), y = x;
    for (Eigen::Index q = 0; q < y.data().size(); ++q) y.data().data()[q] += uniform(rng, -1e-3, 1e-3);
    const double dist = (x.data() - y.data()).cwiseAbs().maxCoeff();
    EXPECT_LE(std::abs(f.eval(x) - f.eval(y)), f.lipschitz_bound() * dist + 1e-14);
  }
}

TEST(GammaExtractor, Examples) {
  const TokenWindow x(0, (Eigen::MatrixXd(1, 2) << 0.3, 0.9).finished());
  EXPECT_EQ(gamma_extractor({}, x).size(), 0);
  EXPECT_EQ(gamma_extractor({{0, 0}}, x)(0), 0.3);
  EXPECT_THROW(gamma_extractor({{0, 4}}, x), BoundaryError);
}

TEST(GammaExtractor, ShiftConsistency) {
  Rng rng(4);
  const TokenWindow x = random_window(rng, 2, -10, 10);
  const std::vector<Coord> coords{{1, -2}, {0, 0}, {1, 3}};
  for (long k = -5; k <= 5; ++k) {
    const Eigen::VectorXd v = gamma_extractor(coords, x.shifted(k));
    for (std::size_t h = 0; h < coords.size(); ++h)
      EXPECT_EQ(v(static_cast<Eigen::Index>(h)), x.at(coords[h].channel, coords[h].position + k));
    EXPECT_EQ(v, gamma_extractor(coords, x, k));
  }
}

TEST(Importance, DecreasingScoresGiveIdentityOrder) {
  const auto m = ImportanceModel::linear(2, 0.01, 1.0, Eigen::VectorXd::Ones(1));
  const TokenWindow x(-2, (Eigen::MatrixXd(1, 5) << 0.9, 0.7, 0.5, 0.3, 0.1).finished());
  EXPECT_EQ(sort_permutation(m, x, 0), (std::vector<long>{-2, -1, 0, 1, 2}));
}

TEST(Importance, HandSortedExample) {
  ImportanceModel m{2, 0.01, 1.0, 0, [](const TokenWindow& x, long j) { return x.at(0, j); }};
  const TokenWindow x(-2, (Eigen::MatrixXd(1, 5) << 0.1, 0.5, 0.9, 0.3, 0.7).finished());
  // 0.9@0 > 0.7@2 > 0.5@-1 > 0.3@1 > 0.1@-2
  EXPECT_EQ(sort_permutation(m, x, 0), (std::vector<long>{0, 2, -1, 1, -2}));
}

TEST(Importance, TiesAreDegenerate) {
  ImportanceModel m{1, 0.01, 1.0, 0, [](const TokenWindow& x, long j) { return x.at(0, j); }};
  const TokenWindow x(-1, (Eigen::MatrixXd(1, 3) << 0.4, 0.4, 0.1).finished());
  EXPECT_THROW(sort_permutation(m, x, 0), DegenerateInputError);
}

TEST(Importance, MatchesArgsortOracleAndShiftCovariance) {
  Rng rng(5);
  const auto m = ImportanceModel::linear(3, 0.05, 1.0, Eigen::Vector2d(1.0, 0.0));
  for (int trial = 0; trial < 100; ++trial) {
    const long k = uniform_int(rng, -4, 4);
    const auto sample = sample_separated_input(m, 2, {-10, 10}, k, rng);
    ASSERT_TRUE(well_separated(m, sample.x, k));
    const auto pi = sort_permutation(m, sample.x, k);
    // Oracle: selection of the running maximum among unused positions.
    std::vector<bool> used(7, false);
    for (std::size_t t = 0; t < 7; ++t) {
      long best = 99;
      for (long j = -3; j <= 3; ++j)
        if (!used[static_cast<std::size_t>(j + 3)] &&
            (best == 99 || sample.x.at(0, k + j) > sample.x.at(0, k + best)))
          best = j;
      used[static_cast<std::size_t>(best + 3)] = true;
      EXPECT_EQ(pi[t], best);
    }
    EXPECT_EQ(pi, sort_permutation(m, sample.x.shifted(k), 0));
  }
}

TEST(Piecewise, TopSlotOnlyReadsArgmax) {
  const auto m = ImportanceModel::linear(2, 0.01, 1.0, Eigen::Vector2d(1.0, 0.0));
  const auto spec = mixed(SmoothnessRule::ranks({1.0, 1.0}, 1.0, 5));
  SyntheticTarget f{2, spec, {{{{{1, 1}, 1}}, 1.0}}};
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = sample_separated_input(m, 2, {-2, 2}, 0, rng);
    const long top = sort_permutation(m, s.x, 0).front();
    EXPECT_DOUBLE_EQ(piecewise_target_eval(f, m, s.x, 0), psi_1d(1, s.x.at(1, top)));
  }
}

TEST(Piecewise, IdentityOrderEqualsPlainEvaluation) {
  const auto m = ImportanceModel::linear(2, 0.01, 1.0, Eigen::Vector2d(1.0, 0.0));
  const auto spec = mixed(SmoothnessRule::ranks({1.0, 1.0}, 1.0, 5));
  Rng rng(7);
  const SyntheticTarget f = sample_target(spec, {5.0, 10, 1.0}, rng);
  TokenWindow x = random_window(rng, 2, -2, 2);
  for (long j = -2; j <= 2; ++j) x.data()(0, j + 2) = 0.9 - 0.2 * static_cast<double>(j + 2);
  EXPECT_DOUBLE_EQ(piecewise_target_eval(f, m, x, 0), f.eval(x.shifted(-3), 0));
}

TEST(Piecewise, MatchesSortedWindowAndIgnoresRelabeling) {
  const auto m = ImportanceModel::linear(3, 0.05, 1.0, Eigen::Vector2d(1.0, 0.0));
  const auto spec = mixed(SmoothnessRule::ranks({1.0, 2.0}, 1.0, 7));
  Rng rng(8);
  const SyntheticTarget f = sample_target(spec, {5.0, 12, 1.0}, rng);
  for (int trial = 0; trial < 50; ++trial) {
    const auto s = sample_separated_input(m, 2, {-3, 3}, 0, rng);
    // Oracle: stable argsort on channel 0, then evaluate f on slots 1..7.
    std::vector<long> order{-3, -2, -1, 0, 1, 2, 3};
    std::sort(order.begin(), order.end(), [&](long a, long b) { return s.x.at(0, a) > s.x.at(0, b); });
    Eigen::MatrixXd sorted(2, 7);
    for (int t = 0; t < 7; ++t) sorted.col(t) = s.x.token(order[static_cast<std::size_t>(t)]);
    const double expect = f.eval(TokenWindow(1, sorted), 0);
    EXPECT_NEAR(piecewise_target_eval(f, m, s.x, 0), expect, 1e-14);
    // Relabel: swap two tokens and keep the score order by swapping scores too.
    TokenWindow y = s.x;
    y.token(-3).swap(y.token(3));
    EXPECT_NEAR(piecewise_target_eval(f, m, y, 0), expect, 1e-14);
  }
}
