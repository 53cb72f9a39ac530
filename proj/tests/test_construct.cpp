#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "swat/construct/theorem1.hpp"
#include "swat/construct/theorem2.hpp"
#include "swat/core/budget.hpp"

using namespace swat;

namespace {

TokenWindow random_window(Rng& rng, Eigen::Index d, long first, long last) {
  Eigen::MatrixXd m(d, last - first + 1);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng);
  return TokenWindow(first, m);
}

ExtractionPlan manual_plan(int d, std::vector<Coord> coords, int U, double chi) {
  return {d, std::move(coords), U, chi, window_angle(U)};
}

double harmonic(long n) {
  double h = 0.0;
  for (long i = 1; i <= n; ++i) h += 1.0 / static_cast<double>(i);
  return h;
}

ImportanceModel channel0_model(int V, double c) {
  return ImportanceModel::linear(V, c, 1.0, Eigen::Vector2d(1.0, 0.0));
}

// Two channels, ranks 1 and 2 active: I = {(0,1), (1,1), (0,2)}, r_max = 2.
SmoothnessSpec two_round_spec(int V) {
  return {SmoothnessKind::mixed, SmoothnessRule::ranks({1.0, 2.0}, 1.0, 2L * V + 1)};
}

}  // namespace

TEST(IdentityFnn, ExactOnExamples) {
  EXPECT_EQ(fnn_forward(identity_fnn(3), Eigen::Vector3d::Zero()), Eigen::Vector3d::Zero());
  EXPECT_EQ(fnn_forward(identity_fnn(2), Eigen::Vector2d(-2.5, 3)), Eigen::Vector2d(-2.5, 3));
}

TEST(IdentityFnn, FitsPsiTwoTwoDFourDOne) {
  const long d = 5;
  TransformerParams t;
  t.embedding.matrix = sparse_identity_block(d, d, 0, 0, d);
  t.embedding.pe = PositionalEncoding::zero(d);
  t.blocks.push_back({AttentionParams{0, d, {}}, identity_fnn(d)});
  ClassBudget b;
  b.M = 1;
  b.windows = {0};
  b.D = d;
  b.H = 0;
  b.L = 2;
  b.W = 2 * d;
  b.S = 4 * d;
  b.B = 1.0;
  const auto report = validate_budget(t, b);
  EXPECT_TRUE(report.pass()) << report.summary();
  EXPECT_EQ(report.find("block 0 fnn nonzeros")->observed, 4.0 * d);
  EXPECT_EQ(report.find("block 0 fnn width")->observed, 2.0 * d);
  b.S = 4 * d - 1;
  EXPECT_FALSE(validate_budget(t, b).pass());
}

TEST(Chi, Examples) {
  EXPECT_NEAR(chi_for(1, 1, 1, 0), std::log(2.0), 1e-15);
  EXPECT_NEAR(chi_for(4, 2, 100, 3), 16.0 * std::log(12800.0), 1e-12);
  EXPECT_NEAR(chi_for(4, 2, 100, 3), 151.3, 0.1);
  EXPECT_THROW(chi_for(0, 1, 1, 1), UsageError);
}

TEST(Chi, GuaranteeIsAnIdentity) {
  for (double U : {1.0, 3.0, 8.0})
    for (double H : {1.0, 4.0})
      for (double lip : {1.0, 37.5})
        for (double T : {0.0, 2.0, 7.5}) {
          const double chi = chi_for(U, H, lip, T);
          EXPECT_NEAR(std::log(2 * H * U) - chi / (U * U) + std::log(lip), -T * std::numbers::ln2, 1e-12);
        }
}

TEST(Chi, MeasuredGapDominatesTheClaim) {
  for (int U = 1; U <= 200; ++U) {
    const double phi = window_angle(U);
    double brute = 2.0;
    for (int a = -U; a <= U; ++a)
      for (int b = -U; b <= U; ++b)
        if (a != b) brute = std::min(brute, 1.0 - std::cos((a - b) * phi));
    EXPECT_NEAR(measured_gap(U, phi), brute, 1e-15);
    EXPECT_GE(measured_gap(U, phi), 1.0 / (U * U));
  }
}

TEST(Theorem1, EmbeddingAtZero) {
  const auto plan = manual_plan(2, {{0, -1}}, 2, 10.0);
  const auto net = build_theorem1_network(plan);
  const TokenWindow x(0, (Eigen::MatrixXd(2, 1) << 0.25, 0.75).finished());
  const TokenWindow z = embed(net.embedding, x);
  EXPECT_EQ(z.token(0), (Eigen::VectorXd(5) << 0.25, 0.75, 0.0, 1.0, 0.0).finished());
}

TEST(Theorem1, ScoresAreScaledCosines) {
  Rng rng(1);
  const auto plan = manual_plan(1, {{0, -2}, {0, 0}, {0, 3}}, 3, 7.0);
  const auto net = build_theorem1_network(plan);
  for (long i : {-5L, 0L, 4L}) {
    const TokenWindow z = embed(net.embedding, random_window(rng, 1, i - 3, i + 3));
    for (std::size_t h = 0; h < plan.coords.size(); ++h) {
      const Eigen::VectorXd s = attention_scores(net.blocks[0].attention.heads[h], z, i, plan.U);
      for (long t = -3; t <= 3; ++t)
        EXPECT_NEAR(s(t + 3), plan.chi * std::cos((plan.coords[h].position - t) * plan.phi), 1e-12);
    }
  }
}

TEST(Theorem1, SingleCenteredHeadConcentrates) {
  Rng rng(2);
  const TokenWindow x = random_window(rng, 1, -4, 4);
  double last = 0.0;
  for (double chi : {1.0, 10.0, 100.0, 1000.0}) {
    const auto plan = manual_plan(1, {{0, 0}}, 2, chi);
    const auto net = build_theorem1_network(plan);
    const Eigen::VectorXd a = attention_weights(net.blocks[0].attention.heads[0], embed(net.embedding, x), 0, 2);
    Eigen::Index arg = 0;
    a.maxCoeff(&arg);
    EXPECT_EQ(arg, 2);
    EXPECT_GE(a(2), last);
    last = a(2);
  }
  EXPECT_NEAR(last, 1.0, 1e-12);
}

TEST(Theorem1, OutOfWindowCoordinateRejected) {
  EXPECT_THROW(build_theorem1_network(manual_plan(1, {{0, 3}}, 2, 1.0)), UsageError);
}

TEST(Theorem1, OracleExamples) {
  Rng rng(3);
  const TokenWindow x = random_window(rng, 1, -3, 3);
  const auto empty = manual_plan(1, {}, 1, 1.0);
  const auto net = build_theorem1_network(empty);
  EXPECT_EQ(hard_extract_oracle(empty, x, 0), embed(net.embedding, x).token(0));
  TokenWindow y = x;
  y.data()(0, 2) = 0.8;  // position -1
  const auto plan = manual_plan(1, {{0, -1}}, 1, 1.0);
  EXPECT_EQ(hard_extract_oracle(plan, y, 0)(1), 0.8);
}

TEST(Theorem1, ScratchIsGammaOfShiftedInput) {
  Rng rng(4);
  const auto plan = manual_plan(2, {{1, -3}, {0, -1}, {1, 0}, {0, 2}}, 3, 1.0);
  const TokenWindow x = random_window(rng, 2, -10, 10);
  for (long j = -7; j <= 7; ++j)
    EXPECT_EQ(hard_extract_oracle(plan, x, j).segment(2, 4), gamma_extractor(plan.coords, x.shifted(j)));
}

TEST(Theorem1, SoftmaxWithinBoundOnRandomInputs) {
  Rng rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const int U = static_cast<int>(uniform_int(rng, 1, 8));
    std::vector<Coord> coords;
    for (int h = 0, n = static_cast<int>(uniform_int(rng, 1, 4)); h < n; ++h)
      coords.push_back({0, uniform_int(rng, -U, U)});
    std::sort(coords.begin(), coords.end());
    coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
    const double T = uniform(rng, 2.0, 8.0);
    auto plan = manual_plan(1, coords, U, chi_for(U, static_cast<double>(coords.size()), 1.0, T));
    const auto net = build_theorem1_network(plan);
    const TokenWindow x = random_window(rng, 1, -20, 20);
    const auto check = check_extraction(plan, net, x, {-10, 10});
    EXPECT_TRUE(check.pass()) << check.deviation << " vs " << check.bound;
    EXPECT_TRUE(check.gap_claim_holds);
    EXPECT_LE(check.bound, check.paper_bound);
    EXPECT_LE(check.paper_bound, std::pow(2.0, -T) * (1 + 1e-12));
  }
}

TEST(Theorem1, LowChiStillObeysBound) {
  // Far from the hardmax limit the bound is loose but must still hold.
  Rng rng(6);
  const auto plan = manual_plan(1, {{0, -2}, {0, 1}}, 3, 2.0);
  const auto net = build_theorem1_network(plan);
  const auto check = check_extraction(plan, net, random_window(rng, 1, -15, 15), {-5, 5});
  EXPECT_GT(check.deviation, 1e-3);
  EXPECT_LE(check.deviation, check.bound);
}

TEST(Theorem1, ScratchIsShiftEquivariant) {
  Rng rng(7);
  const auto plan = manual_plan(1, {{0, -2}, {0, 0}, {0, 3}}, 3, chi_for(3, 3, 1, 6));
  const auto net = build_theorem1_network(plan);
  const TokenWindow x = random_window(rng, 1, -20, 20);
  const auto base = check_extraction(plan, net, x, {-8, 8});
  for (long j = -8; j <= 8; ++j) {
    const Eigen::MatrixXd shifted = transformer_forward(net, x.shifted(j), {0, 0});
    EXPECT_LE((shifted.col(0).segment(1, 3) - base.state.col(j + 8).segment(1, 3)).cwiseAbs().maxCoeff(),
              2.0 * std::max(base.bound, base.fp_floor));
  }
}

TEST(Theorem1, QueryNormSitsAtChi) {
  const auto spec = SmoothnessSpec{SmoothnessKind::mixed, SmoothnessRule::power({1.0}, 1.0)};
  const auto plan = make_extraction_plan(spec, 1, 4.0);
  const auto net = build_theorem1_network(plan);
  ClassBudget b;
  b.M = 1;
  b.windows = {plan.U};
  b.D = plan.embed_dim();
  b.H = static_cast<int>(plan.heads());
  b.L = 1;
  b.W = 1;
  b.S = 0;
  b.B = plan.chi;
  EXPECT_TRUE(validate_budget(net, b).pass()) << validate_budget(net, b).summary();
  b.B = 0.99 * plan.chi;
  const auto report = validate_budget(net, b);
  for (const auto& c : report.failures()) EXPECT_NE(c.find("attention sup-norm"), std::string::npos);
  EXPECT_FALSE(report.pass());
  // log chi grows like T: chi = U^2 (log(2HU) + T log 2).
  EXPECT_LE(std::log(plan.chi), std::log(plan.U * plan.U * (std::log(2.0 * plan.heads() * plan.U) + 4.0)));
}

TEST(Theorem1, EndToEndWithExactHead) {
  Rng rng(8);
  const auto spec = SmoothnessSpec{SmoothnessKind::mixed, SmoothnessRule::power({1.0}, 1.0)};
  const SyntheticTarget f = sample_target(spec, {7.0, 30, 1.0}, rng);
  for (double T : {2.0, 3.0, 4.5}) {
    const SyntheticTarget fT = truncate(f, T);
    const auto fis = feature_index_set(spec, T);
    const FeatureHead head(fT, fis.coords);
    const auto plan = make_extraction_plan(spec, 1, T, head.lipschitz_product());
    const auto net = build_theorem1_network(plan);
    double sq = 0.0;
    const int n = 200;
    for (int s = 0; s < n; ++s) {
      const TokenWindow x = random_window(rng, 1, -plan.U - 8, plan.U + 8);
      const Eigen::MatrixXd z = transformer_forward(net, x, {0, 0});
      const double out = theorem1_readout(plan, z, head)(0);
      sq += std::pow(out - f.eval(x), 2);
      // Per input: |f_T(Cz^1) - f_T(Cz~)| <= Lip * 2HU e^{-chi gap} <= 2^{-T}.
      EXPECT_LE(std::abs(out - fT.eval(x)), std::pow(2.0, -T) + 1e-12);
    }
    EXPECT_LE(std::sqrt(sq / n), truncation_error(f, T).tail + std::pow(2.0, -T));
  }
}

TEST(Bank, DimensionFormula) {
  EXPECT_EQ(bank_dimension(16, 0.5), 56);
  EXPECT_THROW(bank_dimension(4, 1.5), UsageError);
}

TEST(Bank, SingleVectorIsUnit) {
  const auto bank = sample_orthonormal_bank(1, 0.3, 9);
  ASSERT_EQ(bank.size(), 1);
  EXPECT_NEAR(bank.vectors[0].norm(), 1.0, 1e-14);
  EXPECT_EQ(bank.achieved, 0.0);
}

TEST(Bank, InvariantsAndPeriodicity) {
  const auto bank = sample_orthonormal_bank(9, 0.4, 10);
  for (const auto& u : bank.vectors) {
    EXPECT_NEAR(u.squaredNorm(), 1.0, 1e-12);
    const double s = 1.0 / std::sqrt(static_cast<double>(u.size()));
    for (Eigen::Index q = 0; q < u.size(); ++q) EXPECT_EQ(std::abs(u(q)), s);
  }
  EXPECT_LE(bank.achieved, 0.4);
  EXPECT_EQ(bank.at(-1), bank.vectors[8]);
  EXPECT_EQ(bank.at(20), bank.vectors[2]);
}

TEST(Bank, SingleShotSuccessRate) {
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) ok += try_sample_bank(17, 0.5, seed).has_value();
  EXPECT_GE(ok, 30);
}

TEST(Bank, ExhaustedRetriesRaise) {
  EXPECT_THROW(sample_orthonormal_bank(200, 0.9, 1, 0), SamplingError);
}

TEST(Theorem2, SmallExampleFollowsScores) {
  // V = 1, mu = (0.2, 0.8, 0.5) at relative (-1, 0, +1).
  ImportanceModel m{1, 0.3, 1.0, 0, [](const TokenWindow& x, long j) { return x.at(0, j); }};
  const SmoothnessSpec spec{SmoothnessKind::mixed, SmoothnessRule::ranks({1.0}, 1.0, 3)};
  const double limit = bank_coherence_limit(0.15, 2);
  const auto bank = sample_orthonormal_bank(3, limit, 11);
  const auto net = make_theorem2_network(m, spec, 2.5, bank, 1e-3);
  TokenWindow x(-3, Eigen::MatrixXd::Constant(1, 7, 0.1));
  x.data()(0, 2) = 0.2;
  x.data()(0, 3) = 0.8;
  x.data()(0, 4) = 0.5;
  const auto check = piecewise_extraction_error(net, x, 0);
  EXPECT_EQ(check.trace, (std::vector<long>{0, 1}));
  EXPECT_TRUE(check.pass()) << check.deviation << " " << check.envelope;
  EXPECT_NEAR(check.state(1), 0.8, 1e-3);
  EXPECT_NEAR(check.state(2), 0.5, 1e-3);
}

TEST(Theorem2, LayoutAndRounds) {
  const int V = 2;
  const auto m = channel0_model(V, 1.6 / harmonic(2 * V));
  const auto bank = sample_orthonormal_bank(5, bank_coherence_limit(m.c / 2, 2), 12);
  const auto net = make_theorem2_network(m, two_round_spec(V), 2.5, bank, 1e-4);
  const auto& lay = net.layout;
  EXPECT_EQ(lay.features, (std::vector<Coord>{{0, 1}, {1, 1}, {0, 2}}));
  EXPECT_EQ(lay.r_max(), 2);
  EXPECT_EQ(net.layers(), 3);
  EXPECT_EQ(lay.D(), 2 + 3 + 2 * bank.dim() + 4);
  EXPECT_EQ(lay.scratch(2, 0), 4);
  EXPECT_EQ(net.net.embedding.pe.memory_base(), lay.one());
  EXPECT_EQ(net.net.blocks.size(), 2u);
  EXPECT_EQ(net.net.blocks[0].fnn.depth(), 2);
  EXPECT_EQ(net.net.blocks[1].fnn.depth(), 0);
}

TEST(Theorem2, TooCoherentBankRejected) {
  const auto m = channel0_model(2, 0.5);
  const auto bank = sample_orthonormal_bank(5, 0.5, 13);
  EXPECT_THROW(make_theorem2_network(m, two_round_spec(2), 2.5, bank, 1e-3), HypothesisError);
}

TEST(Theorem2, RandomInputsSortAndExtract) {
  const int V = 2;
  const auto m = channel0_model(V, 1.6 / harmonic(2 * V));
  const auto bank = sample_orthonormal_bank(5, bank_coherence_limit(m.c / 2, 2), 14);
  const auto net = make_theorem2_network(m, two_round_spec(V), 2.5, bank, std::pow(3.0, -2) * std::pow(2.0, -2.5));
  Rng rng(15);
  for (int trial = 0; trial < 100; ++trial) {
    const long k = uniform_int(rng, -3, 3);
    const auto s = sample_separated_input(m, 2, {-12, 12}, k, rng);
    const auto check = piecewise_extraction_error(net, s.x, k);
    EXPECT_TRUE(check.trace_matches());
    EXPECT_LE(check.deviation, check.envelope);
    EXPECT_LE(check.cz_deviation, check.envelope);
  }
}

TEST(Theorem2, MemoryStateSumsSelectedVectors) {
  const int V = 2;
  const auto m = channel0_model(V, 1.6 / harmonic(2 * V));
  const auto bank = sample_orthonormal_bank(5, bank_coherence_limit(m.c / 2, 2), 16);
  const auto net = make_theorem2_network(m, two_round_spec(V), 2.5, bank, 1e-6);
  Rng rng(17);
  const auto s = sample_separated_input(m, 2, {-10, 10}, 0, rng);
  const auto states = theorem2_states(net, s.x, {0, 0});
  const auto pi = sort_permutation(m, s.x, 0);
  Eigen::VectorXd w = Eigen::VectorXd::Zero(bank.dim());
  for (int round = 1; round <= 2; ++round) {
    w += net.u(pi[static_cast<std::size_t>(round - 1)]);
    const Eigen::VectorXd got = states[static_cast<std::size_t>(round)].token(0).segment(net.layout.w0(), bank.dim());
    EXPECT_LE((got - w).cwiseAbs().maxCoeff(), 1e-6);
  }
}

TEST(Theorem2, HugeChiReachesHardmax) {
  const int V = 2;
  const auto m = channel0_model(V, 1.6 / harmonic(2 * V));
  const auto bank = sample_orthonormal_bank(5, bank_coherence_limit(m.c / 2, 2), 18);
  const SmoothnessSpec spec{SmoothnessKind::mixed, SmoothnessRule::ranks({1.0, 2.0}, 1.0, 5)};
  auto net = build_theorem2_network(m, spec, 1.5, bank, 5000.0, 1e-12);
  ASSERT_EQ(net.layout.r_max(), 1);
  Rng rng(19);
  const auto s = sample_separated_input(m, 2, {-6, 6}, 0, rng);
  EXPECT_LT(piecewise_extraction_error(net, s.x, 0).deviation, 1e-9);
}

TEST(Theorem2, NotSeparatedIsRejected) {
  const int V = 2;
  const auto m = channel0_model(V, 1.6 / harmonic(2 * V));
  const auto bank = sample_orthonormal_bank(5, bank_coherence_limit(m.c / 2, 2), 20);
  const auto net = make_theorem2_network(m, two_round_spec(V), 2.5, bank, 1e-3);
  const TokenWindow x(-6, Eigen::MatrixXd::Constant(2, 13, 0.5));
  EXPECT_THROW(piecewise_extraction_error(net, x, 0), HypothesisError);
}

TEST(Theorem2, ReadoutMatchesPiecewiseTruncation) {
  const int V = 2;
  const auto m = channel0_model(V, 1.6 / harmonic(2 * V));
  const auto spec = two_round_spec(V);
  const auto bank = sample_orthonormal_bank(5, bank_coherence_limit(m.c / 2, 2), 21);
  Rng rng(22);
  const SyntheticTarget f = sample_target(spec, {2.5, 10, 1.0}, rng);
  const FeatureHead head(truncate(f, 2.5), feature_index_set(spec, 2.5).coords);
  const auto net = make_theorem2_network(m, spec, 2.5, bank, 1e-6 / head.lipschitz_product());
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = sample_separated_input(m, 2, {-8, 8}, 0, rng);
    EXPECT_NEAR(theorem2_readout(net, s.x, {0, 0}, head)(0), piecewise_target_eval(truncate(f, 2.5), m, s.x, 0), 1e-5);
  }
}
