/* Copyright 2026 The StructPrune Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <random>

#include "../support/oracles.hpp"
#include "structprune/importance.hpp"
#include "structprune/zoo.hpp"

namespace structprune {
namespace {

void expect_near_all(const std::vector<double>& got, const std::vector<double>& want,
                     double tol = 1e-7) {
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "index " << i;
}

Tensor random_tensor(const Shape& shape, std::mt19937_64& gen) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<float> v(static_cast<std::size_t>(shape_numel(shape)));
  for (float& x : v) x = static_cast<float>(d(gen));
  return Tensor(shape, v);
}

TEST(Magnitude, HandValues) {
  const Tensor w({2, 2}, {1, -2, 0.5f, 0.5f});
  EXPECT_EQ(magnitude_score(w, 0, 1), (std::vector<double>{3.0, 1.0}));
  expect_near_all(magnitude_score(w, 0, 2), {2.2360679, 0.7071067});
  EXPECT_EQ(magnitude_score(Tensor({2, 3}), 0, 2), (std::vector<double>{0.0, 0.0}));
}

TEST(Lamp, HandValues) {
  const std::vector<double> u = {1, 2, 3};
  expect_near_all(lamp_from_squared_norms(u), {1.0 / 6.0, 2.0 / 5.0, 1.0}, 1e-15);
  const std::vector<double> one = {4};
  EXPECT_EQ(lamp_from_squared_norms(one), (std::vector<double>{1.0}));
  const std::vector<double> zeros = {0, 0};
  EXPECT_EQ(lamp_from_squared_norms(zeros), (std::vector<double>{0.0, 0.0}));
}

TEST(Lamp, UniformNormsIncreaseWithSortPosition) {
  const std::vector<double> u = {2, 2, 2, 2};
  const auto s = lamp_from_squared_norms(u);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LT(s[i - 1], s[i]);
}

TEST(Fpgm, HandValues) {
  EXPECT_EQ(fpgm_score(Tensor({3, 1}, {0, 1, 2}), 0), (std::vector<double>{3, 2, 3}));
  EXPECT_EQ(fpgm_score(Tensor({2, 2}, {1, 1, 1, 1}), 0), (std::vector<double>{0, 0}));
  EXPECT_EQ(fpgm_score(Tensor({1, 2}, {1, 1}), 0), (std::vector<double>{0}));
}

TEST(BnScale, HandValues) {
  EXPECT_EQ(bnscale_score(Tensor({3}, {0.5f, -1.2f, 0})),
            (std::vector<double>{0.5, static_cast<double>(1.2f), 0.0}));
}

TEST(RandomScore, SeededAndInRange) {
  EXPECT_EQ(random_score(8, 1, 2), random_score(8, 1, 2));
  EXPECT_NE(random_score(8, 1, 2), random_score(8, 2, 2));
  const auto one = random_score(1, 5, 0);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_GE(one[0], 0.0);
  EXPECT_LT(one[0], 1.0);
}

TEST(Taylor, HandValues) {
  const Tensor w({1, 2}, {1, 2});
  const std::vector<double> g = {0.5, -0.25};
  EXPECT_EQ(taylor_score(w, g, 0), (std::vector<double>{0.0}));
  const std::vector<double> zero = {0, 0};
  EXPECT_EQ(taylor_score(w, zero, 0), (std::vector<double>{0.0}));
}

TEST(ObdHessian, HandValues) {
  const Tensor w({1, 1}, {1});
  const std::vector<double> a = {1}, b = {-1};
  EXPECT_EQ(obd_hessian_score(w, {a, b}, 0), (std::vector<double>{0.5}));
  EXPECT_EQ(obd_hessian_score(Tensor({1, 1}), {a, b}, 0), (std::vector<double>{0.0}));
}

TEST(HRank, HandValues) {
  Tensor64 act({1, 3, 2, 2}, {1, 0, 0, 1, 1, 1, 1, 1, 0, 0, 0, 0});
  EXPECT_EQ(hrank_score(act), (std::vector<double>{2, 1, 0}));
}

TEST(ThiNet, HandValues) {
  EXPECT_EQ(thinet_score(Tensor64({2, 2}, {1, 1, 0, 0})), (std::vector<double>{2, 0}));
}

TEST(ThiNet, DuplicatedHalvedChannelsScoreEqually) {
  LayerNode fc;
  fc.id = "fc";
  fc.kind = LayerKind::kLinear;
  fc.attrs.in_channels = 2;
  fc.attrs.out_channels = 1;
  fc.params.emplace("weight", Tensor({1, 2}, {0.5f, 0.5f}));
  const Tensor64 x({3, 2}, {1, 1, 2, 2, -1, -1});
  const auto s = thinet_score(channel_contributions(fc, x));
  EXPECT_EQ(s[0], s[1]);
}

TEST(Aggregate, MaxNormalizedMean) {
  const auto s = aggregate_group(3, {{1, 3}, {2, 2}}, Normalization::kMax);
  EXPECT_EQ(s.group_id, 3);
  expect_near_all(s.values, {2.0 / 3.0, 1.0}, 1e-15);
}

TEST(Aggregate, SingleLayerWithoutNormalizationIsIdentity) {
  const std::vector<double> v = {0.3, 7, 2};
  EXPECT_EQ(aggregate_group(0, {v}, Normalization::kNone).values, v);
}

TEST(Aggregate, EqualVectorsGiveUniformOutput) {
  for (auto mode : {Normalization::kNone, Normalization::kMax, Normalization::kMean,
                    Normalization::kGaussian}) {
    const auto s = aggregate_group(0, {{2, 2, 2}, {2, 2, 2}}, mode).values;
    EXPECT_EQ(s[0], s[1]);
    EXPECT_EQ(s[1], s[2]);
  }
}

TEST(Normalize, GaussianIsNormalCdfOfZScore) {
  const std::vector<double> v = {1, 2, 3};
  const auto s = normalize_scores(v, Normalization::kGaussian);
  EXPECT_DOUBLE_EQ(s[1], 0.5);
  EXPECT_NEAR(s[0] + s[2], 1.0, 1e-15);
  // z = ±sqrt(3/2) with the population deviation.
  EXPECT_NEAR(s[2], 0.5 * std::erfc(-std::sqrt(1.5) / std::sqrt(2.0)), 1e-15);
}

TEST(Criterion, NamesAndFlags) {
  EXPECT_THROW(CriterionSpec::named("nope"), ConfigError);
  EXPECT_TRUE(CriterionSpec::named("magnitude_l1").data_free());
  EXPECT_FALSE(CriterionSpec::named("magnitude_l1").stochastic());
  EXPECT_TRUE(CriterionSpec::named("random").stochastic());
  EXPECT_TRUE(CriterionSpec::named("taylor").needs_gradients());
  EXPECT_TRUE(CriterionSpec::named("obd_hessian").needs_per_sample_gradients());
  EXPECT_TRUE(CriterionSpec::named("hrank").needs_activations());
  EXPECT_TRUE(CriterionSpec::named("thinet").stochastic());
  EXPECT_EQ(criterion_names().size(), 10u);
}

// --- randomized brute-force comparisons ----------------------------------------

TEST(Oracle, WeightCriteriaMatchBruteForce) {
  std::mt19937_64 gen(11);
  for (int t = 0; t < 20; ++t) {
    const Shape shape = {static_cast<std::int64_t>(2 + t % 4), static_cast<std::int64_t>(1 + t % 3), 3, 3};
    const Tensor w = random_tensor(shape, gen);
    for (std::size_t axis : {0u, 1u}) {
      const auto fp = fpgm_score(w, axis), fo = oracle::fpgm(w, axis);
      for (std::size_t i = 0; i < fp.size(); ++i) EXPECT_LE(oracle::rel_err(fp[i], fo[i]), 1e-6);
      const auto lp = lamp_score(w, axis), lo = oracle::lamp(w, axis);
      for (std::size_t i = 0; i < lp.size(); ++i) EXPECT_LE(oracle::rel_err(lp[i], lo[i]), 1e-6);
      std::vector<double> g(static_cast<std::size_t>(w.numel()));
      std::normal_distribution<double> d(0.0, 1.0);
      for (double& x : g) x = d(gen);
      const auto tp = taylor_score(w, g, axis), to = oracle::taylor(w, g, axis);
      for (std::size_t i = 0; i < tp.size(); ++i) EXPECT_LE(oracle::rel_err(tp[i], to[i]), 1e-6);
      std::vector<std::vector<double>> per(3, std::vector<double>(g.size()));
      for (auto& s : per)
        for (double& x : s) x = d(gen);
      std::vector<std::span<const double>> spans(per.begin(), per.end());
      const auto op = obd_hessian_score(w, spans, axis), oo = oracle::obd(w, per, axis);
      for (std::size_t i = 0; i < op.size(); ++i) EXPECT_LE(oracle::rel_err(op[i], oo[i]), 1e-6);
    }
  }
}

TEST(Oracle, HRankMatchesGaussianElimination) {
  std::mt19937_64 gen(12);
  std::uniform_int_distribution<int> small(-3, 3);
  for (int t = 0; t < 20; ++t) {
    const std::int64_t B = 2, C = 3, H = 2 + t % 4, W = 2 + (t / 4) % 4;
    Tensor64 act({B, C, H, W});
    std::vector<double> want(static_cast<std::size_t>(C), 0.0);
    for (std::int64_t b = 0; b < B; ++b) {
      for (std::int64_t c = 0; c < C; ++c) {
        // Sum of r integer outer products has rank <= r; elimination decides.
        const int r = static_cast<int>((b + c + t) % (std::min(H, W) + 1));
        std::vector<std::vector<double>> map(static_cast<std::size_t>(H), std::vector<double>(static_cast<std::size_t>(W)));
        for (int k = 0; k < r; ++k) {
          std::vector<int> u(static_cast<std::size_t>(H)), v(static_cast<std::size_t>(W));
          for (int& x : u) x = small(gen);
          for (int& x : v) x = small(gen);
          for (std::int64_t y = 0; y < H; ++y)
            for (std::int64_t x = 0; x < W; ++x) map[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] += u[static_cast<std::size_t>(y)] * v[static_cast<std::size_t>(x)];
        }
        for (std::int64_t y = 0; y < H; ++y)
          for (std::int64_t x = 0; x < W; ++x)
            act[static_cast<std::size_t>(((b * C + c) * H + y) * W + x)] = map[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
        want[static_cast<std::size_t>(c)] += oracle::gauss_rank(map) / static_cast<double>(B);
      }
    }
    const auto got = hrank_score(act);
    for (std::size_t c = 0; c < want.size(); ++c) EXPECT_LE(oracle::rel_err(got[c], want[c]), 1e-6);
  }
}

TEST(Oracle, ThiNetMatchesAblation) {
  std::mt19937_64 gen(13);
  for (int t = 0; t < 20; ++t) {
    LayerNode n;
    Tensor64 in;
    std::int64_t expansion = 1;
    if (t % 2 == 0) {
      const std::int64_t C = 2 + t % 3, O = 3, K = 3, S = 1 + t % 2;
      n.id = "conv";
      n.kind = LayerKind::kConv2d;
      n.attrs = {C, O, K, S, 1, false, 1e-5, 0.1};
      n.params.emplace("weight", random_tensor({O, C, K, K}, gen));
      in = random_tensor({2, C, 5, 5}, gen).cast<double>();
    } else {
      const std::int64_t C = 2 + t % 3, O = 4;
      expansion = 1 + t % 4;
      n.id = "fc";
      n.kind = LayerKind::kLinear;
      n.attrs.in_channels = C * expansion;
      n.attrs.out_channels = O;
      n.params.emplace("weight", random_tensor({O, C * expansion}, gen));
      in = random_tensor({3, C * expansion}, gen).cast<double>();
    }
    const auto got = thinet_score(channel_contributions(n, in, expansion));
    const auto want = oracle::thinet_ablation(n, in, expansion);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t c = 0; c < want.size(); ++c) EXPECT_LE(oracle::rel_err(got[c], want[c]), 1e-6);
  }
}

// --- group scoring ---------------------------------------------------------------

TEST(ScoreGroup, MagnitudeUsesProducerFilters) {
  const ModelGraph m = zoo::chain_cnn(2);
  const auto groups = build_groups(m);
  CriterionSpec crit = CriterionSpec::named("magnitude_l2");
  crit.normalization = Normalization::kNone;
  const auto s = score_group(m, groups[1], crit, nullptr);
  const Tensor& w = m.node("conv1").param("weight");
  for (std::int64_t k = 0; k < 8; ++k) {
    double sq = 0.0;
    for (double v : oracle::slice_values(w, 0, k)) sq += v * v;
    EXPECT_NEAR(s.values[static_cast<std::size_t>(k)], std::sqrt(sq), 1e-6);
  }
}

TEST(ScoreGroup, HRankAndThiNetUseConsumerFeeds) {
  const ModelGraph m = zoo::chain_cnn(2);
  const auto groups = build_groups(m);
  const Dataset batch = oracle::random_batch({3, 8, 8}, 4, 10, 5);

  CriterionSpec hr = CriterionSpec::named("hrank");
  hr.normalization = Normalization::kNone;
  const CalibrationData cd = calibrate(m, hr, batch);
  const Tensor64& relu1 = cd.record.activations[m.index_of("relu1")];
  const auto got = score_group(m, groups[1], hr, &cd).values;
  const auto H = relu1.dim(2), W = relu1.dim(3);
  for (std::int64_t c = 0; c < relu1.dim(1); ++c) {
    double mean = 0.0;
    for (std::int64_t b = 0; b < relu1.dim(0); ++b) {
      std::vector<std::vector<double>> map(static_cast<std::size_t>(H), std::vector<double>(static_cast<std::size_t>(W)));
      for (std::int64_t y = 0; y < H; ++y)
        for (std::int64_t x = 0; x < W; ++x)
          map[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] =
              relu1[static_cast<std::size_t>(((b * relu1.dim(1) + c) * H + y) * W + x)];
      mean += oracle::gauss_rank(map) / static_cast<double>(relu1.dim(0));
    }
    EXPECT_NEAR(got[static_cast<std::size_t>(c)], mean, 1e-9);
  }

  CriterionSpec th = CriterionSpec::named("thinet");
  th.normalization = Normalization::kNone;
  const auto t = score_group(m, groups[2], th, &cd).values;
  const auto want = oracle::thinet_ablation(m.node("fc"), cd.record.activations[m.index_of("gap")], 1);
  for (std::size_t c = 0; c < want.size(); ++c) EXPECT_LE(oracle::rel_err(t[c], want[c]), 1e-6);
}

TEST(ScoreGroup, UnsupportedCriteriaAreConfigErrors) {
  const ModelGraph m = zoo::mlp(0);
  const auto groups = build_groups(m);
  EXPECT_THROW(check_criterion(m, groups, CriterionSpec::named("bnscale")), ConfigError);
  EXPECT_THROW(check_criterion(m, groups, CriterionSpec::named("hrank")), ConfigError);
  EXPECT_NO_THROW(check_criterion(m, groups, CriterionSpec::named("thinet")));
}

TEST(ScoreGroups, CoverOnlyPrunableGroups) {
  const ModelGraph m = zoo::resnet_tiny(1);
  const auto groups = build_groups(m);
  const auto s = score_groups(m, groups, CriterionSpec::named("bnscale"), nullptr);
  ASSERT_EQ(s.size(), 4u);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(s[i].group_id, static_cast<int>(i) + 1);
    EXPECT_EQ(static_cast<std::int64_t>(s[i].values.size()), groups[i + 1].width);
  }
}

}  // namespace
}  // namespace structprune
