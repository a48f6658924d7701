#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "oracles.hpp"
#include "vpt/error.hpp"
#include "vpt/random.hpp"
#include "vpt/stats.hpp"

namespace {

namespace st = vpt::stats;
using st::Alternative;

// Fixed 10-point datasets. Reference values computed with scipy 1.15.3
// (ttest_rel, ttest_ind, pearsonr, spearmanr) and numpy.quantile(method="inverted_cdf").
const std::vector<double> kX{0.21, 0.18, 0.30, 0.25, 0.12, 0.27, 0.19, 0.33, 0.16, 0.22};
const std::vector<double> kY{0.35, 0.29, 0.52, 0.31, 0.20, 0.61, 0.24, 0.45, 0.40, 0.28};
const std::vector<double> kZ{4.0, 5.0, 3.0, 4.0, 6.0, 2.0, 5.0, 3.0, 4.0, 5.0};
const std::vector<double> kM{0.07, 0.07, 0.16, 0.4, 0.07, 0.6, 0.16, 0.4, 0.16, 0.07};
constexpr double kTol = 1e-9;

TEST(Reference, PairedT) {
  const auto r = st::t_test_one_sided(kX, kY, true, Alternative::less);
  EXPECT_NEAR(r.statistic, -4.699800074473326, kTol);
  EXPECT_NEAR(r.p_value, 0.000560242955460042, kTol);
  EXPECT_DOUBLE_EQ(r.df, 9.0);
  EXPECT_EQ(r.method, st::TestMethod::paired_t);
}

TEST(Reference, WelchT) {
  const auto r = st::t_test_one_sided(kX, kY, false, Alternative::less);
  EXPECT_NEAR(r.statistic, -3.094930013293453, kTol);
  EXPECT_NEAR(r.p_value, 0.004182211333682751, kTol);
  EXPECT_NEAR(r.df, 13.249841888617649, kTol);
}

TEST(Reference, PooledT) {
  const auto r = st::t_test_one_sided(kX, kY, false, Alternative::less, st::TVariant::pooled);
  EXPECT_NEAR(r.statistic, -3.094930013293453, kTol);
  EXPECT_NEAR(r.p_value, 0.0031241100814986293, kTol);
  EXPECT_DOUBLE_EQ(r.df, 18.0);
}

TEST(Reference, GreaterIsComplementOfLessForT) {
  const auto less = st::t_test_one_sided(kX, kY, true, Alternative::less);
  const auto greater = st::t_test_one_sided(kX, kY, true, Alternative::greater);
  EXPECT_NEAR(less.p_value + greater.p_value, 1.0, 1e-12);
}

TEST(Reference, Pearson) {
  const auto r = st::pearson(kX, kZ);
  EXPECT_NEAR(r.coefficient, -0.8040158399750233, kTol);
  EXPECT_NEAR(r.p_value, 0.005057004054592136, kTol);
  EXPECT_EQ(r.n, 10u);
}

TEST(Reference, SpearmanWithTies) {
  const auto r = st::spearman(kX, kM);
  EXPECT_NEAR(r.coefficient, 0.6292853089020909, kTol);
  EXPECT_NEAR(r.p_value, 0.05124855216842294, kTol);
  const auto r2 = st::spearman(kY, kZ);
  EXPECT_NEAR(r2.coefficient, -0.9723448696087954, kTol);
  EXPECT_NEAR(r2.p_value, 2.4751118154063747e-06, kTol);
}

TEST(Reference, QuantileType1) {
  const std::vector<std::pair<double, double>> expected{
      {0.0, 0.2}, {0.1, 0.2}, {0.25, 0.28}, {0.26, 0.28},
      {0.5, 0.31}, {0.75, 0.45}, {0.9, 0.52}, {1.0, 0.61}};
  for (const auto& [p, v] : expected) EXPECT_NEAR(st::quantile_type1(kY, p), v, kTol) << p;
}

TEST(Quantile, HandExamples) {
  const std::vector<double> s{10, 20, 30, 40};
  EXPECT_DOUBLE_EQ(st::quantile_type1(s, 0.25), 10);
  EXPECT_DOUBLE_EQ(st::quantile_type1(s, 0.26), 20);
  EXPECT_DOUBLE_EQ(st::quantile_type1(s, 1.0), 40);
  EXPECT_DOUBLE_EQ(st::quantile_type1(s, 0.0), 10);
  EXPECT_THROW(st::quantile_type1(std::vector<double>{}, 0.5), vpt::Error);
}

TEST(Quantile, AlwaysReturnsSampleElement) {
  vpt::Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(1 + rng() % 15);
    for (auto& v : s) v = std::round(vpt::uniform(rng, 0, 10));
    const double p = vpt::uniform01(rng);
    const double q = st::quantile_type1(s, p);
    EXPECT_NE(std::find(s.begin(), s.end(), q), s.end());
  }
}

TEST(Summary, Continuous) {
  const std::vector<double> s{1, 2, 3};
  const auto g = st::group_summary(s, st::SummaryMode::continuous);
  EXPECT_DOUBLE_EQ(g.mean, 2.0);
  EXPECT_DOUBLE_EQ(g.sd, 1.0);
  EXPECT_FALSE(g.small_n);
}

TEST(Summary, SingleValueFlagsSmallN) {
  const std::vector<double> s{5};
  const auto g = st::group_summary(s, st::SummaryMode::continuous);
  EXPECT_DOUBLE_EQ(g.mean, 5.0);
  EXPECT_DOUBLE_EQ(g.sd, 0.0);
  EXPECT_TRUE(g.small_n);
}

TEST(Summary, DiscreteUsesType1Quartiles) {
  const std::vector<double> s{0.07, 0.07, 0.16, 0.4};
  const auto g = st::group_summary(s, st::SummaryMode::discrete);
  EXPECT_DOUBLE_EQ(g.median, 0.07);
  EXPECT_DOUBLE_EQ(g.q25, 0.07);
  EXPECT_DOUBLE_EQ(g.q75, 0.16);
}

TEST(Bonferroni, Examples) {
  EXPECT_DOUBLE_EQ(st::bonferroni(0.01, 3), 0.03);
  EXPECT_DOUBLE_EQ(st::bonferroni(0.5, 3), 1.0);
  EXPECT_DOUBLE_EQ(st::bonferroni(0.2, 1), 0.2);
  const auto r = st::with_bonferroni(st::t_test_one_sided(kX, kY, true, Alternative::less), 3);
  EXPECT_DOUBLE_EQ(*r.p_adjusted, 3 * r.p_value);
  EXPECT_EQ(*r.comparisons, 3);
}

TEST(EffectSize, CohensD) {
  const std::vector<double> a{-1, 0, 1, 2, 3};
  const std::vector<double> b{-2, -1, 0, 1, 2};
  EXPECT_NEAR(st::cohens_d(a, b).value, 1.0 / std::sqrt(2.5), 1e-12);
  EXPECT_DOUBLE_EQ(st::cohens_d(a, a).value, 0.0);
  // Pooled-SD formula on the finger/toe summary: (0.20-0.38)/sqrt((0.09^2+0.20^2)/2).
  const double d = (0.20 - 0.38) / std::sqrt((0.09 * 0.09 + 0.20 * 0.20) / 2.0);
  EXPECT_NEAR(d, -1.16, 0.005);
  EXPECT_THROW(st::cohens_d(std::vector<double>{1}, std::vector<double>{2}), vpt::Error);
}

TEST(EffectSize, WilcoxonR) {
  EXPECT_DOUBLE_EQ(st::wilcoxon_r(0.0, 10).value, 0.0);
  EXPECT_DOUBLE_EQ(st::wilcoxon_r(2.0, 4).value, 1.0);
  EXPECT_DOUBLE_EQ(st::wilcoxon_r(-3.0, 25).value, -0.6);
  EXPECT_DOUBLE_EQ(st::wilcoxon_r(5.0, 4).value, 1.0);
}

TEST(Correlation, Invariants) {
  std::vector<double> x{1, 2, 3, 4, 5, 6};
  std::vector<double> lin, ex, neg;
  for (double v : x) {
    lin.push_back(2 * v + 1);
    ex.push_back(std::exp(v));
    neg.push_back(-v);
  }
  EXPECT_NEAR(st::pearson(x, lin).coefficient, 1.0, 1e-12);
  EXPECT_NEAR(st::spearman(x, ex).coefficient, 1.0, 1e-12);
  EXPECT_NEAR(st::spearman(x, neg).coefficient, -1.0, 1e-12);
  EXPECT_THROW(st::pearson(x, std::vector<double>(6, 1.0)), vpt::Error);
  EXPECT_THROW(st::pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}), vpt::Error);
}

TEST(Correlation, IndependentLargeSampleNearZero) {
  vpt::Rng rng(12);
  std::vector<double> x(10000), y(10000);
  for (auto& v : x) v = vpt::standard_normal(rng);
  for (auto& v : y) v = vpt::standard_normal(rng);
  EXPECT_LT(std::fabs(st::pearson(x, y).coefficient), 0.1);
}

TEST(TTest, Errors) {
  EXPECT_THROW(st::t_test_one_sided(std::vector<double>{1}, std::vector<double>{2}, true, Alternative::less),
               vpt::Error);
  EXPECT_THROW(st::t_test_one_sided(std::vector<double>{1, 2}, std::vector<double>{2}, true, Alternative::less),
               vpt::Error);
  // Constant differences: zero variance.
  EXPECT_THROW(st::t_test_one_sided(std::vector<double>{1, 2, 3}, std::vector<double>{2, 3, 4}, true,
                                    Alternative::less),
               vpt::Error);
}

TEST(TTest, ExtremeTailKeepsPrecision) {
  EXPECT_GT(st::students_t_sf(40.0, 10.0), 0.0);
  EXPECT_NEAR(st::students_t_sf(0.0, 5.0), 0.5, 1e-15);
  EXPECT_NEAR(st::students_t_cdf(1.0, 1.0), 0.75, 1e-12);
  EXPECT_NEAR(st::normal_cdf(0.0), 0.5, 1e-15);
}

TEST(SignedRank, HandExamples) {
  // All five differences negative: W+ = 0, p = 1/32.
  const std::vector<double> x{1, 2, 3, 4, 5};
  const std::vector<double> y{2, 4, 6, 8, 10};
  const auto r = st::wilcoxon_signed_rank_one_sided(x, y, Alternative::less);
  EXPECT_DOUBLE_EQ(r.statistic, 0.0);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0 / 32.0);
  EXPECT_EQ(r.method, st::TestMethod::signed_rank_exact);
  EXPECT_THROW(st::wilcoxon_signed_rank_one_sided(x, x, Alternative::less), vpt::Error);
}

TEST(SignedRank, InfinitePairsAreDroppedAsTies) {
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<double> x{1, 2, inf, 3};
  const std::vector<double> y{2, 3, inf, 5};
  const auto r = st::wilcoxon_signed_rank_one_sided(x, y, Alternative::less);
  EXPECT_EQ(r.n, 3u);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0 / 8.0);
}

TEST(RankSum, HandExamples) {
  const auto r = st::wilcoxon_rank_sum_one_sided(std::vector<double>{1, 2}, std::vector<double>{3, 4},
                                                 Alternative::less);
  EXPECT_DOUBLE_EQ(r.statistic, 3.0);
  EXPECT_DOUBLE_EQ(r.p_value, 1.0 / 6.0);
  EXPECT_THROW(st::wilcoxon_rank_sum_one_sided(std::vector<double>{}, std::vector<double>{1},
                                               Alternative::less),
               vpt::Error);
}

// Exhaustive comparison with brute-force enumeration over every tie
// structure up to n = 8 and every sign pattern or split up to n = 12.
TEST(RankOracle, SignedRankMatchesEnumeration) {
  const auto r = oracle::sweep_signed_rank([](const auto& x, const auto& y, bool less) {
    return st::wilcoxon_signed_rank_one_sided(x, y, less ? Alternative::less : Alternative::greater)
        .p_value;
  });
  EXPECT_EQ(r.mismatches, 0u) << "worst " << r.worst;
  EXPECT_GT(r.cases, 10000u);
}

TEST(RankOracle, RankSumMatchesEnumeration) {
  const auto r = oracle::sweep_rank_sum([](const auto& x, const auto& y, bool less) {
    return st::wilcoxon_rank_sum_one_sided(x, y, less ? Alternative::less : Alternative::greater)
        .p_value;
  });
  EXPECT_EQ(r.mismatches, 0u) << "worst " << r.worst;
  EXPECT_GT(r.cases, 10000u);
}

TEST(RankOracle, ZeroDifferencesAreDropped) {
  const std::vector<double> x{1, 2, 3, 4, 5, 6};
  const std::vector<double> y{1, 3, 3, 2, 5, 9};
  EXPECT_NEAR(st::wilcoxon_signed_rank_one_sided(x, y, Alternative::less).p_value,
              oracle::signed_rank_p(x, y, true), 1e-12);
}

TEST(RankOracle, DualityWithoutTies) {
  vpt::Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(1 + rng() % 6), y(1 + rng() % 6);
    for (auto& v : x) v = vpt::uniform01(rng);
    for (auto& v : y) v = vpt::uniform01(rng);
    const double pl = st::wilcoxon_rank_sum_one_sided(x, y, Alternative::less).p_value;
    const double pg = st::wilcoxon_rank_sum_one_sided(x, y, Alternative::greater).p_value;
    EXPECT_GE(pl + pg, 1.0 - 1e-12);
    // Swapping the samples swaps the tails.
    EXPECT_NEAR(st::wilcoxon_rank_sum_one_sided(y, x, Alternative::greater).p_value, pl, 1e-12);
  }
}

TEST(RankNormal, LargeSampleUsesApproximationCloseToExact) {
  vpt::Rng rng(9);
  std::vector<double> x(25), y(25);
  for (std::size_t i = 0; i < 25; ++i) {
    x[i] = vpt::normal(rng, 0.0, 1.0);
    y[i] = x[i] + vpt::normal(rng, 0.4, 1.0);
  }
  const auto exact = st::wilcoxon_signed_rank_one_sided(x, y, Alternative::less, 25);
  const auto approx = st::wilcoxon_signed_rank_one_sided(x, y, Alternative::less, 0);
  EXPECT_EQ(exact.method, st::TestMethod::signed_rank_exact);
  EXPECT_EQ(approx.method, st::TestMethod::signed_rank_normal);
  EXPECT_NEAR(exact.p_value, approx.p_value, 0.01);

  const auto rs_exact = st::wilcoxon_rank_sum_one_sided(std::span(x).first(7), std::span(y).first(7),
                                                        Alternative::less);
  const auto rs_approx = st::wilcoxon_rank_sum_one_sided(std::span(x).first(7), std::span(y).first(7),
                                                         Alternative::less, 0);
  EXPECT_EQ(rs_exact.method, st::TestMethod::rank_sum_exact);
  EXPECT_EQ(rs_approx.method, st::TestMethod::rank_sum_normal);
  EXPECT_NEAR(rs_exact.p_value, rs_approx.p_value, 0.03);
}

TEST(Ranks, AverageTies) {
  const auto r = st::average_ranks(std::vector<double>{10, 20, 20, 5});
  EXPECT_EQ(r, (std::vector<double>{2, 3.5, 3.5, 1}));
}

TEST(NaN, DropPairs) {
  const double nan = std::nan("");
  const auto p = st::drop_nan_pairs(std::vector<double>{1, nan, 3, 4}, std::vector<double>{1, 2, nan, 4});
  EXPECT_EQ(p.x, (std::vector<double>{1, 4}));
  EXPECT_EQ(p.dropped, 2u);
  EXPECT_EQ(st::drop_nan(std::vector<double>{nan, 2}).size(), 1u);
}

}  // namespace
