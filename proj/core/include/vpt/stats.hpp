#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace vpt::stats {

enum class Alternative { less, greater };

enum class TestMethod {
  paired_t,
  welch_t,
  pooled_t,
  signed_rank_exact,
  signed_rank_normal,
  rank_sum_exact,
  rank_sum_normal,
};

std::string_view to_string(Alternative a);
std::string_view to_string(TestMethod m);

struct TestResult {
  double statistic = 0.0;  // t, W+ (signed rank) or rank sum of x
  double p_value = 1.0;
  std::optional<double> p_adjusted;
  std::optional<int> comparisons;  // Bonferroni family size, when applied
  Alternative alternative = Alternative::less;
  TestMethod method = TestMethod::paired_t;
  double df = 0.0;  // t tests only
  /// Normal score without continuity correction (rank tests only), used for effect size r.
  double z = 0.0;
  /// Observations entering the test: pairs with nonzero difference (signed rank),
  /// pairs (paired t), or n_x + n_y.
  std::size_t n = 0;
};

enum class EffectKind { cohens_d, wilcoxon_r };
std::string_view to_string(EffectKind k);

struct EffectSize {
  EffectKind kind = EffectKind::cohens_d;
  double value = 0.0;
};

enum class SummaryMode { continuous, discrete };

/// Continuous: mean and sample SD. Discrete: median and type-1 quartiles.
struct GroupSummary {
  SummaryMode mode = SummaryMode::continuous;
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  /// n == 1: the SD is reported as 0 instead of failing.
  bool small_n = false;
};

struct Correlation {
  double coefficient = 0.0;
  double p_value = 1.0;  // two-sided
  std::size_t n = 0;
};

enum class TVariant { welch, pooled };

/// One-sided Student t test. Unpaired defaults to Welch's unequal-variance form.
/// Throws degenerate_sample (n < 2 or zero variance) and length_mismatch.
TestResult t_test_one_sided(std::span<const double> x, std::span<const double> y, bool paired,
                            Alternative alternative, TVariant variant = TVariant::welch);

inline constexpr std::size_t kSignedRankExactMaxN = 25;
inline constexpr std::size_t kRankSumExactMaxN = 14;

/// Signed-rank test on x - y. Zero differences are dropped and tied |d| get
/// average ranks. Exact (conditional on ties) when the remaining n <= exact_max_n,
/// otherwise normal with continuity and tie corrections.
/// Throws length_mismatch or all_zero_differences.
TestResult wilcoxon_signed_rank_one_sided(std::span<const double> x, std::span<const double> y,
                                          Alternative alternative,
                                          std::size_t exact_max_n = kSignedRankExactMaxN);

/// Rank-sum test; statistic is the sum of x's average ranks in the pooled sample.
/// Exact when n_x + n_y <= exact_max_n. Throws empty_sample.
TestResult wilcoxon_rank_sum_one_sided(std::span<const double> x, std::span<const double> y,
                                       Alternative alternative,
                                       std::size_t exact_max_n = kRankSumExactMaxN);

/// min(1, m * p).
double bonferroni(double p, int m);
TestResult with_bonferroni(TestResult result, int m);

/// (mean x - mean y) / pooled SD.
EffectSize cohens_d(std::span<const double> x, std::span<const double> y);

/// z / sqrt(n), clamped to [-1, 1].
EffectSize wilcoxon_r(double z, std::size_t n);

/// Sample correlation with a two-sided p from t = r sqrt((n-2)/(1-r^2)).
Correlation pearson(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of average ranks.
Correlation spearman(std::span<const double> x, std::span<const double> y);

/// Inverse empirical CDF (R type 1); always returns a sample element.
double quantile_type1(std::span<const double> sample, double p);

GroupSummary group_summary(std::span<const double> sample, SummaryMode mode);

/// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> values);

double mean(std::span<const double> x);
/// Sample variance (n - 1 denominator).
double variance(std::span<const double> x);

double normal_cdf(double z);
double students_t_cdf(double t, double df);
/// Upper tail P(T > t), computed without cancellation.
double students_t_sf(double t, double df);

/// Removes entries that are NaN in either input; returns the kept pairs and the dropped count.
struct PairedSample {
  std::vector<double> x;
  std::vector<double> y;
  std::size_t dropped = 0;
};
PairedSample drop_nan_pairs(std::span<const double> x, std::span<const double> y);
std::vector<double> drop_nan(std::span<const double> x);

}  // namespace vpt::stats
