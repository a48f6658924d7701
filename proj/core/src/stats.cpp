#include "vpt/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "vpt/error.hpp"

namespace vpt::stats {
namespace {

[[noreturn]] void degenerate(const char* what) { throw Error(ErrorKind::degenerate_sample, what); }

/// Twice the average rank of each value (always an integer), plus the tie
/// correction term sum(t^3 - t) over tie groups.
struct DoubledRanks {
  std::vector<std::int64_t> ranks;
  double tie_term = 0.0;
};

DoubledRanks doubled_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  DoubledRanks out;
  out.ranks.assign(n, 0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // positions i..j (0-based) share rank ((i+1) + (j+1)) / 2.
    const auto twice = static_cast<std::int64_t>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) out.ranks[order[k]] = twice;
    const double t = static_cast<double>(j - i + 1);
    out.tie_term += t * t * t - t;
    i = j + 1;
  }
  return out;
}

double clamp_probability(double p) { return std::clamp(p, 0.0, 1.0); }

double one_sided_normal_p(double z_corrected, Alternative alt) {
  return alt == Alternative::less ? normal_cdf(z_corrected) : normal_cdf(-z_corrected);
}

}  // namespace

std::string_view to_string(Alternative a) { return a == Alternative::less ? "less" : "greater"; }

std::string_view to_string(TestMethod m) {
  switch (m) {
    case TestMethod::paired_t: return "paired_t";
    case TestMethod::welch_t: return "welch_t";
    case TestMethod::pooled_t: return "pooled_t";
    case TestMethod::signed_rank_exact: return "wilcoxon_signed_rank_exact";
    case TestMethod::signed_rank_normal: return "wilcoxon_signed_rank_normal";
    case TestMethod::rank_sum_exact: return "wilcoxon_rank_sum_exact";
    case TestMethod::rank_sum_normal: return "wilcoxon_rank_sum_normal";
  }
  return "?";
}

std::string_view to_string(EffectKind k) {
  return k == EffectKind::cohens_d ? "cohens_d" : "wilcoxon_r";
}

double mean(std::span<const double> x) {
  if (x.empty()) throw Error(ErrorKind::empty_sample, "mean of empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance(std::span<const double> x) {
  if (x.size() < 2) degenerate("variance needs n >= 2");
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double students_t_cdf(double t, double df) {
  return boost::math::cdf(boost::math::students_t_distribution<double>(df), t);
}

double students_t_sf(double t, double df) {
  return boost::math::cdf(boost::math::complement(boost::math::students_t_distribution<double>(df), t));
}

TestResult t_test_one_sided(std::span<const double> x, std::span<const double> y, bool paired,
                            Alternative alternative, TVariant variant) {
  TestResult r;
  r.alternative = alternative;
  if (paired) {
    if (x.size() != y.size()) throw Error(ErrorKind::length_mismatch, "paired samples differ in length");
    if (x.size() < 2) degenerate("paired t test needs n >= 2");
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = x[i] - y[i];
    const double v = variance(d);
    if (!(v > 0.0)) degenerate("zero variance of differences");
    const auto n = static_cast<double>(d.size());
    r.statistic = mean(d) / std::sqrt(v / n);
    r.df = n - 1.0;
    r.method = TestMethod::paired_t;
    r.n = d.size();
  } else {
    if (x.size() < 2 || y.size() < 2) degenerate("unpaired t test needs n >= 2 per group");
    const double vx = variance(x);
    const double vy = variance(y);
    const auto nx = static_cast<double>(x.size());
    const auto ny = static_cast<double>(y.size());
    const double diff = mean(x) - mean(y);
    if (variant == TVariant::welch) {
      const double a = vx / nx;
      const double b = vy / ny;
      if (!(a + b > 0.0)) degenerate("zero variance in both groups");
      r.statistic = diff / std::sqrt(a + b);
      r.df = (a + b) * (a + b) / (a * a / (nx - 1.0) + b * b / (ny - 1.0));
      r.method = TestMethod::welch_t;
    } else {
      const double pooled = ((nx - 1.0) * vx + (ny - 1.0) * vy) / (nx + ny - 2.0);
      if (!(pooled > 0.0)) degenerate("zero pooled variance");
      r.statistic = diff / std::sqrt(pooled * (1.0 / nx + 1.0 / ny));
      r.df = nx + ny - 2.0;
      r.method = TestMethod::pooled_t;
    }
    r.n = x.size() + y.size();
  }
  r.p_value = alternative == Alternative::less ? students_t_cdf(r.statistic, r.df)
                                               : students_t_sf(r.statistic, r.df);
  return r;
}

TestResult wilcoxon_signed_rank_one_sided(std::span<const double> x, std::span<const double> y,
                                          Alternative alternative, std::size_t exact_max_n) {
  if (x.size() != y.size()) throw Error(ErrorKind::length_mismatch, "paired samples differ in length");
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != y[i]) d.push_back(x[i] - y[i]);
  }
  if (d.empty()) throw Error(ErrorKind::all_zero_differences, "every difference is zero");

  std::vector<double> magnitude(d.size());
  std::transform(d.begin(), d.end(), magnitude.begin(), [](double v) { return std::abs(v); });
  const DoubledRanks ranks = doubled_ranks(magnitude);

  std::int64_t w2 = 0;  // twice W+
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > 0) w2 += ranks.ranks[i];
  }

  TestResult r;
  r.alternative = alternative;
  r.statistic = static_cast<double>(w2) / 2.0;
  r.n = d.size();
  const auto n = static_cast<double>(d.size());
  const double mu = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ranks.tie_term / 48.0;
  const double sigma = std::sqrt(var);
  r.z = sigma > 0.0 ? (r.statistic - mu) / sigma : 0.0;

  if (d.size() <= std::min<std::size_t>(exact_max_n, 62)) {
    const std::int64_t total = std::accumulate(ranks.ranks.begin(), ranks.ranks.end(), std::int64_t{0});
    std::vector<std::uint64_t> count(static_cast<std::size_t>(total) + 1, 0);
    count[0] = 1;
    std::int64_t reach = 0;
    for (std::int64_t rank : ranks.ranks) {
      for (std::int64_t s = reach; s >= 0; --s) {
        if (count[s] != 0) count[s + rank] += count[s];
      }
      reach += rank;
    }
    std::uint64_t tail = 0;
    for (std::int64_t s = 0; s <= total; ++s) {
      const bool in_tail = alternative == Alternative::less ? s <= w2 : s >= w2;
      if (in_tail) tail += count[s];
    }
    r.p_value = static_cast<double>(tail) / std::ldexp(1.0, static_cast<int>(d.size()));
    r.method = TestMethod::signed_rank_exact;
  } else {
    if (!(sigma > 0.0)) degenerate("zero variance of the signed-rank statistic");
    const double correction = alternative == Alternative::less ? -0.5 : 0.5;
    r.p_value = one_sided_normal_p((r.statistic - mu - correction) / sigma, alternative);
    r.method = TestMethod::signed_rank_normal;
  }
  r.p_value = clamp_probability(r.p_value);
  return r;
}

TestResult wilcoxon_rank_sum_one_sided(std::span<const double> x, std::span<const double> y,
                                       Alternative alternative, std::size_t exact_max_n) {
  if (x.empty() || y.empty()) throw Error(ErrorKind::empty_sample, "rank sum test needs both samples");
  std::vector<double> pooled(x.begin(), x.end());
  pooled.insert(pooled.end(), y.begin(), y.end());
  const DoubledRanks ranks = doubled_ranks(pooled);
  const std::size_t nx = x.size();
  const std::size_t total_n = pooled.size();

  std::int64_t w2 = 0;
  for (std::size_t i = 0; i < nx; ++i) w2 += ranks.ranks[i];

  TestResult r;
  r.alternative = alternative;
  r.statistic = static_cast<double>(w2) / 2.0;
  r.n = total_n;
  const auto fx = static_cast<double>(nx);
  const auto fy = static_cast<double>(y.size());
  const auto fn = static_cast<double>(total_n);
  const double mu = fx * (fn + 1.0) / 2.0;
  const double var = fx * fy / 12.0 * ((fn + 1.0) - ranks.tie_term / (fn * (fn - 1.0)));
  const double sigma = var > 0.0 ? std::sqrt(var) : 0.0;
  r.z = sigma > 0.0 ? (r.statistic - mu) / sigma : 0.0;

  if (total_n <= std::min<std::size_t>(exact_max_n, 60)) {
    // count[k][s]: subsets of size k with doubled-rank sum s.
    const std::int64_t total = std::accumulate(ranks.ranks.begin(), ranks.ranks.end(), std::int64_t{0});
    const auto width = static_cast<std::size_t>(total) + 1;
    std::vector<std::vector<std::uint64_t>> count(nx + 1, std::vector<std::uint64_t>(width, 0));
    count[0][0] = 1;
    for (std::size_t i = 0; i < total_n; ++i) {
      const std::int64_t rank = ranks.ranks[i];
      for (std::size_t k = std::min(nx, i + 1); k >= 1; --k) {
        for (std::int64_t s = total - rank; s >= 0; --s) {
          if (count[k - 1][s] != 0) count[k][s + rank] += count[k - 1][s];
        }
      }
    }
    std::uint64_t tail = 0;
    std::uint64_t all = 0;
    for (std::int64_t s = 0; s <= total; ++s) {
      all += count[nx][s];
      const bool in_tail = alternative == Alternative::less ? s <= w2 : s >= w2;
      if (in_tail) tail += count[nx][s];
    }
    r.p_value = static_cast<double>(tail) / static_cast<double>(all);
    r.method = TestMethod::rank_sum_exact;
  } else {
    if (!(sigma > 0.0)) degenerate("zero variance of the rank-sum statistic");
    const double correction = alternative == Alternative::less ? -0.5 : 0.5;
    r.p_value = one_sided_normal_p((r.statistic - mu - correction) / sigma, alternative);
    r.method = TestMethod::rank_sum_normal;
  }
  r.p_value = clamp_probability(r.p_value);
  return r;
}

double bonferroni(double p, int m) {
  if (m < 1) throw Error(ErrorKind::invalid_config, "Bonferroni family size must be >= 1");
  return std::min(1.0, static_cast<double>(m) * p);
}

TestResult with_bonferroni(TestResult result, int m) {
  result.p_adjusted = bonferroni(result.p_value, m);
  result.comparisons = m;
  return result;
}

EffectSize cohens_d(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 2 || y.size() < 2) degenerate("Cohen's d needs n >= 2 per group");
  const auto nx = static_cast<double>(x.size());
  const auto ny = static_cast<double>(y.size());
  const double pooled = ((nx - 1.0) * variance(x) + (ny - 1.0) * variance(y)) / (nx + ny - 2.0);
  if (!(pooled > 0.0)) degenerate("zero pooled variance");
  return {EffectKind::cohens_d, (mean(x) - mean(y)) / std::sqrt(pooled)};
}

EffectSize wilcoxon_r(double z, std::size_t n) {
  if (n < 1) throw Error(ErrorKind::degenerate_sample, "wilcoxon r needs n >= 1");
  return {EffectKind::wilcoxon_r, std::clamp(z / std::sqrt(static_cast<double>(n)), -1.0, 1.0)};
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::length_mismatch, "correlation inputs differ in length");
  if (x.size() < 3) degenerate("correlation needs n >= 3");
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) degenerate("zero variance in a correlation input");
  Correlation c;
  c.n = x.size();
  c.coefficient = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(c.n) - 2.0;
  const double one_minus = 1.0 - c.coefficient * c.coefficient;
  if (one_minus <= 0.0) {
    c.p_value = 0.0;
  } else {
    const double t = std::abs(c.coefficient) * std::sqrt(df / one_minus);
    c.p_value = clamp_probability(2.0 * students_t_sf(t, df));
  }
  return c;
}

std::vector<double> average_ranks(std::span<const double> values) {
  const DoubledRanks r = doubled_ranks(values);
  std::vector<double> out(r.ranks.size());
  std::transform(r.ranks.begin(), r.ranks.end(), out.begin(),
                 [](std::int64_t v) { return static_cast<double>(v) / 2.0; });
  return out;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::length_mismatch, "correlation inputs differ in length");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

double quantile_type1(std::span<const double> sample, double p) {
  if (sample.empty()) throw Error(ErrorKind::empty_sample, "quantile of empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::out_of_range, "p must lie in [0, 1]");
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  const auto n = static_cast<double>(sorted.size());
  // Same fuzz as R's quantile() so n * p landing a hair off an integer still counts as integral.
  const double fuzz = 4.0 * std::numeric_limits<double>::epsilon();
  const double np = n * p;
  const double j = std::floor(np + fuzz);
  const bool above = np > j + fuzz;
  const double k = above ? j + 1.0 : j;  // 1-based order statistic
  const auto index = static_cast<std::size_t>(std::clamp(k, 1.0, n)) - 1;
  return sorted[index];
}

GroupSummary group_summary(std::span<const double> sample, SummaryMode mode) {
  if (sample.empty()) throw Error(ErrorKind::empty_sample, "summary of empty sample");
  GroupSummary g;
  g.mode = mode;
  g.n = sample.size();
  if (mode == SummaryMode::continuous) {
    g.mean = mean(sample);
    if (sample.size() == 1) {
      g.sd = 0.0;
      g.small_n = true;
    } else {
      g.sd = std::sqrt(variance(sample));
    }
  } else {
    g.median = quantile_type1(sample, 0.5);
    g.q25 = quantile_type1(sample, 0.25);
    g.q75 = quantile_type1(sample, 0.75);
    g.small_n = sample.size() == 1;
  }
  return g;
}

PairedSample drop_nan_pairs(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::length_mismatch, "paired samples differ in length");
  PairedSample out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isnan(x[i]) || std::isnan(y[i])) {
      ++out.dropped;
    } else {
      out.x.push_back(x[i]);
      out.y.push_back(y[i]);
    }
  }
  return out;
}

std::vector<double> drop_nan(std::span<const double> x) {
  std::vector<double> out;
  for (double v : x) {
    if (!std::isnan(v)) out.push_back(v);
  }
  return out;
}

}  // namespace vpt::stats
