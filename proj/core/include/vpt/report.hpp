#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vpt/body_site.hpp"
#include "vpt/stats.hpp"
#include "vpt/study.hpp"

namespace vpt {

struct AnalysisConfig {
  /// Bonferroni family sizes. Finger vs toe is corrected over the three
  /// modalities, younger vs older over the two sites.
  int site_comparisons = 3;
  int age_comparisons = 2;
  std::size_t signed_rank_exact_max_n = stats::kSignedRankExactMaxN;
  std::size_t rank_sum_exact_max_n = stats::kRankSumExactMaxN;
  stats::TVariant unpaired_variant = stats::TVariant::welch;
  BodySite finger = BodySite::H1;
  BodySite toe = BodySite::F;
};

struct SummaryCell {
  BodySite site = BodySite::H1;
  Modality modality = Modality::smartphone;
  std::optional<AgeGroup> group;  // nullopt = everyone
  std::optional<stats::GroupSummary> summary;  // nullopt when no value survived
  std::size_t dropped = 0;  // NaN values left out
};

enum class ComparisonKind { site, age };

struct Comparison {
  ComparisonKind kind = ComparisonKind::site;
  Modality modality = Modality::smartphone;
  /// Site comparisons: x = finger, y = toe. Age comparisons: x = younger, y = older at `site`.
  BodySite site = BodySite::H1;
  std::string x_label;
  std::string y_label;
  stats::Alternative alternative = stats::Alternative::less;
  int comparisons = 1;
  std::size_t n_x = 0;
  std::size_t n_y = 0;
  std::size_t dropped = 0;
  std::optional<stats::TestResult> result;
  std::optional<stats::EffectSize> effect;
  std::string skipped_reason;  // empty when the test ran
};

enum class CorrelationMethod { pearson, spearman };

struct CorrelationRow {
  Modality a = Modality::smartphone;
  Modality b = Modality::tuning_fork;
  CorrelationMethod method = CorrelationMethod::pearson;
  /// Empty = all sites pooled; otherwise the sites included.
  std::vector<BodySite> sites;
  std::size_t dropped = 0;
  std::optional<stats::Correlation> result;
  std::string skipped_reason;
};

struct ExclusionEntry {
  std::string participant_id;
  AgeGroup age_group = AgeGroup::younger;
  std::string reason;
};

struct StudyReport {
  std::size_t participants_retained = 0;
  std::size_t participants_younger = 0;
  std::size_t participants_older = 0;
  std::vector<ExclusionEntry> exclusions;
  std::vector<SummaryCell> summaries;      // site x modality x {all, younger, older}
  std::vector<Comparison> comparisons;     // 3 site, then 6 age
  std::vector<CorrelationRow> correlations;  // 3 pooled, then 3 finger+toe
};

/// Runs the full comparison battery on the measurements not flagged as excluded.
/// Cells without enough data are reported as skipped. Throws Error(empty_input)
/// when nothing is retained.
StudyReport analyze_study(const std::vector<SiteMeasurement>& measurements,
                          const AnalysisConfig& config = {});

std::string_view to_string(ComparisonKind k);
std::string_view to_string(CorrelationMethod m);

/// Deterministic JSON; NaN and infinite numbers become null.
std::string report_to_json(const StudyReport& report);
/// Fixed-width text tables for the terminal.
std::string report_to_table(const StudyReport& report);

}  // namespace vpt
