#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vpt/body_site.hpp"
#include "vpt/clinical.hpp"
#include "vpt/observer.hpp"
#include "vpt/random.hpp"
#include "vpt/session.hpp"
#include "vpt/staircase.hpp"

namespace vpt {

enum class AgeGroup { younger, older };
enum class Modality { smartphone, tuning_fork, monofilament };

inline constexpr std::array<Modality, 3> kAllModalities = {
    Modality::smartphone, Modality::tuning_fork, Modality::monofilament};

std::string_view to_string(AgeGroup g);
std::string_view to_string(Modality m);
/// hapticIntensity, s or gf.
std::string_view unit_of(Modality m);
std::optional<AgeGroup> parse_age_group(std::string_view s);
std::optional<Modality> parse_modality(std::string_view s);

/// Population parameters for one (age group, site) cell.
struct SiteParams {
  double alpha_mean = 0.2;  // smartphone 50% point, hapticIntensity
  double alpha_sd = 0.0;
  double fork_time_mean = 4.0;  // tuning-fork perception time, s
  double fork_time_sd = 0.0;
  double force_log10_mean = -1.2;  // log10 grams-force
  double force_log10_sd = 0.0;
};

struct GroupSpec {
  int n = 0;
  std::array<SiteParams, 6> sites{};  // indexed like kAllSites
  /// The first n_equipment_change participants of the group are flagged for a
  /// fork change, the next n_high_false_positive answer spuriously at
  /// high_false_positive_rate.
  int n_equipment_change = 0;
  int n_high_false_positive = 0;
};

struct CohortSpec {
  std::uint64_t seed = 1;
  GroupSpec younger;
  GroupSpec older;

  double observer_beta = 0.02;
  double observer_guess = 0.0;
  double observer_lapse = 0.0;
  double false_positive_rate = 0.005;
  double high_false_positive_rate = 0.5;
  double response_latency = 0.8;
  /// Correlation between a participant's latent sensitivity across modalities at one site.
  double latent_correlation = 0.3;
  double force_log10_spread = 0.05;
  TuningForkModel tuning_fork{100.0, 2.0, 128.0, 1.0, 0.1};
  /// Volar-wrist smartphone stimuli partly reach the fingers; off by default.
  bool w2_leakage = false;
  double w2_leakage_discount = 0.25;

  /// Throws Error(invalid_spec) naming the offending field.
  void validate() const;
};

CohortSpec cohort_spec_from_json_text(const std::string& text);
CohortSpec load_cohort_spec(const std::string& path);
std::string cohort_spec_to_json_text(const CohortSpec& spec);

struct SiteTruth {
  PsychometricObserver smartphone;
  double fork_threshold = 1.0;  // amplitude units of TuningForkModel
  double force_threshold_gf = 0.07;

  bool operator==(const SiteTruth&) const = default;
};

struct SimulatedParticipant {
  std::string id;
  AgeGroup age_group = AgeGroup::younger;
  std::array<SiteTruth, 6> sites{};
  double false_positive_rate = 0.0;
  bool equipment_change = false;

  bool operator==(const SimulatedParticipant&) const = default;
};

/// Younger participants first, then older; ids P01, P02, ...
std::vector<SimulatedParticipant> generate_cohort(const CohortSpec& spec, Rng& rng);

struct SiteMeasurement {
  std::string participant_id;
  AgeGroup age_group = AgeGroup::younger;
  BodySite site = BodySite::H1;
  Modality modality = Modality::smartphone;
  /// NaN for a saturated smartphone site; +inf when no monofilament was felt.
  double value = 0.0;
  bool excluded = false;
  std::string exclusion_reason;
};

bool operator==(const SiteMeasurement& a, const SiteMeasurement& b);

struct ParticipantLog {
  std::string participant_id;
  AgeGroup age_group = AgeGroup::younger;
  bool smartphone_session_first = true;
  bool monofilament_before_tuning_fork = true;
  std::array<std::vector<BodySite>, 3> site_order;  // indexed like kAllModalities
  std::array<int, 3> false_positives{};             // indexed like kAllModalities
  int smartphone_nan_trials = 0;
  bool equipment_change = false;
};

struct StudyConfig {
  SessionConfig session;
  StaircaseConfig staircase;
  MonofilamentSet monofilaments;
  int tuning_fork_reps = 5;
};

struct StudyRun {
  std::vector<SiteMeasurement> measurements;  // participant-major, then site, then modality
  std::vector<ParticipantLog> logs;
};

/// Simulates every participant at every site with all three modalities. Each
/// (participant, site, modality) draws from its own seed, so the randomized
/// orderings only change the log.
StudyRun run_virtual_study(const std::vector<SimulatedParticipant>& cohort,
                           const StudyConfig& config, const CohortSpec& spec, Rng& rng);

struct ExclusionRule {
  int max_false_positives = 3;
  bool exclude_equipment_change = true;
};

struct ExclusionResult {
  std::vector<SiteMeasurement> retained;
  std::vector<SiteMeasurement> excluded;  // exclusion_reason filled
};

/// Removes every measurement of a participant who exceeded the false-positive
/// limit in a clinical exam or used different equipment.
ExclusionResult apply_exclusions(const std::vector<SiteMeasurement>& measurements,
                                 const ExclusionRule& rule,
                                 const std::vector<ParticipantLog>& logs);

/// Retained and excluded rows back in the original order with flags set.
std::vector<SiteMeasurement> mark_exclusions(const std::vector<SiteMeasurement>& measurements,
                                             const ExclusionRule& rule,
                                             const std::vector<ParticipantLog>& logs);

/// participant_id,age_group,site,modality,value,unit,excluded,exclusion_reason
std::string export_measurements_csv(const std::vector<SiteMeasurement>& measurements);
std::vector<SiteMeasurement> import_measurements_csv(const std::string& text);

std::string export_study_log_json(const std::vector<ParticipantLog>& logs);

}  // namespace vpt
