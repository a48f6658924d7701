#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vpt/body_site.hpp"
#include "vpt/random.hpp"

namespace vpt {

/// Exponentially decaying 128 Hz fork, A(t) = A0 * exp(-t / tau), timed with
/// a watch of `time_resolution` seconds.
struct TuningForkModel {
  double initial_amplitude = 100.0;
  double decay_constant = 2.0;  // seconds
  double frequency = 128.0;
  double time_resolution = 1.0;
  /// SD of the log strike multiplier applied to A0 on each strike; 0 = repeatable strikes.
  double strike_variability = 0.0;

  void validate() const;
};

/// tau * ln(amplitude_scale * A0 / threshold), clipped below at 0 and not quantized.
double perception_time_continuous(const TuningForkModel& model, double threshold,
                                  double amplitude_scale = 1.0);

/// One timed strike, quantized to the watch resolution.
double simulate_tuning_fork_time(const TuningForkModel& model, double threshold, Rng& rng);

double average_perception_time(std::span<const double> times);

/// Monofilament evaluator sizes in grams-force, strictly increasing.
struct MonofilamentSet {
  std::vector<double> sizes;
  /// Sizes at or below this get `multi_touch_count` touches, larger sizes get one.
  double multi_touch_boundary = 1.0;
  int multi_touch_count = 3;

  void validate() const;
  int touches_for(double size) const;
  /// Index of `size` in the set; nullopt when absent.
  std::optional<std::size_t> index_of(double size) const;
};

MonofilamentSet monofilament_set_from_json_text(const std::string& text);
MonofilamentSet load_monofilament_set(const std::string& path);

/// Starting size deemed normal for a site class (0.07 gf hands / dorsal feet, 0.4 gf plantar).
double monofilament_start_size(SiteClass site_class);

struct TouchRecord {
  double size = 0.0;
  int touch_index = 0;
  bool detected = false;

  bool operator==(const TouchRecord&) const = default;
};

struct MonofilamentResult {
  std::optional<double> threshold;  // nullopt: nothing up to the largest size was felt
  double start_size = 0.0;
  std::vector<TouchRecord> touch_log;
  int false_positive_count = 0;

  bool none_felt() const { return !threshold.has_value(); }
  /// Throws Error(none_felt) for the sentinel.
  double value() const;
};

/// Participant side of the monofilament exam.
struct ForceResponder {
  std::function<bool(double size_gf, Rng&)> feels;
  /// Probability of a "yes" during the sham interval before each touch.
  double false_positive_rate = 0.0;
};

/// Feels every size >= threshold_gf.
std::function<bool(double, Rng&)> deterministic_force_observer(double threshold_gf);

/// Logistic in log10 force; spread 0 reduces to the deterministic observer.
std::function<bool(double, Rng&)> logistic_force_observer(double threshold_gf,
                                                          double log10_spread);

/// Descends from a felt start until a size is not felt (returning the last
/// felt size) or ascends from an unfelt start to the first felt size.
/// A size counts as felt on the first detected touch.
MonofilamentResult run_monofilament_exam(const MonofilamentSet& set,
                                         const ForceResponder& responder, double start_size,
                                         Rng& rng);

}  // namespace vpt
