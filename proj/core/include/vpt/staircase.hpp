#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace vpt {

/// One-up/one-down staircase parameters. Levels are hapticIntensity values.
struct StaircaseConfig {
  double initial_level = 0.05;
  double step_size = 0.05;
  double max_level = 1.0;
  double min_level = 0.05;
  int target_reversals = 8;
  int ceiling_misses_for_nan = 3;

  /// Throws Error(invalid_config) naming the first violated field.
  void validate() const;

  bool operator==(const StaircaseConfig&) const = default;
};

enum class Direction { ascending, descending };
enum class StaircaseStatus { running, complete, saturated };

/// A presented level and whether it was detected. Levels are held as integer
/// multiples of the step size so repeated stepping never drifts.
struct Presentation {
  std::int64_t step = 0;
  bool detected = false;

  bool operator==(const Presentation&) const = default;
};

struct ReversalPoint {
  /// Sum of the triggering level and the level before it, in steps
  /// (i.e. the reversal value in half-steps).
  std::int64_t half_steps = 0;
  std::size_t triggering_index = 0;

  bool operator==(const ReversalPoint&) const = default;
};

struct TrialThreshold {
  double value = 0.0;  // NaN when saturated
  std::vector<double> reversal_values;
  bool saturated = false;
};

struct SiteThreshold {
  double value = 0.0;  // NaN when every trial was NaN
  std::size_t trial_count = 0;
  std::size_t nan_count = 0;
};

class StaircaseState {
 public:
  const StaircaseConfig& config() const { return config_; }
  double current_level() const { return level_of(current_step_); }
  std::int64_t current_step() const { return current_step_; }
  Direction direction() const { return direction_; }
  StaircaseStatus status() const { return status_; }
  bool finished() const { return status_ != StaircaseStatus::running; }
  int consecutive_ceiling_misses() const { return ceiling_misses_; }
  const std::vector<Presentation>& history() const { return history_; }
  const std::vector<ReversalPoint>& reversals() const { return reversals_; }

  double level_of(std::int64_t step) const { return static_cast<double>(step) * config_.step_size; }
  double reversal_value(const ReversalPoint& r) const {
    return static_cast<double>(r.half_steps) * config_.step_size / 2.0;
  }
  /// Level of history entry `i`.
  double presented_level(std::size_t i) const { return level_of(history_.at(i).step); }

  bool operator==(const StaircaseState&) const = default;

 private:
  friend StaircaseState init_staircase(const StaircaseConfig& config);
  friend StaircaseState apply_response(StaircaseState state, bool detected);

  StaircaseConfig config_;
  std::int64_t min_step_ = 0;
  std::int64_t max_step_ = 0;
  std::int64_t current_step_ = 0;
  Direction direction_ = Direction::ascending;
  std::vector<Presentation> history_;
  std::vector<ReversalPoint> reversals_;
  int ceiling_misses_ = 0;
  StaircaseStatus status_ = StaircaseStatus::running;
};

StaircaseState init_staircase(const StaircaseConfig& config);

/// Records a response at the current level and moves to the next level.
/// Throws Error(staircase_finished) once the staircase is complete or saturated.
StaircaseState apply_response(StaircaseState state, bool detected);

/// Mean of the reversal values, or NaN for a saturated staircase.
/// Throws Error(staircase_incomplete) while still running.
TrialThreshold compute_threshold(const StaircaseState& state);

/// Mean over the non-NaN trial thresholds of one site.
SiteThreshold aggregate_site_threshold(std::span<const TrialThreshold> trials);

/// Feeds recorded responses through a fresh staircase.
StaircaseState replay(const StaircaseConfig& config, const std::vector<bool>& responses);

}  // namespace vpt
