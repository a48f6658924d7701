#include "vpt/staircase.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vpt/error.hpp"

namespace vpt {
namespace {

constexpr double kGridTolerance = 1e-9;

std::int64_t to_steps(double level, double step, const char* field) {
  const double k = std::round(level / step);
  if (std::abs(k * step - level) > kGridTolerance) {
    throw Error(ErrorKind::invalid_config,
                std::string(field) + " is not a multiple of step_size");
  }
  return static_cast<std::int64_t>(k);
}

void require(bool ok, const char* field, const char* what) {
  if (!ok) throw Error(ErrorKind::invalid_config, std::string(field) + " " + what);
}

}  // namespace

void StaircaseConfig::validate() const {
  require(std::isfinite(step_size) && step_size > 0.0, "step_size", "must be > 0");
  require(std::isfinite(min_level) && min_level > 0.0, "min_level", "must be > 0");
  require(initial_level >= min_level, "initial_level", "must be >= min_level");
  require(max_level >= initial_level, "initial_level", "must be <= max_level");
  require(max_level <= 1.0, "max_level", "must be <= 1.0");
  require(target_reversals >= 2, "target_reversals", "must be >= 2");
  require(ceiling_misses_for_nan >= 1, "ceiling_misses_for_nan", "must be >= 1");
  to_steps(initial_level, step_size, "initial_level");
  to_steps(min_level, step_size, "min_level");
  to_steps(max_level, step_size, "max_level");
}

StaircaseState init_staircase(const StaircaseConfig& config) {
  config.validate();
  StaircaseState state;
  state.config_ = config;
  state.min_step_ = to_steps(config.min_level, config.step_size, "min_level");
  state.max_step_ = to_steps(config.max_level, config.step_size, "max_level");
  state.current_step_ = to_steps(config.initial_level, config.step_size, "initial_level");
  return state;
}

StaircaseState apply_response(StaircaseState state, bool detected) {
  if (state.finished()) {
    throw Error(ErrorKind::staircase_finished, "response applied after the staircase ended");
  }
  const std::size_t index = state.history_.size();
  state.history_.push_back({state.current_step_, detected});

  const bool reversal = (detected && state.direction_ == Direction::ascending) ||
                        (!detected && state.direction_ == Direction::descending);
  if (reversal) {
    // No prior response at index 0: the reversal value is the level itself.
    const std::int64_t prior =
        index == 0 ? state.current_step_ : state.history_[index - 1].step;
    state.reversals_.push_back({state.current_step_ + prior, index});
    state.direction_ = state.direction_ == Direction::ascending ? Direction::descending
                                                                : Direction::ascending;
  }

  if (!detected && state.current_step_ == state.max_step_) {
    ++state.ceiling_misses_;
  } else {
    state.ceiling_misses_ = 0;
  }

  const std::int64_t delta = state.direction_ == Direction::ascending ? 1 : -1;
  state.current_step_ = std::clamp(state.current_step_ + delta, state.min_step_, state.max_step_);

  if (state.ceiling_misses_ >= state.config_.ceiling_misses_for_nan) {
    state.status_ = StaircaseStatus::saturated;
  } else if (static_cast<int>(state.reversals_.size()) == state.config_.target_reversals) {
    state.status_ = StaircaseStatus::complete;
  }
  return state;
}

TrialThreshold compute_threshold(const StaircaseState& state) {
  if (state.status() == StaircaseStatus::running) {
    throw Error(ErrorKind::staircase_incomplete, "threshold requested while running");
  }
  TrialThreshold out;
  out.reversal_values.reserve(state.reversals().size());
  std::int64_t half_sum = 0;
  for (const auto& r : state.reversals()) {
    out.reversal_values.push_back(state.reversal_value(r));
    half_sum += r.half_steps;
  }
  if (state.status() == StaircaseStatus::saturated) {
    out.saturated = true;
    out.value = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const auto n = static_cast<double>(state.reversals().size());
  out.value = static_cast<double>(half_sum) * state.config().step_size / (2.0 * n);
  return out;
}

SiteThreshold aggregate_site_threshold(std::span<const TrialThreshold> trials) {
  if (trials.empty()) throw Error(ErrorKind::empty_input, "no trials to aggregate");
  SiteThreshold out;
  out.trial_count = trials.size();
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& t : trials) {
    if (std::isnan(t.value)) {
      ++out.nan_count;
    } else {
      sum += t.value;
      ++used;
    }
  }
  out.value = used == 0 ? std::numeric_limits<double>::quiet_NaN()
                        : sum / static_cast<double>(used);
  return out;
}

StaircaseState replay(const StaircaseConfig& config, const std::vector<bool>& responses) {
  StaircaseState state = init_staircase(config);
  for (bool r : responses) state = apply_response(std::move(state), r);
  return state;
}

}  // namespace vpt
