#pragma once

#include <string>

#include "vpt/random.hpp"

namespace vpt {

/// Simulated participant with a logistic psychometric function
///   p(I) = guess + (1 - guess - lapse) * sigmoid((I - alpha) / beta).
struct PsychometricObserver {
  double alpha = 0.3;
  double beta = 0.02;
  double guess = 0.0;
  double lapse = 0.0;
  /// Probability of a spurious "yes" per response opportunity with no stimulus.
  double false_positive_rate = 0.0;

  void validate() const;
  bool operator==(const PsychometricObserver&) const = default;
};

/// Detects exactly when level >= hard_threshold.
struct DeterministicObserver {
  double hard_threshold = 0.0;

  bool detects(double level) const { return level >= hard_threshold; }
};

double detect_probability(const PsychometricObserver& observer, double level);

bool sample_response(const PsychometricObserver& observer, double level, Rng& rng);

/// Level at which detect_probability is exactly 0.5.
/// Throws Error(unattainable_level) when 0.5 is outside (guess, 1 - lapse).
double fifty_percent_point(const PsychometricObserver& observer);

/// Reads `{alpha, beta, guess, lapse, false_positive_rate}` JSON.
PsychometricObserver load_observer(const std::string& path);
PsychometricObserver observer_from_json_text(const std::string& text);

}  // namespace vpt
