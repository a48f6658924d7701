#pragma once

#include <istream>
#include <string>
#include <vector>

namespace vpt {

struct CalibrationPoint {
  double haptic_intensity = 0.0;
  double peak_acceleration = 0.0;  // m/s^2
};

/// Measured hapticIntensity -> peak acceleration knots for a 230 Hz carrier
/// at hapticSharpness 1. Intensities strictly increase, accelerations never
/// decrease, and there are at least two knots.
class CalibrationTable {
 public:
  static constexpr double kCarrierFrequencyHz = 230.0;
  static constexpr double kHapticSharpness = 1.0;

  /// Validates the knots; throws non_monotone_table, parse_error (duplicate
  /// intensity) or too_few_points with 1-based row numbers in the message.
  explicit CalibrationTable(std::vector<CalibrationPoint> points);

  const std::vector<CalibrationPoint>& points() const { return points_; }
  double min_intensity() const { return points_.front().haptic_intensity; }
  double max_intensity() const { return points_.back().haptic_intensity; }

 private:
  std::vector<CalibrationPoint> points_;
};

/// Parses `haptic_intensity,peak_acceleration_m_s2` CSV; blank and `#` lines are skipped.
CalibrationTable parse_calibration(std::istream& in);
CalibrationTable load_calibration(const std::string& path);

/// Piecewise-linear interpolation; throws Error(out_of_range) outside the table.
double intensity_to_acceleration(const CalibrationTable& table, double level);

/// Smallest intensity whose interpolated acceleration equals `acceleration`.
double acceleration_to_intensity(const CalibrationTable& table, double acceleration);

}  // namespace vpt
