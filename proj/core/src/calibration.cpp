#include "vpt/calibration.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string_view>

#include "vpt/error.hpp"

namespace vpt {
namespace {

constexpr std::string_view kHeader = "haptic_intensity,peak_acceleration_m_s2";

double parse_number(std::string_view field, std::size_t row) {
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\r')) field.remove_suffix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(value)) {
    throw Error(ErrorKind::parse_error,
                "row " + std::to_string(row) + ": not a number '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

CalibrationTable::CalibrationTable(std::vector<CalibrationPoint> points)
    : points_(std::move(points)) {
  if (points_.size() < 2) {
    throw Error(ErrorKind::too_few_points,
                "need at least 2 points, got " + std::to_string(points_.size()));
  }
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& p = points_[i];
    if (p.haptic_intensity < 0.0 || p.haptic_intensity > 1.0) {
      throw Error(ErrorKind::parse_error,
                  "row " + std::to_string(i + 1) + ": haptic_intensity outside [0, 1]");
    }
    if (i == 0) continue;
    const auto& prev = points_[i - 1];
    if (p.haptic_intensity == prev.haptic_intensity) {
      throw Error(ErrorKind::parse_error, "row " + std::to_string(i + 1) +
                                              ": duplicate haptic_intensity of row " +
                                              std::to_string(i));
    }
    if (p.haptic_intensity < prev.haptic_intensity) {
      throw Error(ErrorKind::non_monotone_table,
                  "row " + std::to_string(i + 1) + ": haptic_intensity decreases");
    }
    if (p.peak_acceleration < prev.peak_acceleration) {
      throw Error(ErrorKind::non_monotone_table,
                  "row " + std::to_string(i + 1) + ": peak_acceleration decreases");
    }
  }
}

CalibrationTable parse_calibration(std::istream& in) {
  std::string line;
  do {
    if (!std::getline(in, line)) throw Error(ErrorKind::parse_error, "empty calibration file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
  } while (line.empty() || line.front() == '#');
  if (line != kHeader) {
    throw Error(ErrorKind::parse_error, "expected header '" + std::string(kHeader) + "'");
  }
  std::vector<CalibrationPoint> points;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r" || line.front() == '#') continue;
    ++row;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw Error(ErrorKind::parse_error, "row " + std::to_string(row) + ": expected two columns");
    }
    const std::string_view view(line);
    points.push_back({parse_number(view.substr(0, comma), row),
                      parse_number(view.substr(comma + 1), row)});
  }
  return CalibrationTable(std::move(points));
}

CalibrationTable load_calibration(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path);
  return parse_calibration(in);
}

double intensity_to_acceleration(const CalibrationTable& table, double level) {
  const auto& pts = table.points();
  if (!(level >= table.min_intensity() && level <= table.max_intensity())) {
    throw Error(ErrorKind::out_of_range, "level outside calibrated intensity range");
  }
  const auto hi = std::lower_bound(pts.begin(), pts.end(), level,
                                   [](const CalibrationPoint& p, double v) {
                                     return p.haptic_intensity < v;
                                   });
  if (hi->haptic_intensity == level) return hi->peak_acceleration;
  const auto lo = hi - 1;
  const double w = (level - lo->haptic_intensity) / (hi->haptic_intensity - lo->haptic_intensity);
  return lo->peak_acceleration + w * (hi->peak_acceleration - lo->peak_acceleration);
}

double acceleration_to_intensity(const CalibrationTable& table, double acceleration) {
  const auto& pts = table.points();
  if (!(acceleration >= pts.front().peak_acceleration &&
        acceleration <= pts.back().peak_acceleration)) {
    throw Error(ErrorKind::out_of_range, "acceleration outside calibrated range");
  }
  const auto hi = std::lower_bound(pts.begin(), pts.end(), acceleration,
                                   [](const CalibrationPoint& p, double v) {
                                     return p.peak_acceleration < v;
                                   });
  if (hi->peak_acceleration == acceleration) return hi->haptic_intensity;
  const auto lo = hi - 1;
  const double w =
      (acceleration - lo->peak_acceleration) / (hi->peak_acceleration - lo->peak_acceleration);
  return lo->haptic_intensity + w * (hi->haptic_intensity - lo->haptic_intensity);
}

}  // namespace vpt
