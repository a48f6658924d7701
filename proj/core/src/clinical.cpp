#include "vpt/clinical.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "vpt/error.hpp"

namespace vpt {

void TuningForkModel::validate() const {
  auto fail = [](const char* field) {
    throw Error(ErrorKind::invalid_config, std::string(field) + " must be > 0");
  };
  if (!(initial_amplitude > 0.0)) fail("initial_amplitude");
  if (!(decay_constant > 0.0)) fail("decay_constant");
  if (!(frequency > 0.0)) fail("frequency");
  if (!(time_resolution > 0.0)) fail("time_resolution");
  if (!(strike_variability >= 0.0)) {
    throw Error(ErrorKind::invalid_config, "strike_variability must be >= 0");
  }
}

double perception_time_continuous(const TuningForkModel& model, double threshold,
                                  double amplitude_scale) {
  if (!(threshold > 0.0)) throw Error(ErrorKind::invalid_config, "threshold must be > 0");
  const double t =
      model.decay_constant * std::log(amplitude_scale * model.initial_amplitude / threshold);
  return std::max(0.0, t);
}

double simulate_tuning_fork_time(const TuningForkModel& model, double threshold, Rng& rng) {
  double scale = 1.0;
  if (model.strike_variability > 0.0) scale = std::exp(model.strike_variability * standard_normal(rng));
  const double t = perception_time_continuous(model, threshold, scale);
  return std::round(t / model.time_resolution) * model.time_resolution;
}

double average_perception_time(std::span<const double> times) {
  if (times.empty()) throw Error(ErrorKind::empty_input, "no perception times");
  return std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
}

void MonofilamentSet::validate() const {
  if (sizes.size() < 2) throw Error(ErrorKind::invalid_config, "sizes: need at least 2 entries");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (!(sizes[i] > 0.0) || !std::isfinite(sizes[i])) {
      throw Error(ErrorKind::invalid_config, "sizes[" + std::to_string(i) + "] must be > 0");
    }
    if (i > 0 && !(sizes[i] > sizes[i - 1])) {
      throw Error(ErrorKind::invalid_config,
                  "sizes[" + std::to_string(i) + "] is not strictly increasing");
    }
  }
  if (multi_touch_count < 1) throw Error(ErrorKind::invalid_config, "multi_touch_count must be >= 1");
}

int MonofilamentSet::touches_for(double size) const {
  return size <= multi_touch_boundary * (1.0 + 1e-9) ? multi_touch_count : 1;
}

std::optional<std::size_t> MonofilamentSet::index_of(double size) const {
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (std::abs(sizes[i] - size) <= 1e-9 * sizes[i]) return i;
  }
  return std::nullopt;
}

MonofilamentSet monofilament_set_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse_error, e.what());
  }
  if (!j.is_object() || !j.contains("sizes_gf") || !j["sizes_gf"].is_array()) {
    throw Error(ErrorKind::parse_error, "expected an object with a 'sizes_gf' array");
  }
  MonofilamentSet set;
  for (const auto& v : j["sizes_gf"]) {
    if (!v.is_number()) throw Error(ErrorKind::parse_error, "sizes_gf entries must be numbers");
    set.sizes.push_back(v.get<double>());
  }
  if (j.contains("multi_touch_boundary_gf")) set.multi_touch_boundary = j["multi_touch_boundary_gf"].get<double>();
  if (j.contains("multi_touch_count")) set.multi_touch_count = j["multi_touch_count"].get<int>();
  set.validate();
  return set;
}

MonofilamentSet load_monofilament_set(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return monofilament_set_from_json_text(buf.str());
}

double monofilament_start_size(SiteClass site_class) {
  return site_class == SiteClass::plantar_foot ? 0.4 : 0.07;
}

double MonofilamentResult::value() const {
  if (!threshold) throw Error(ErrorKind::none_felt, "no evaluator size was felt");
  return *threshold;
}

std::function<bool(double, Rng&)> deterministic_force_observer(double threshold_gf) {
  return [threshold_gf](double size, Rng&) { return size >= threshold_gf; };
}

std::function<bool(double, Rng&)> logistic_force_observer(double threshold_gf,
                                                          double log10_spread) {
  if (log10_spread <= 0.0) return deterministic_force_observer(threshold_gf);
  return [threshold_gf, log10_spread](double size, Rng& rng) {
    const double z = (std::log10(size) - std::log10(threshold_gf)) / log10_spread;
    return bernoulli(rng, 1.0 / (1.0 + std::exp(-z)));
  };
}

MonofilamentResult run_monofilament_exam(const MonofilamentSet& set,
                                         const ForceResponder& responder, double start_size,
                                         Rng& rng) {
  const auto start = set.index_of(start_size);
  if (!start) throw Error(ErrorKind::invalid_config, "start size is not in the monofilament set");

  MonofilamentResult result;
  result.start_size = set.sizes[*start];

  auto felt = [&](std::size_t index) {
    const double size = set.sizes[index];
    const int touches = set.touches_for(size);
    for (int t = 0; t < touches; ++t) {
      if (responder.false_positive_rate > 0.0 && bernoulli(rng, responder.false_positive_rate)) {
        ++result.false_positive_count;
      }
      const bool detected = responder.feels(size, rng);
      result.touch_log.push_back({size, t, detected});
      if (detected) return true;
    }
    return false;
  };

  std::size_t i = *start;
  if (felt(i)) {
    while (i > 0 && felt(i - 1)) --i;
    result.threshold = set.sizes[i];
  } else {
    while (++i < set.sizes.size()) {
      if (felt(i)) {
        result.threshold = set.sizes[i];
        break;
      }
    }
  }
  return result;
}

}  // namespace vpt
