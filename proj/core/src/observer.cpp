#include "vpt/observer.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "vpt/error.hpp"

namespace vpt {

void PsychometricObserver::validate() const {
  auto fail = [](const char* field, const char* what) {
    throw Error(ErrorKind::invalid_config, std::string(field) + " " + what);
  };
  if (!std::isfinite(alpha)) fail("alpha", "must be finite");
  if (!(beta > 0.0) || !std::isfinite(beta)) fail("beta", "must be > 0");
  if (!(guess >= 0.0 && guess < 0.5)) fail("guess", "must be in [0, 0.5)");
  if (!(lapse >= 0.0 && lapse < 0.5)) fail("lapse", "must be in [0, 0.5)");
  if (!(false_positive_rate >= 0.0 && false_positive_rate < 1.0)) {
    fail("false_positive_rate", "must be in [0, 1)");
  }
}

double detect_probability(const PsychometricObserver& o, double level) {
  const double z = (level - o.alpha) / o.beta;
  const double sigmoid = 1.0 / (1.0 + std::exp(-z));
  return o.guess + (1.0 - o.guess - o.lapse) * sigmoid;
}

bool sample_response(const PsychometricObserver& observer, double level, Rng& rng) {
  return bernoulli(rng, detect_probability(observer, level));
}

double fifty_percent_point(const PsychometricObserver& o) {
  if (!(o.guess < 0.5 && 1.0 - o.lapse > 0.5)) {
    throw Error(ErrorKind::unattainable_level, "0.5 lies outside (guess, 1 - lapse)");
  }
  const double s = (0.5 - o.guess) / (1.0 - o.guess - o.lapse);
  return o.alpha + o.beta * std::log(s / (1.0 - s));
}

PsychometricObserver observer_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse_error, e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::parse_error, "observer must be a JSON object");
  PsychometricObserver o;
  auto read = [&](const char* key, double& dst, bool required) {
    if (!j.contains(key)) {
      if (required) throw Error(ErrorKind::parse_error, std::string("missing field '") + key + "'");
      return;
    }
    if (!j[key].is_number()) {
      throw Error(ErrorKind::parse_error, std::string("field '") + key + "' must be a number");
    }
    dst = j[key].get<double>();
  };
  read("alpha", o.alpha, true);
  read("beta", o.beta, true);
  read("guess", o.guess, false);
  read("lapse", o.lapse, false);
  read("false_positive_rate", o.false_positive_rate, false);
  o.validate();
  return o;
}

PsychometricObserver load_observer(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return observer_from_json_text(buf.str());
}

}  // namespace vpt
