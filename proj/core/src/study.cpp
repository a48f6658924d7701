#include "vpt/study.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "vpt/error.hpp"
#include "vpt/format.hpp"

namespace vpt {

using nlohmann::json;

std::string_view to_string(AgeGroup g) { return g == AgeGroup::younger ? "younger" : "older"; }

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::smartphone: return "smartphone";
    case Modality::tuning_fork: return "tuning_fork";
    case Modality::monofilament: return "monofilament";
  }
  return "?";
}

std::string_view unit_of(Modality m) {
  switch (m) {
    case Modality::smartphone: return "hapticIntensity";
    case Modality::tuning_fork: return "s";
    case Modality::monofilament: return "gf";
  }
  return "?";
}

std::optional<AgeGroup> parse_age_group(std::string_view s) {
  if (s == "younger") return AgeGroup::younger;
  if (s == "older") return AgeGroup::older;
  return std::nullopt;
}

std::optional<Modality> parse_modality(std::string_view s) {
  for (Modality m : kAllModalities) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

bool operator==(const SiteMeasurement& a, const SiteMeasurement& b) {
  const bool same_value = (std::isnan(a.value) && std::isnan(b.value)) || a.value == b.value;
  return a.participant_id == b.participant_id && a.age_group == b.age_group && a.site == b.site &&
         a.modality == b.modality && same_value && a.excluded == b.excluded &&
         a.exclusion_reason == b.exclusion_reason;
}

// ---------------------------------------------------------------------------
// Cohort spec

namespace {

[[noreturn]] void spec_error(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::invalid_spec, path + ": " + what);
}

/// Walks a JSON object, tracking the dotted path for diagnostics and
/// rejecting keys nobody asked for.
class SpecReader {
 public:
  SpecReader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) spec_error(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const char* key) const { return node_.contains(key); }
  void mark(const char* key) { seen_.insert(key); }

  void number(const char* key, double& dst, bool required = false) {
    seen_.insert(key);
    if (!node_.contains(key)) {
      if (required) spec_error(child(key), "missing");
      return;
    }
    if (!node_[key].is_number()) spec_error(child(key), "expected a number");
    dst = node_[key].get<double>();
  }

  void integer(const char* key, int& dst, bool required = false) {
    seen_.insert(key);
    if (!node_.contains(key)) {
      if (required) spec_error(child(key), "missing");
      return;
    }
    if (!node_[key].is_number_integer()) spec_error(child(key), "expected an integer");
    dst = node_[key].get<int>();
  }

  void boolean(const char* key, bool& dst) {
    seen_.insert(key);
    if (!node_.contains(key)) return;
    if (!node_[key].is_boolean()) spec_error(child(key), "expected true or false");
    dst = node_[key].get<bool>();
  }

  SpecReader object(const char* key) {
    seen_.insert(key);
    if (!node_.contains(key)) spec_error(child(key), "missing");
    return SpecReader(node_[key], child(key));
  }

  std::optional<SpecReader> optional_object(const char* key) {
    seen_.insert(key);
    if (!node_.contains(key)) return std::nullopt;
    return SpecReader(node_[key], child(key));
  }

  void finish() const {
    for (const auto& [key, _] : node_.items()) {
      if (!seen_.count(key)) spec_error(child(key.c_str()), "unknown field");
    }
  }

  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  const json& node() const { return node_; }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_group(SpecReader r, GroupSpec& g) {
  r.integer("n", g.n, true);
  r.integer("n_equipment_change", g.n_equipment_change);
  r.integer("n_high_false_positive", g.n_high_false_positive);
  SpecReader sites = r.object("sites");
  for (std::size_t i = 0; i < kAllSites.size(); ++i) {
    const std::string code(site_code(kAllSites[i]));
    SpecReader site = sites.object(code.c_str());
    SiteParams& p = g.sites[i];
    SpecReader phone = site.object("smartphone");
    phone.number("alpha_mean", p.alpha_mean, true);
    phone.number("alpha_sd", p.alpha_sd, true);
    phone.finish();
    SpecReader fork = site.object("tuning_fork");
    fork.number("time_mean_s", p.fork_time_mean, true);
    fork.number("time_sd_s", p.fork_time_sd, true);
    fork.finish();
    SpecReader mono = site.object("monofilament");
    mono.number("log10_gf_mean", p.force_log10_mean, true);
    mono.number("log10_gf_sd", p.force_log10_sd, true);
    mono.finish();
    site.finish();
  }
  sites.finish();
  r.finish();
}

json group_to_json(const GroupSpec& g) {
  json sites = json::object();
  for (std::size_t i = 0; i < kAllSites.size(); ++i) {
    const SiteParams& p = g.sites[i];
    sites[std::string(site_code(kAllSites[i]))] = {
        {"smartphone", {{"alpha_mean", p.alpha_mean}, {"alpha_sd", p.alpha_sd}}},
        {"tuning_fork", {{"time_mean_s", p.fork_time_mean}, {"time_sd_s", p.fork_time_sd}}},
        {"monofilament", {{"log10_gf_mean", p.force_log10_mean}, {"log10_gf_sd", p.force_log10_sd}}},
    };
  }
  return {{"n", g.n},
          {"n_equipment_change", g.n_equipment_change},
          {"n_high_false_positive", g.n_high_false_positive},
          {"sites", sites}};
}

void validate_group(const GroupSpec& g, const std::string& name) {
  if (g.n < 0) spec_error(name + ".n", "must be >= 0");
  if (g.n_equipment_change < 0) spec_error(name + ".n_equipment_change", "must be >= 0");
  if (g.n_high_false_positive < 0) spec_error(name + ".n_high_false_positive", "must be >= 0");
  if (g.n_equipment_change + g.n_high_false_positive > g.n) {
    spec_error(name, "more flagged participants than n");
  }
  for (std::size_t i = 0; i < kAllSites.size(); ++i) {
    const SiteParams& p = g.sites[i];
    const std::string base = name + ".sites." + std::string(site_code(kAllSites[i]));
    if (!std::isfinite(p.alpha_mean)) spec_error(base + ".smartphone.alpha_mean", "must be finite");
    if (!(p.alpha_sd >= 0.0)) spec_error(base + ".smartphone.alpha_sd", "must be >= 0");
    if (!std::isfinite(p.fork_time_mean)) spec_error(base + ".tuning_fork.time_mean_s", "must be finite");
    if (!(p.fork_time_sd >= 0.0)) spec_error(base + ".tuning_fork.time_sd_s", "must be >= 0");
    if (!std::isfinite(p.force_log10_mean)) spec_error(base + ".monofilament.log10_gf_mean", "must be finite");
    if (!(p.force_log10_sd >= 0.0)) spec_error(base + ".monofilament.log10_gf_sd", "must be >= 0");
  }
}

}  // namespace

void CohortSpec::validate() const {
  validate_group(younger, "groups.younger");
  validate_group(older, "groups.older");
  if (!(observer_beta > 0.0)) spec_error("observer.beta", "must be > 0");
  if (!(observer_guess >= 0.0 && observer_guess < 0.5)) spec_error("observer.guess", "must be in [0, 0.5)");
  if (!(observer_lapse >= 0.0 && observer_lapse < 0.5)) spec_error("observer.lapse", "must be in [0, 0.5)");
  if (!(false_positive_rate >= 0.0 && false_positive_rate < 1.0)) {
    spec_error("observer.false_positive_rate", "must be in [0, 1)");
  }
  if (!(high_false_positive_rate >= 0.0 && high_false_positive_rate < 1.0)) {
    spec_error("observer.high_false_positive_rate", "must be in [0, 1)");
  }
  if (!(response_latency >= 0.0)) spec_error("observer.response_latency_s", "must be >= 0");
  if (!(latent_correlation >= -1.0 && latent_correlation <= 1.0)) {
    spec_error("latent_correlation", "must be in [-1, 1]");
  }
  if (!(force_log10_spread >= 0.0)) spec_error("force_log10_spread", "must be >= 0");
  if (!(w2_leakage_discount >= 0.0 && w2_leakage_discount < 1.0)) {
    spec_error("w2_leakage.alpha_discount", "must be in [0, 1)");
  }
  try {
    tuning_fork.validate();
  } catch (const Error& e) {
    spec_error("tuning_fork", e.what());
  }
}

CohortSpec cohort_spec_from_json_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::invalid_spec, std::string("malformed JSON at byte ") +
                                             std::to_string(e.byte) + ": " + e.what());
  }
  CohortSpec spec;
  SpecReader r(root, "");
  if (r.has("seed")) {
    if (!root["seed"].is_number_unsigned()) spec_error("seed", "expected a non-negative integer");
    spec.seed = root["seed"].get<std::uint64_t>();
  }
  r.mark("seed");
  if (r.has("description") && !root["description"].is_string()) spec_error("description", "expected a string");
  r.mark("description");
  if (auto obs = r.optional_object("observer")) {
    obs->number("beta", spec.observer_beta);
    obs->number("guess", spec.observer_guess);
    obs->number("lapse", spec.observer_lapse);
    obs->number("false_positive_rate", spec.false_positive_rate);
    obs->number("high_false_positive_rate", spec.high_false_positive_rate);
    obs->number("response_latency_s", spec.response_latency);
    obs->finish();
  }
  r.number("latent_correlation", spec.latent_correlation);
  r.number("force_log10_spread", spec.force_log10_spread);
  if (auto fork = r.optional_object("tuning_fork")) {
    fork->number("initial_amplitude", spec.tuning_fork.initial_amplitude);
    fork->number("decay_constant_s", spec.tuning_fork.decay_constant);
    fork->number("time_resolution_s", spec.tuning_fork.time_resolution);
    fork->number("strike_variability", spec.tuning_fork.strike_variability);
    fork->finish();
  }
  if (auto leak = r.optional_object("w2_leakage")) {
    leak->boolean("enabled", spec.w2_leakage);
    leak->number("alpha_discount", spec.w2_leakage_discount);
    leak->finish();
  }
  SpecReader groups = r.object("groups");
  read_group(groups.object("younger"), spec.younger);
  read_group(groups.object("older"), spec.older);
  groups.finish();
  r.finish();
  spec.validate();
  return spec;
}

CohortSpec load_cohort_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return cohort_spec_from_json_text(buf.str());
}

std::string cohort_spec_to_json_text(const CohortSpec& spec) {
  nlohmann::ordered_json j;
  j["seed"] = spec.seed;
  j["observer"] = {{"beta", spec.observer_beta},
                   {"guess", spec.observer_guess},
                   {"lapse", spec.observer_lapse},
                   {"false_positive_rate", spec.false_positive_rate},
                   {"high_false_positive_rate", spec.high_false_positive_rate},
                   {"response_latency_s", spec.response_latency}};
  j["latent_correlation"] = spec.latent_correlation;
  j["force_log10_spread"] = spec.force_log10_spread;
  j["tuning_fork"] = {{"initial_amplitude", spec.tuning_fork.initial_amplitude},
                      {"decay_constant_s", spec.tuning_fork.decay_constant},
                      {"time_resolution_s", spec.tuning_fork.time_resolution},
                      {"strike_variability", spec.tuning_fork.strike_variability}};
  j["w2_leakage"] = {{"enabled", spec.w2_leakage}, {"alpha_discount", spec.w2_leakage_discount}};
  j["groups"] = {{"younger", group_to_json(spec.younger)}, {"older", group_to_json(spec.older)}};
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Cohort generation

std::vector<SimulatedParticipant> generate_cohort(const CohortSpec& spec, Rng& rng) {
  spec.validate();
  std::vector<SimulatedParticipant> out;
  const double rho = spec.latent_correlation;
  const double rest = std::sqrt(std::max(0.0, 1.0 - rho * rho));
  int serial = 0;
  for (AgeGroup group : {AgeGroup::younger, AgeGroup::older}) {
    const GroupSpec& g = group == AgeGroup::younger ? spec.younger : spec.older;
    for (int i = 0; i < g.n; ++i) {
      SimulatedParticipant p;
      ++serial;
      p.id = (serial < 10 ? "P0" : "P") + std::to_string(serial);
      p.age_group = group;
      p.equipment_change = i < g.n_equipment_change;
      const bool noisy = i >= g.n_equipment_change && i < g.n_equipment_change + g.n_high_false_positive;
      p.false_positive_rate = noisy ? spec.high_false_positive_rate : spec.false_positive_rate;
      for (std::size_t s = 0; s < kAllSites.size(); ++s) {
        const SiteParams& cell = g.sites[s];
        // Larger latent = poorer perception in every modality.
        const double z = standard_normal(rng);
        const double z_fork = rho * z + rest * standard_normal(rng);
        const double z_force = rho * z + rest * standard_normal(rng);

        double alpha = cell.alpha_mean + cell.alpha_sd * z;
        if (spec.w2_leakage && kAllSites[s] == BodySite::W2) alpha *= 1.0 - spec.w2_leakage_discount;
        SiteTruth& truth = p.sites[s];
        truth.smartphone = {std::max(alpha, 0.01), spec.observer_beta, spec.observer_guess,
                            spec.observer_lapse, p.false_positive_rate};

        const double fork_time = std::max(0.0, cell.fork_time_mean - cell.fork_time_sd * z_fork);
        truth.fork_threshold = spec.tuning_fork.initial_amplitude *
                               std::exp(-fork_time / spec.tuning_fork.decay_constant);
        truth.force_threshold_gf = std::pow(10.0, cell.force_log10_mean + cell.force_log10_sd * z_force);
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Virtual study

namespace {

enum SeedStream : std::uint64_t {
  kOrderStream = 1,
  kScheduleStream = 100,
  kResponderStream = 200,
  kForkStream = 300,
  kMonofilamentStream = 400,
};

std::vector<BodySite> shuffled_sites(Rng& rng) {
  std::vector<BodySite> sites(kAllSites.begin(), kAllSites.end());
  for (std::size_t i = sites.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i + 1));
    std::swap(sites[i], sites[std::min(j, i)]);
  }
  return sites;
}

}  // namespace

StudyRun run_virtual_study(const std::vector<SimulatedParticipant>& cohort,
                           const StudyConfig& config, const CohortSpec& spec, Rng& rng) {
  config.session.validate();
  config.staircase.validate();
  config.monofilaments.validate();
  spec.tuning_fork.validate();
  if (config.tuning_fork_reps < 1) throw Error(ErrorKind::invalid_config, "tuning_fork_reps must be >= 1");

  const std::uint64_t master = rng();
  StudyRun run;
  for (std::size_t pi = 0; pi < cohort.size(); ++pi) {
    const SimulatedParticipant& p = cohort[pi];
    ParticipantLog log;
    log.participant_id = p.id;
    log.age_group = p.age_group;
    log.equipment_change = p.equipment_change;
    {
      Rng order(derive_seed(master, pi, kOrderStream));
      log.smartphone_session_first = bernoulli(order, 0.5);
      log.monofilament_before_tuning_fork = bernoulli(order, 0.5);
      for (auto& sites : log.site_order) sites = shuffled_sites(order);
    }

    for (std::size_t s = 0; s < kAllSites.size(); ++s) {
      const BodySite site = kAllSites[s];
      const SiteTruth& truth = p.sites[s];

      std::vector<TrialThreshold> trials;
      for (int rep = 0; rep < config.session.reps_per_site; ++rep) {
        TrialSetup setup{config.session, config.staircase, p.id, site, rep};
        Rng schedule(derive_seed(master, pi, s, kScheduleStream + static_cast<std::uint64_t>(rep)));
        SimulatedResponder responder(
            truth.smartphone,
            Rng(derive_seed(master, pi, s, kResponderStream + static_cast<std::uint64_t>(rep))),
            spec.response_latency);
        TrialRecord record = run_trial(setup, responder, schedule);
        log.false_positives[0] += record.false_positive_count;
        trials.push_back(std::move(record.threshold));
      }
      const SiteThreshold phone = aggregate_site_threshold(trials);
      log.smartphone_nan_trials += static_cast<int>(phone.nan_count);

      Rng fork_rng(derive_seed(master, pi, s, kForkStream));
      std::vector<double> times;
      for (int rep = 0; rep < config.tuning_fork_reps; ++rep) {
        if (p.false_positive_rate > 0.0 && bernoulli(fork_rng, p.false_positive_rate)) {
          ++log.false_positives[1];
        }
        times.push_back(simulate_tuning_fork_time(spec.tuning_fork, truth.fork_threshold, fork_rng));
      }
      const double fork = average_perception_time(times);

      Rng mono_rng(derive_seed(master, pi, s, kMonofilamentStream));
      ForceResponder responder{logistic_force_observer(truth.force_threshold_gf, spec.force_log10_spread),
                               p.false_positive_rate};
      const MonofilamentResult mono = run_monofilament_exam(
          config.monofilaments, responder, monofilament_start_size(site_class(site)), mono_rng);
      log.false_positives[2] += mono.false_positive_count;
      const double mono_value = mono.threshold.value_or(std::numeric_limits<double>::infinity());

      for (auto [modality, value] : {std::pair{Modality::smartphone, phone.value},
                                     std::pair{Modality::tuning_fork, fork},
                                     std::pair{Modality::monofilament, mono_value}}) {
        run.measurements.push_back({p.id, p.age_group, site, modality, value, false, {}});
      }
    }
    run.logs.push_back(std::move(log));
  }
  return run;
}

// ---------------------------------------------------------------------------
// Exclusions

namespace {

std::map<std::string, std::string> exclusion_reasons(const ExclusionRule& rule,
                                                     const std::vector<ParticipantLog>& logs) {
  std::map<std::string, std::string> reasons;
  for (const auto& log : logs) {
    std::string reason;
    auto add = [&](const std::string& r) { reason += (reason.empty() ? "" : ";") + r; };
    if (rule.exclude_equipment_change && log.equipment_change) add("equipment_change");
    for (std::size_t m = 1; m < kAllModalities.size(); ++m) {  // clinical exams only
      if (log.false_positives[m] > rule.max_false_positives) {
        add("false_positives_" + std::string(to_string(kAllModalities[m])) + "=" +
            std::to_string(log.false_positives[m]));
      }
    }
    if (!reason.empty()) reasons[log.participant_id] = reason;
  }
  return reasons;
}

}  // namespace

std::vector<SiteMeasurement> mark_exclusions(const std::vector<SiteMeasurement>& measurements,
                                             const ExclusionRule& rule,
                                             const std::vector<ParticipantLog>& logs) {
  const auto reasons = exclusion_reasons(rule, logs);
  std::vector<SiteMeasurement> out = measurements;
  for (auto& m : out) {
    const auto it = reasons.find(m.participant_id);
    if (it != reasons.end()) {
      m.excluded = true;
      m.exclusion_reason = it->second;
    }
  }
  return out;
}

ExclusionResult apply_exclusions(const std::vector<SiteMeasurement>& measurements,
                                 const ExclusionRule& rule,
                                 const std::vector<ParticipantLog>& logs) {
  ExclusionResult out;
  for (auto& m : mark_exclusions(measurements, rule, logs)) {
    (m.excluded ? out.excluded : out.retained).push_back(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV / log output

namespace {

constexpr std::string_view kMeasurementHeader =
    "participant_id,age_group,site,modality,value,unit,excluded,exclusion_reason";

}  // namespace

std::string export_measurements_csv(const std::vector<SiteMeasurement>& measurements) {
  std::string out(kMeasurementHeader);
  out += '\n';
  for (const auto& m : measurements) {
    if (m.participant_id.find_first_of(",\n") != std::string::npos ||
        m.exclusion_reason.find_first_of(",\n") != std::string::npos) {
      throw Error(ErrorKind::io_error, "measurement fields must not contain commas or newlines");
    }
    out += m.participant_id + ',';
    out += std::string(to_string(m.age_group)) + ',';
    out += std::string(site_code(m.site)) + ',';
    out += std::string(to_string(m.modality)) + ',';
    out += format_double(m.value) + ',';
    out += std::string(unit_of(m.modality)) + ',';
    out += m.excluded ? "1," : "0,";
    out += m.exclusion_reason;
    out += '\n';
  }
  return out;
}

std::vector<SiteMeasurement> import_measurements_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMeasurementHeader) {
    throw Error(ErrorKind::parse_error, "line 1: expected header '" + std::string(kMeasurementHeader) + "'");
  }
  std::vector<SiteMeasurement> out;
  std::size_t line_no = 1;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorKind::parse_error, "line " + std::to_string(line_no) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 8) fail("expected 8 fields");
    SiteMeasurement m;
    m.participant_id = std::string(f[0]);
    const auto group = parse_age_group(f[1]);
    if (!group) fail("unknown age_group '" + std::string(f[1]) + "'");
    const auto site = parse_site(f[2]);
    if (!site) fail("unknown site '" + std::string(f[2]) + "'");
    const auto modality = parse_modality(f[3]);
    if (!modality) fail("unknown modality '" + std::string(f[3]) + "'");
    m.age_group = *group;
    m.site = *site;
    m.modality = *modality;
    if (!parse_double(f[4], m.value)) fail("bad value '" + std::string(f[4]) + "'");
    if (f[5] != unit_of(m.modality)) fail("unit '" + std::string(f[5]) + "' does not match modality");
    if (f[6] != "0" && f[6] != "1") fail("excluded must be 0 or 1");
    m.excluded = f[6] == "1";
    m.exclusion_reason = std::string(f[7]);
    out.push_back(std::move(m));
  }
  return out;
}

std::string export_study_log_json(const std::vector<ParticipantLog>& logs) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& log : logs) {
    nlohmann::ordered_json j;
    j["participant_id"] = log.participant_id;
    j["age_group"] = to_string(log.age_group);
    j["first_session"] = log.smartphone_session_first ? "smartphone" : "clinical";
    j["clinical_order"] = log.monofilament_before_tuning_fork
                              ? nlohmann::ordered_json::array({"monofilament", "tuning_fork"})
                              : nlohmann::ordered_json::array({"tuning_fork", "monofilament"});
    nlohmann::ordered_json orders;
    nlohmann::ordered_json fps;
    for (std::size_t m = 0; m < kAllModalities.size(); ++m) {
      nlohmann::ordered_json sites = nlohmann::ordered_json::array();
      for (BodySite s : log.site_order[m]) sites.push_back(site_code(s));
      orders[std::string(to_string(kAllModalities[m]))] = sites;
      fps[std::string(to_string(kAllModalities[m]))] = log.false_positives[m];
    }
    j["site_order"] = orders;
    j["false_positives"] = fps;
    j["smartphone_nan_trials"] = log.smartphone_nan_trials;
    j["equipment_change"] = log.equipment_change;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

}  // namespace vpt
