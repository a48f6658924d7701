#include "vpt/session.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "vpt/error.hpp"
#include "vpt/format.hpp"

namespace vpt {

void SessionConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::invalid_config, what); };
  if (!(isi_min > 0.0)) fail("isi_min must be > 0");
  if (!(isi_max >= isi_min)) fail("isi_max must be >= isi_min");
  if (!(stimulus_duration > 0.0)) fail("stimulus_duration must be > 0");
  if (!(response_window > stimulus_duration)) fail("response_window must exceed stimulus_duration");
  if (!(isi_min >= response_window)) fail("isi_min must be >= response_window");
  if (reps_per_site < 1) fail("reps_per_site must be >= 1");
}

std::string_view to_string(ResponseClass c) {
  switch (c) {
    case ResponseClass::true_positive: return "true_positive";
    case ResponseClass::ignored_late: return "ignored_late";
    case ResponseClass::false_positive: return "false_positive";
  }
  return "?";
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::stimulus_onset: return "stimulus_onset";
    case EventKind::response: return "response";
    case EventKind::trial_complete: return "trial_complete";
    case EventKind::session_complete: return "session_complete";
  }
  return "?";
}

double schedule_next_stimulus(const SessionConfig& config, double now, Rng& rng) {
  return now + uniform(rng, config.isi_min, config.isi_max);
}

ResponseClass classify_response(const SessionConfig& config, double stimulus_onset,
                                double response_time) {
  const double delay = response_time - stimulus_onset;
  if (delay < 0.0) return ResponseClass::false_positive;
  if (delay <= config.response_window) return ResponseClass::true_positive;
  return ResponseClass::ignored_late;
}

namespace {

bool same_threshold(const TrialThreshold& a, const TrialThreshold& b) {
  const bool values_equal = (std::isnan(a.value) && std::isnan(b.value)) || a.value == b.value;
  return values_equal && a.saturated == b.saturated && a.reversal_values == b.reversal_values;
}

}  // namespace

bool operator==(const TrialRecord& a, const TrialRecord& b) {
  return a.participant_id == b.participant_id && a.site == b.site && a.rep == b.rep &&
         a.rows == b.rows && same_threshold(a.threshold, b.threshold) &&
         a.false_positive_count == b.false_positive_count &&
         a.late_response_count == b.late_response_count;
}

// ---------------------------------------------------------------------------
// TrialRunner

TrialRunner::TrialRunner(TrialSetup setup, Rng rng, double start_time)
    : setup_(std::move(setup)),
      rng_(std::move(rng)),
      staircase_(init_staircase(setup_.staircase)),
      now_(start_time) {
  setup_.session.validate();
  schedule(start_time);
}

void TrialRunner::schedule(double from) {
  const double onset = schedule_next_stimulus(setup_.session, from, rng_);
  pending_ = PendingStimulus{rows_.size(), onset, staircase_.current_level(),
                             onset + setup_.session.response_window};
  pending_onset_emitted_ = false;
}

void TrialRunner::emit_onset_if_due(double t) {
  if (pending_ && !pending_onset_emitted_ && pending_->onset <= t) {
    events_.push_back({pending_->onset, EventKind::stimulus_onset, pending_->level, std::nullopt});
    pending_onset_emitted_ = true;
  }
}

void TrialRunner::move_to(double t) {
  if (t < now_) {
    throw Error(ErrorKind::out_of_range, "timestamp " + format_double(t) +
                                             " precedes current time " + format_double(now_));
  }
  emit_onset_if_due(t);
  now_ = t;
}

void TrialRunner::resolve(bool detected, double at, std::optional<double> latency) {
  emit_onset_if_due(at);
  const PendingStimulus stim = *pending_;
  const std::size_t before = staircase_.reversals().size();
  staircase_ = apply_response(std::move(staircase_), detected);
  TrialRow row{stim.index, stim.onset, stim.level, detected,
               staircase_.reversals().size() > before, latency};
  rows_.push_back(row);
  last_resolved_ = row;
  last_resolved_deadline_ = stim.deadline;
  pending_.reset();
  now_ = std::max(now_, at);
  if (staircase_.finished()) {
    end_time_ = at;
    events_.push_back({at, EventKind::trial_complete, 0.0, std::nullopt});
  } else {
    schedule(stim.onset);
  }
}

void TrialRunner::advance_to(double now) {
  if (now < now_) {
    throw Error(ErrorKind::out_of_range, "timestamp " + format_double(now) +
                                             " precedes current time " + format_double(now_));
  }
  while (pending_ && pending_->deadline < now) resolve(false, pending_->deadline, std::nullopt);
  move_to(now);
}

void TrialRunner::close_window() {
  if (!pending_) return;
  if (pending_->deadline < now_) {
    advance_to(now_);
    return;
  }
  resolve(false, pending_->deadline, std::nullopt);
}

ResponseOutcome TrialRunner::respond(double t) {
  advance_to(t);
  ResponseOutcome out;
  if (pending_ && classify_response(setup_.session, pending_->onset, t) ==
                      ResponseClass::true_positive) {
    out.classification = ResponseClass::true_positive;
    out.stimulus_index = pending_->index;
    events_.push_back({t, EventKind::response, 0.0, out.classification});
    resolve(true, t, t - pending_->onset);
    return out;
  }
  if (last_resolved_) {
    // Before the next onset: judge against the stimulus that came before.
    out.classification = classify_response(setup_.session, last_resolved_->onset, t);
    out.stimulus_index = last_resolved_->stimulus_index;
    if (out.classification == ResponseClass::true_positive) {
      out.collapsed = true;
    } else {
      ++late_responses_;
      ++false_positives_;
    }
  } else {
    out.classification = ResponseClass::false_positive;
    ++false_positives_;
  }
  events_.push_back({t, EventKind::response, 0.0, out.classification});
  return out;
}

TrialRecord TrialRunner::record() const {
  TrialRecord r;
  r.participant_id = setup_.participant_id;
  r.site = setup_.site;
  r.rep = setup_.rep;
  r.rows = rows_;
  if (finished()) r.threshold = compute_threshold(staircase_);
  r.false_positive_count = false_positives_;
  r.late_response_count = late_responses_;
  return r;
}

// ---------------------------------------------------------------------------
// Responders

SimulatedResponder::SimulatedResponder(PsychometricObserver observer, Rng rng, double latency,
                                       double start_time)
    : observer_(observer), rng_(std::move(rng)), latency_(latency), last_deadline_(start_time) {
  observer_.validate();
}

std::vector<double> SimulatedResponder::respond(const StimulusCue& cue) {
  std::vector<double> out;
  if (observer_.false_positive_rate > 0.0 && bernoulli(rng_, observer_.false_positive_rate)) {
    out.push_back(uniform(rng_, last_deadline_, cue.onset));
  }
  if (sample_response(observer_, cue.level, rng_)) out.push_back(cue.onset + latency_);
  last_deadline_ = cue.deadline;
  return out;
}

std::vector<double> DeterministicResponder::respond(const StimulusCue& cue) {
  if (observer_.detects(cue.level)) return {cue.onset + latency_};
  return {};
}

TimestampResponder::TimestampResponder(std::vector<double> times) : times_(std::move(times)) {
  std::sort(times_.begin(), times_.end());
}

std::vector<double> TimestampResponder::respond(const StimulusCue& cue) {
  std::vector<double> out;
  while (next_ < times_.size() && times_[next_] <= cue.deadline) out.push_back(times_[next_++]);
  return out;
}

// ---------------------------------------------------------------------------
// Drivers

namespace {

struct TrialRun {
  TrialRecord record;
  std::vector<SessionEvent> events;
  double end_time = 0.0;
};

TrialRun run_trial_impl(const TrialSetup& setup, Responder& responder, Rng& rng,
                        double start_time) {
  TrialRunner runner(setup, rng, start_time);
  std::vector<double> carry;
  while (!runner.finished()) {
    const PendingStimulus stim = *runner.pending();
    std::vector<double> times =
        responder.respond({stim.index, stim.onset, stim.level, stim.deadline});
    times.insert(times.end(), carry.begin(), carry.end());
    carry.clear();
    std::sort(times.begin(), times.end());
    for (double t : times) {
      if (runner.finished()) break;
      if (t <= stim.deadline) {
        runner.respond(t);
      } else {
        carry.push_back(t);
      }
    }
    if (runner.pending() && runner.pending()->index == stim.index) runner.close_window();
  }
  rng = runner.rng();
  return {runner.record(), runner.events(), *runner.end_time()};
}

}  // namespace

TrialRecord run_trial(const TrialSetup& setup, Responder& responder, Rng& rng,
                      double start_time) {
  return run_trial_impl(setup, responder, rng, start_time).record;
}

SessionRun run_session(
    const SessionConfig& session, const StaircaseConfig& staircase,
    const std::string& participant_id,
    const std::function<std::unique_ptr<Responder>(BodySite, int rep)>& make_responder,
    Rng& rng) {
  session.validate();
  SessionRun out;
  double t = 0.0;
  for (BodySite site : session.sites) {
    for (int rep = 0; rep < session.reps_per_site; ++rep) {
      TrialSetup setup{session, staircase, participant_id, site, rep};
      auto responder = make_responder(site, rep);
      TrialRun run = run_trial_impl(setup, *responder, rng, t);
      out.events.insert(out.events.end(), run.events.begin(), run.events.end());
      out.trials.push_back(std::move(run.record));
      t = run.end_time;
    }
  }
  out.events.push_back({t, EventKind::session_complete, 0.0, std::nullopt});
  out.end_time = t;
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

constexpr std::string_view kTrialHeader =
    "participant_id,site,rep,stimulus_index,onset_s,haptic_intensity,detected,reversal,latency_s";

[[noreturn]] void csv_error(std::size_t line, const std::string& what) {
  throw Error(ErrorKind::parse_error, "line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::string export_trial_csv(const TrialRecord& record) {
  if (record.participant_id.find_first_of(",\n\r") != std::string::npos) {
    throw Error(ErrorKind::io_error, "participant_id must not contain commas or newlines");
  }
  std::string out(kTrialHeader);
  out += '\n';
  const std::string prefix = record.participant_id + "," + std::string(site_code(record.site)) +
                             "," + std::to_string(record.rep) + ",";
  for (const auto& row : record.rows) {
    out += prefix;
    out += std::to_string(row.stimulus_index) + ",";
    out += format_double(row.onset) + ",";
    out += format_fixed(row.level, 2) + ",";
    out += row.detected ? "1," : "0,";
    out += row.reversal ? "1," : "0,";
    if (row.latency) out += format_double(*row.latency);
    out += '\n';
  }
  if (!record.rows.empty()) {
    out += "# threshold=" + format_double(record.threshold.value) + "\n";
    out += "# false_positives=" + std::to_string(record.false_positive_count) + "\n";
    out += "# late_responses=" + std::to_string(record.late_response_count) + "\n";
  }
  return out;
}

void write_trial_csv(const TrialRecord& record, const std::string& path) {
  const std::string text = export_trial_csv(record);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io_error, "cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error(ErrorKind::io_error, "write failed for " + path);
}

TrialRecord import_trial_csv(const std::string& text, const StaircaseConfig& staircase) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line != kTrialHeader) csv_error(1, "unexpected header");

  TrialRecord record;
  std::vector<std::string> level_text;
  std::vector<bool> detections;
  std::optional<std::string> threshold_text;
  bool have_fp = false;
  bool have_late = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) csv_error(line_no, "malformed trailer");
      const std::string key = line.substr(2, eq - 2);
      const std::string value = line.substr(eq + 1);
      try {
        if (key == "threshold") {
          threshold_text = value;
        } else if (key == "false_positives") {
          record.false_positive_count = std::stoi(value);
          have_fp = true;
        } else if (key == "late_responses") {
          record.late_response_count = std::stoi(value);
          have_late = true;
        } else {
          csv_error(line_no, "unknown trailer key '" + key + "'");
        }
      } catch (const std::logic_error&) {
        csv_error(line_no, "bad trailer value '" + value + "'");
      }
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 9) csv_error(line_no, "expected 9 fields");
    const std::string pid(f[0]);
    const auto site = parse_site(f[1]);
    if (!site) csv_error(line_no, "unknown site '" + std::string(f[1]) + "'");
    int rep = 0;
    std::size_t index = 0;
    try {
      rep = std::stoi(std::string(f[2]));
      index = static_cast<std::size_t>(std::stoul(std::string(f[3])));
    } catch (const std::logic_error&) {
      csv_error(line_no, "bad integer field");
    }
    if (record.rows.empty()) {
      record.participant_id = pid;
      record.site = *site;
      record.rep = rep;
    } else if (pid != record.participant_id || *site != record.site || rep != record.rep) {
      csv_error(line_no, "rows from more than one trial");
    }
    if (index != record.rows.size()) csv_error(line_no, "stimulus_index out of sequence");
    TrialRow row;
    row.stimulus_index = index;
    if (!parse_double(f[4], row.onset)) csv_error(line_no, "bad onset_s");
    if (f[6] != "0" && f[6] != "1") csv_error(line_no, "detected must be 0 or 1");
    if (f[7] != "0" && f[7] != "1") csv_error(line_no, "reversal must be 0 or 1");
    row.detected = f[6] == "1";
    row.reversal = f[7] == "1";
    if (!f[8].empty()) {
      double latency = 0.0;
      if (!parse_double(f[8], latency)) csv_error(line_no, "bad latency_s");
      row.latency = latency;
    }
    level_text.emplace_back(f[5]);
    detections.push_back(row.detected);
    record.rows.push_back(row);
  }
  if (record.rows.empty()) return record;

  StaircaseState state = init_staircase(staircase);
  for (std::size_t i = 0; i < record.rows.size(); ++i) {
    if (state.finished()) csv_error(i + 2, "rows continue after the staircase ended");
    auto& row = record.rows[i];
    row.level = state.current_level();
    if (format_fixed(row.level, 2) != level_text[i]) {
      csv_error(i + 2, "haptic_intensity does not match the staircase replay");
    }
    const std::size_t before = state.reversals().size();
    state = apply_response(std::move(state), row.detected);
    if ((state.reversals().size() > before) != row.reversal) {
      csv_error(i + 2, "reversal flag does not match the staircase replay");
    }
  }
  if (state.finished()) record.threshold = compute_threshold(state);
  if (threshold_text && state.finished() &&
      *threshold_text != format_double(record.threshold.value)) {
    throw Error(ErrorKind::parse_error, "threshold trailer does not match the replayed staircase");
  }
  if (!have_fp || !have_late) throw Error(ErrorKind::parse_error, "missing count trailer");
  return record;
}

}  // namespace vpt
