#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vpt/body_site.hpp"
#include "vpt/observer.hpp"
#include "vpt/random.hpp"
#include "vpt/staircase.hpp"

namespace vpt {

/// Timing of the smartphone exam, in seconds.
struct SessionConfig {
  double isi_min = 3.0;
  double isi_max = 6.0;
  double response_window = 2.5;
  double stimulus_duration = 0.1;
  int reps_per_site = 5;
  std::vector<BodySite> sites{kAllSites.begin(), kAllSites.end()};

  /// Also requires isi_min >= response_window: onsets are spaced from the
  /// previous onset, so this keeps windows from overlapping.
  void validate() const;
};

enum class ResponseClass { true_positive, ignored_late, false_positive };
std::string_view to_string(ResponseClass c);

/// now + U(isi_min, isi_max).
double schedule_next_stimulus(const SessionConfig& config, double now, Rng& rng);

/// Window is anchored at stimulus onset and closed at both ends.
ResponseClass classify_response(const SessionConfig& config, double stimulus_onset,
                                double response_time);

enum class EventKind { stimulus_onset, response, trial_complete, session_complete };
std::string_view to_string(EventKind kind);

struct SessionEvent {
  double timestamp = 0.0;
  EventKind kind = EventKind::stimulus_onset;
  double level = 0.0;  // stimulus_onset only
  std::optional<ResponseClass> classification;  // response only

  bool operator==(const SessionEvent&) const = default;
};

struct TrialRow {
  std::size_t stimulus_index = 0;
  double onset = 0.0;
  double level = 0.0;
  bool detected = false;
  bool reversal = false;
  std::optional<double> latency;

  bool operator==(const TrialRow&) const = default;
};

struct TrialRecord {
  std::string participant_id;
  BodySite site = BodySite::H1;
  int rep = 0;
  std::vector<TrialRow> rows;
  TrialThreshold threshold;
  int false_positive_count = 0;  // pre-stimulus and late responses
  int late_response_count = 0;   // the late subset of the above
};

/// Field-wise equality with NaN thresholds comparing equal.
bool operator==(const TrialRecord& a, const TrialRecord& b);

struct TrialSetup {
  SessionConfig session;
  StaircaseConfig staircase;
  std::string participant_id = "P000";
  BodySite site = BodySite::H1;
  int rep = 0;
};

struct PendingStimulus {
  std::size_t index = 0;
  double onset = 0.0;
  double level = 0.0;
  double deadline = 0.0;  // onset + response_window
};

struct ResponseOutcome {
  ResponseClass classification = ResponseClass::false_positive;
  /// Extra response inside an already-detected window; discarded.
  bool collapsed = false;
  std::optional<std::size_t> stimulus_index;
};

/// Event-driven runner for one staircase trial. Time only moves forward:
/// every call takes a timestamp no earlier than the previous one.
/// The same runner backs the offline simulator and the HTTP service.
class TrialRunner {
 public:
  TrialRunner(TrialSetup setup, Rng rng, double start_time = 0.0);

  /// Resolves, as not detected, a pending stimulus whose window closed before `now`.
  void advance_to(double now);
  /// Resolves the pending stimulus as not detected at its deadline.
  void close_window();
  /// Registers a response at `t`. Throws Error(out_of_range) if `t` is in the past.
  ResponseOutcome respond(double t);

  bool finished() const { return staircase_.finished(); }
  const std::optional<PendingStimulus>& pending() const { return pending_; }
  const StaircaseState& staircase() const { return staircase_; }
  const std::vector<SessionEvent>& events() const { return events_; }
  const std::vector<TrialRow>& rows() const { return rows_; }
  const TrialSetup& setup() const { return setup_; }
  double now() const { return now_; }
  /// Time the staircase finished; nullopt while running.
  std::optional<double> end_time() const { return end_time_; }
  const Rng& rng() const { return rng_; }

  /// Snapshot of the rows so far; the threshold is filled once finished.
  TrialRecord record() const;

 private:
  void move_to(double t);
  void emit_onset_if_due(double t);
  void resolve(bool detected, double at, std::optional<double> latency);
  void schedule(double from);

  TrialSetup setup_;
  Rng rng_;
  StaircaseState staircase_;
  std::optional<PendingStimulus> pending_;
  bool pending_onset_emitted_ = false;
  std::optional<TrialRow> last_resolved_;
  double last_resolved_deadline_ = 0.0;
  std::vector<TrialRow> rows_;
  std::vector<SessionEvent> events_;
  double now_ = 0.0;
  std::optional<double> end_time_;
  int false_positives_ = 0;
  int late_responses_ = 0;
};

struct StimulusCue {
  std::size_t index = 0;
  double onset = 0.0;
  double level = 0.0;
  double deadline = 0.0;
};

/// Source of timestamped "yes" responses. Returned times are absolute and may
/// fall before the onset (spurious yes) or after the deadline (late).
class Responder {
 public:
  virtual ~Responder() = default;
  virtual std::vector<double> respond(const StimulusCue& cue) = 0;
};

/// Psychometric observer answering after a fixed latency; spurious responses
/// fall uniformly in the gap before each onset with the observer's false_positive_rate.
class SimulatedResponder final : public Responder {
 public:
  SimulatedResponder(PsychometricObserver observer, Rng rng, double latency = 0.8,
                     double start_time = 0.0);
  std::vector<double> respond(const StimulusCue& cue) override;

 private:
  PsychometricObserver observer_;
  Rng rng_;
  double latency_;
  double last_deadline_;
};

class DeterministicResponder final : public Responder {
 public:
  explicit DeterministicResponder(DeterministicObserver observer, double latency = 0.0)
      : observer_(observer), latency_(latency) {}
  std::vector<double> respond(const StimulusCue& cue) override;

 private:
  DeterministicObserver observer_;
  double latency_;
};

/// Never says yes.
class SilentResponder final : public Responder {
 public:
  std::vector<double> respond(const StimulusCue&) override { return {}; }
};

/// Replays a fixed transcript of absolute response times.
class TimestampResponder final : public Responder {
 public:
  explicit TimestampResponder(std::vector<double> times);
  std::vector<double> respond(const StimulusCue& cue) override;

 private:
  std::vector<double> times_;
  std::size_t next_ = 0;
};

/// Runs one staircase to completion in virtual time.
TrialRecord run_trial(const TrialSetup& setup, Responder& responder, Rng& rng,
                      double start_time = 0.0);

struct SessionRun {
  std::vector<TrialRecord> trials;  // site-major, reps in order
  std::vector<SessionEvent> events;
  double end_time = 0.0;
};

/// Every configured site, reps_per_site trials each, back to back in virtual time.
SessionRun run_session(const SessionConfig& session, const StaircaseConfig& staircase,
                       const std::string& participant_id,
                       const std::function<std::unique_ptr<Responder>(BodySite, int rep)>& make_responder,
                       Rng& rng);

/// CSV with header
/// participant_id,site,rep,stimulus_index,onset_s,haptic_intensity,detected,reversal,latency_s
/// and `#` trailer lines carrying the threshold and false-positive counts.
std::string export_trial_csv(const TrialRecord& record);
void write_trial_csv(const TrialRecord& record, const std::string& path);

/// Parses export_trial_csv output; levels and reversal flags are checked by
/// replaying the detections through a staircase built from `staircase`.
TrialRecord import_trial_csv(const std::string& text, const StaircaseConfig& staircase = {});

}  // namespace vpt
