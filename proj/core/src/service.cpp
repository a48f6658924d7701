#include "vpt/service.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <shared_mutex>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "vpt/body_site.hpp"
#include "vpt/error.hpp"
#include "vpt/random.hpp"

namespace vpt {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

double SteadyClock::now() const {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

double ManualClock::now() const {
  std::lock_guard lock(mu_);
  return now_;
}

void ManualClock::set(double t) {
  std::lock_guard lock(mu_);
  now_ = t;
}

void ManualClock::advance(double dt) {
  std::lock_guard lock(mu_);
  now_ += dt;
}

namespace {

/// Thrown inside handlers and turned into an HTTP status.
struct ApiError {
  int status;
  std::string message;
};

[[noreturn]] void fail(int status, std::string message) { throw ApiError{status, std::move(message)}; }

ojson number_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

/// Everything needed to rebuild a session deterministically.
struct SessionSpec {
  std::string participant_id = "anonymous";
  BodySite site = BodySite::H1;
  int rep = 0;
  std::uint64_t seed = 0;
  bool strict = false;
  bool client_timestamps = false;
  double client_time = 0.0;       // client clock at creation (client mode)
  double client_grace = 1.0;      // how far polling lags server time in client mode
  SessionConfig session;
  StaircaseConfig staircase;
};

double read_number(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) fail(422, std::string(key) + ": expected a number");
  return obj[key].get<double>();
}

int read_int(const json& obj, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer()) fail(422, std::string(key) + ": expected an integer");
  return obj[key].get<int>();
}

void reject_unknown(const json& obj, std::initializer_list<std::string_view> known, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || key == k;
    if (!ok) fail(422, where + key + ": unknown field");
  }
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  try {
    json j = json::parse(body);
    if (!j.is_object()) fail(422, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    fail(422, std::string("malformed JSON: ") + e.what());
  }
}

SessionSpec spec_from_request(const json& req, std::uint64_t default_seed, bool strict_default) {
  reject_unknown(req,
                 {"participant_id", "site", "rep", "seed", "strict", "timestamp_mode", "client_time",
                  "client_grace_s", "session", "staircase"},
                 "");
  SessionSpec s;
  s.strict = strict_default;
  if (req.contains("participant_id")) {
    if (!req["participant_id"].is_string()) fail(422, "participant_id: expected a string");
    s.participant_id = req["participant_id"].get<std::string>();
    if (s.participant_id.empty() || s.participant_id.find_first_of(",\n\r") != std::string::npos) {
      fail(422, "participant_id: must be non-empty without commas or newlines");
    }
  }
  if (!req.contains("site") || !req["site"].is_string()) fail(422, "site: required site code");
  const auto site = parse_site(req["site"].get<std::string>());
  if (!site) fail(422, "site: unknown code '" + req["site"].get<std::string>() + "'");
  s.site = *site;
  s.rep = read_int(req, "rep", 0);
  if (s.rep < 0) fail(422, "rep: must be >= 0");
  s.seed = default_seed;
  if (req.contains("seed")) {
    if (!req["seed"].is_number_unsigned()) fail(422, "seed: expected a non-negative integer");
    s.seed = req["seed"].get<std::uint64_t>();
  }
  if (req.contains("strict")) {
    if (!req["strict"].is_boolean()) fail(422, "strict: expected true or false");
    s.strict = req["strict"].get<bool>();
  }
  if (req.contains("timestamp_mode")) {
    const auto& mode = req["timestamp_mode"];
    if (mode == "client") {
      s.client_timestamps = true;
    } else if (mode != "server") {
      fail(422, "timestamp_mode: expected \"server\" or \"client\"");
    }
  }
  if (s.client_timestamps) {
    if (!req.contains("client_time")) fail(422, "client_time: required in client timestamp mode");
    s.client_time = read_number(req, "client_time", 0.0);
    s.client_grace = read_number(req, "client_grace_s", s.client_grace);
    if (!(s.client_grace >= 0.0)) fail(422, "client_grace_s: must be >= 0");
  }
  if (req.contains("session")) {
    const json& j = req["session"];
    if (!j.is_object()) fail(422, "session: expected an object");
    reject_unknown(j, {"isi_min_s", "isi_max_s", "response_window_s", "stimulus_duration_s"}, "session.");
    s.session.isi_min = read_number(j, "isi_min_s", s.session.isi_min);
    s.session.isi_max = read_number(j, "isi_max_s", s.session.isi_max);
    s.session.response_window = read_number(j, "response_window_s", s.session.response_window);
    s.session.stimulus_duration = read_number(j, "stimulus_duration_s", s.session.stimulus_duration);
  }
  if (req.contains("staircase")) {
    const json& j = req["staircase"];
    if (!j.is_object()) fail(422, "staircase: expected an object");
    reject_unknown(j,
                   {"initial_level", "step_size", "min_level", "max_level", "target_reversals",
                    "ceiling_misses_for_nan"},
                   "staircase.");
    s.staircase.initial_level = read_number(j, "initial_level", s.staircase.initial_level);
    s.staircase.step_size = read_number(j, "step_size", s.staircase.step_size);
    s.staircase.min_level = read_number(j, "min_level", s.staircase.min_level);
    s.staircase.max_level = read_number(j, "max_level", s.staircase.max_level);
    s.staircase.target_reversals = read_int(j, "target_reversals", s.staircase.target_reversals);
    s.staircase.ceiling_misses_for_nan =
        read_int(j, "ceiling_misses_for_nan", s.staircase.ceiling_misses_for_nan);
  }
  try {
    s.session.validate();
    s.staircase.validate();
  } catch (const Error& e) {
    fail(422, e.what());
  }
  return s;
}

ojson spec_to_json(const SessionSpec& s) {
  ojson j;
  j["participant_id"] = s.participant_id;
  j["site"] = site_code(s.site);
  j["rep"] = s.rep;
  j["seed"] = s.seed;
  j["strict"] = s.strict;
  j["timestamp_mode"] = s.client_timestamps ? "client" : "server";
  if (s.client_timestamps) {
    j["client_time"] = s.client_time;
    j["client_grace_s"] = s.client_grace;
  }
  j["session"] = {{"isi_min_s", s.session.isi_min},
                  {"isi_max_s", s.session.isi_max},
                  {"response_window_s", s.session.response_window},
                  {"stimulus_duration_s", s.session.stimulus_duration}};
  j["staircase"] = {{"initial_level", s.staircase.initial_level},
                    {"step_size", s.staircase.step_size},
                    {"min_level", s.staircase.min_level},
                    {"max_level", s.staircase.max_level},
                    {"target_reversals", s.staircase.target_reversals},
                    {"ceiling_misses_for_nan", s.staircase.ceiling_misses_for_nan}};
  return j;
}

TrialRunner make_runner(const SessionSpec& s) {
  TrialSetup setup{s.session, s.staircase, s.participant_id, s.site, s.rep};
  return TrialRunner(setup, Rng(s.seed), 0.0);
}

struct Session {
  Session(std::string id_, SessionSpec spec_, double start_)
      : id(std::move(id_)), spec(std::move(spec_)), start(start_), runner(make_runner(spec)) {}

  std::mutex mu;
  std::string id;
  SessionSpec spec;
  double start;  // clock reading at session time 0
  TrialRunner runner;
};

ojson threshold_json(const TrialRunner& runner) {
  const TrialThreshold t = compute_threshold(runner.staircase());
  ojson j;
  j["threshold"] = number_or_null(t.value);
  j["saturated"] = t.saturated;
  j["reversal_values"] = t.reversal_values;
  return j;
}

ojson row_json(const TrialRow& row) {
  ojson j;
  j["stimulus_index"] = row.stimulus_index;
  j["onset_s"] = row.onset;
  j["level"] = row.level;
  j["detected"] = row.detected;
  j["reversal"] = row.reversal;
  j["latency_s"] = row.latency ? ojson(*row.latency) : ojson(nullptr);
  return j;
}

ojson event_json(const SessionEvent& e) {
  ojson j;
  j["t_s"] = e.timestamp;
  j["kind"] = to_string(e.kind);
  if (e.kind == EventKind::stimulus_onset) j["level"] = e.level;
  if (e.classification) j["classification"] = to_string(*e.classification);
  return j;
}

}  // namespace

// ---------------------------------------------------------------------------

struct SessionService::Impl {
  ServiceOptions options;
  std::shared_ptr<Clock> clock;
  mutable std::shared_mutex registry_mu;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::uint64_t next_id = 1;
  std::mutex log_mu;
  std::ofstream log;

  void append_log(const ojson& line) {
    if (!log.is_open()) return;
    std::lock_guard lock(log_mu);
    log << line.dump() << '\n';
    log.flush();
  }

  std::shared_ptr<Session> find(const std::string& id) const {
    std::shared_lock lock(registry_mu);
    const auto it = sessions.find(id);
    if (it == sessions.end()) fail(404, "unknown session '" + id + "'");
    return it->second;
  }

  double session_time(const Session& s) const { return clock->now() - s.start; }

  /// Time up to which polling may resolve expired windows.
  double poll_time(const Session& s) const {
    const double t = session_time(s);
    return s.spec.client_timestamps ? std::max(s.runner.now(), t - s.spec.client_grace) : t;
  }

  void advance(Session& s, double t) {
    if (t <= s.runner.now()) return;
    s.runner.advance_to(t);
    append_log({{"op", "advance"}, {"session_id", s.id}, {"t", t}});
  }

  ApiResponse create(const std::string& body) {
    const json req = parse_body(body);
    std::string id;
    {
      std::unique_lock lock(registry_mu);
      id = "s" + std::to_string(next_id);
      SessionSpec spec = spec_from_request(req, derive_seed(options.seed, next_id), options.strict_default);
      ++next_id;
      auto session = std::make_shared<Session>(id, std::move(spec), clock->now());
      append_log({{"op", "create"}, {"session_id", id}, {"spec", spec_to_json(session->spec)}});
      ojson out;
      out["session_id"] = id;
      const auto fields = spec_to_json(session->spec);
      for (const auto& [k, v] : fields.items()) out[k] = v;
      sessions.emplace(id, std::move(session));
      return {201, out.dump()};
    }
  }

  ApiResponse next(Session& s) {
    advance(s, poll_time(s));
    ojson out;
    out["session_id"] = s.id;
    out["now_s"] = s.runner.now();
    out["presented"] = s.runner.rows().size();
    if (s.runner.finished()) {
      out["complete"] = true;
      const auto fields = threshold_json(s.runner);
      for (const auto& [k, v] : fields.items()) out[k] = v;
    } else {
      const PendingStimulus& p = *s.runner.pending();
      out["complete"] = false;
      out["stimulus_index"] = p.index;
      out["level"] = p.level;
      out["onset_s"] = p.onset;
      out["deadline_s"] = p.deadline;
      out["duration_s"] = s.spec.session.stimulus_duration;
    }
    return {200, out.dump()};
  }

  ApiResponse respond(Session& s, const std::string& body) {
    const json req = parse_body(body);
    reject_unknown(req, {"client_timestamp"}, "");
    double t = 0.0;
    if (s.spec.client_timestamps) {
      if (!req.contains("client_timestamp")) fail(422, "client_timestamp: required in client timestamp mode");
      t = read_number(req, "client_timestamp", 0.0) - s.spec.client_time;
    } else {
      if (req.contains("client_timestamp")) read_number(req, "client_timestamp", 0.0);
      t = session_time(s);
    }
    if (s.runner.finished()) fail(409, "session is complete");
    if (t < s.runner.now()) fail(409, "response time precedes the session clock");
    if (s.spec.strict && !inside_window(s, t)) {
      advance(s, t);
      fail(409, "response outside every open window");
    }
    const ResponseOutcome outcome = s.runner.respond(t);
    append_log({{"op", "response"}, {"session_id", s.id}, {"t", t}});
    ojson out;
    out["session_id"] = s.id;
    out["t_s"] = t;
    out["classification"] = to_string(outcome.classification);
    out["collapsed"] = outcome.collapsed;
    out["stimulus_index"] = outcome.stimulus_index ? ojson(*outcome.stimulus_index) : ojson(nullptr);
    out["complete"] = s.runner.finished();
    return {200, out.dump()};
  }

  static bool inside_window(const Session& s, double t) {
    const SessionConfig& cfg = s.spec.session;
    const auto& p = s.runner.pending();
    if (p && p->deadline >= t && classify_response(cfg, p->onset, t) == ResponseClass::true_positive) {
      return true;
    }
    const auto& rows = s.runner.rows();
    return !rows.empty() && rows.back().detected &&
           classify_response(cfg, rows.back().onset, t) == ResponseClass::true_positive;
  }

  ApiResponse trace(Session& s) {
    advance(s, poll_time(s));
    const TrialRecord rec = s.runner.record();
    ojson out;
    out["session_id"] = s.id;
    out["participant_id"] = rec.participant_id;
    out["site"] = site_code(rec.site);
    out["rep"] = rec.rep;
    out["complete"] = s.runner.finished();
    ojson rows = ojson::array();
    for (const auto& r : rec.rows) rows.push_back(row_json(r));
    out["rows"] = rows;
    ojson events = ojson::array();
    for (const auto& e : s.runner.events()) events.push_back(event_json(e));
    out["events"] = events;
    out["reversal_count"] = s.runner.staircase().reversals().size();
    out["false_positive_count"] = rec.false_positive_count;
    out["late_response_count"] = rec.late_response_count;
    if (s.runner.finished()) out["threshold"] = number_or_null(rec.threshold.value);
    return {200, out.dump()};
  }

  ApiResponse result(Session& s) {
    advance(s, poll_time(s));
    if (!s.runner.finished()) fail(409, "session still running");
    const TrialRecord rec = s.runner.record();
    ojson out;
    out["session_id"] = s.id;
    const auto fields = threshold_json(s.runner);
    for (const auto& [k, v] : fields.items()) out[k] = v;
    out["presentations"] = rec.rows.size();
    out["false_positive_count"] = rec.false_positive_count;
    out["late_response_count"] = rec.late_response_count;
    return {200, out.dump()};
  }
};

SessionService::SessionService(ServiceOptions options, std::shared_ptr<Clock> clock)
    : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  impl_->clock = clock ? std::move(clock) : std::make_shared<SteadyClock>();
  if (!impl_->options.event_log_path.empty()) {
    impl_->log.open(impl_->options.event_log_path, std::ios::app);
    if (!impl_->log) throw Error(ErrorKind::io_error, "cannot open event log " + impl_->options.event_log_path);
  }
}

SessionService::~SessionService() = default;

std::size_t SessionService::session_count() const {
  std::shared_lock lock(impl_->registry_mu);
  return impl_->sessions.size();
}

ApiResponse SessionService::handle(std::string_view method, std::string_view path, const std::string& body) {
  auto error_body = [](const std::string& msg) { return ojson{{"error", msg}}.dump(); };
  try {
    std::vector<std::string> parts;
    std::string segment;
    std::istringstream in{std::string(path)};
    while (std::getline(in, segment, '/')) {
      if (!segment.empty()) parts.push_back(segment);
    }
    if (parts.empty() || parts[0] != "sessions" || parts.size() == 2 || parts.size() > 3) {
      fail(404, "no such endpoint");
    }
    if (parts.size() == 1) {
      if (method != "POST") fail(405, "use POST /sessions");
      return impl_->create(body);
    }
    const std::string& action = parts[2];
    const bool is_post = action == "response";
    if (action != "response" && action != "next" && action != "trace" && action != "result") {
      fail(404, "no such endpoint");
    }
    if ((is_post && method != "POST") || (!is_post && method != "GET")) fail(405, "method not allowed");
    auto session = impl_->find(parts[1]);
    std::lock_guard lock(session->mu);
    if (action == "next") return impl_->next(*session);
    if (action == "response") return impl_->respond(*session, body);
    if (action == "trace") return impl_->trace(*session);
    return impl_->result(*session);
  } catch (const ApiError& e) {
    return {e.status, error_body(e.message)};
  } catch (const Error& e) {
    return {500, error_body(e.what())};
  }
}

namespace {

struct ReplayedSession {
  std::string id;
  SessionSpec spec;
  std::optional<TrialRunner> runner;
  double last_t = 0.0;
};

SessionSpec spec_from_log(const json& j) {
  json req = j;
  const bool strict = req.value("strict", false);
  const std::uint64_t seed = req.at("seed").get<std::uint64_t>();
  return spec_from_request(req, seed, strict);
}

std::vector<ReplayedSession> replay_log(const std::string& text) {
  std::vector<ReplayedSession> out;
  std::map<std::string, std::size_t> index;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string op = j.at("op").get<std::string>();
      const std::string id = j.at("session_id").get<std::string>();
      if (op == "create") {
        ReplayedSession s;
        s.id = id;
        s.spec = spec_from_log(j.at("spec"));
        s.runner.emplace(make_runner(s.spec));
        index[id] = out.size();
        out.push_back(std::move(s));
        continue;
      }
      const auto it = index.find(id);
      if (it == index.end()) throw Error(ErrorKind::parse_error, "event for unknown session " + id);
      ReplayedSession& s = out[it->second];
      const double t = j.at("t").get<double>();
      if (op == "advance") {
        s.runner->advance_to(t);
      } else if (op == "response") {
        s.runner->respond(t);
      } else {
        throw Error(ErrorKind::parse_error, "unknown op '" + op + "'");
      }
      s.last_t = t;
    } catch (const json::exception& e) {
      throw Error(ErrorKind::parse_error, "event log line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ApiError& e) {
      throw Error(ErrorKind::parse_error, "event log line " + std::to_string(line_no) + ": " + e.message);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::parse_error) throw;
      throw Error(ErrorKind::parse_error, "event log line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<TrialRecord> trial_records_from_event_log(const std::string& text) {
  std::vector<TrialRecord> out;
  for (const auto& s : replay_log(text)) out.push_back(s.runner->record());
  return out;
}

std::size_t SessionService::recover(const std::string& event_log_path) {
  std::ifstream in(event_log_path);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + event_log_path);
  std::ostringstream buf;
  buf << in.rdbuf();
  auto replayed = replay_log(buf.str());
  std::unique_lock lock(impl_->registry_mu);
  const double now = impl_->clock->now();
  for (auto& r : replayed) {
    // Resume the session clock where the log stopped.
    auto session = std::make_shared<Session>(r.id, r.spec, now - r.last_t);
    session->runner = std::move(*r.runner);
    impl_->sessions[r.id] = std::move(session);
    if (r.id.size() > 1 && r.id[0] == 's') {
      const std::uint64_t n = std::stoull(r.id.substr(1));
      impl_->next_id = std::max(impl_->next_id, n + 1);
    }
  }
  return replayed.size();
}

// ---------------------------------------------------------------------------

struct HttpServer::Impl {
  SessionService& service;
  ServeOptions options;
  httplib::Server server;

  Impl(SessionService& s, ServeOptions o) : service(s), options(std::move(o)) {}
};

HttpServer::HttpServer(SessionService& service, ServeOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    const ApiResponse r = impl_->service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  impl_->server.Post("/sessions", forward);
  impl_->server.Get(R"(/sessions/.+)", forward);
  impl_->server.Post(R"(/sessions/.+)", forward);
  if (!impl_->options.static_dir.empty() &&
      !impl_->server.set_mount_point("/", impl_->options.static_dir)) {
    throw Error(ErrorKind::io_error, "static directory not found: " + impl_->options.static_dir);
  }
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  const auto& o = impl_->options;
  if (o.port == 0) {
    const int port = impl_->server.bind_to_any_port(o.host);
    if (port < 0) throw Error(ErrorKind::io_error, "cannot bind " + o.host);
    return port;
  }
  if (!impl_->server.bind_to_port(o.host, o.port)) {
    throw Error(ErrorKind::io_error, "cannot bind " + o.host + ":" + std::to_string(o.port));
  }
  return o.port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace vpt
