#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "vpt/session.hpp"

namespace vpt {

/// Seconds on a monotonic time line.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() const = 0;
};

class SteadyClock final : public Clock {
 public:
  double now() const override;
};

/// Clock that only moves when told to.
class ManualClock final : public Clock {
 public:
  explicit ManualClock(double start = 0.0) : now_(start) {}
  double now() const override;
  void set(double t);
  void advance(double dt);

 private:
  mutable std::mutex mu_;
  double now_;
};

struct ServiceOptions {
  /// Master seed for sessions created without an explicit seed.
  std::uint64_t seed = 1;
  /// Reject responses that fall outside every open window with 409.
  bool strict_default = false;
  /// Append-only JSONL event log; empty disables persistence.
  std::string event_log_path;
};

struct ApiResponse {
  int status = 200;
  std::string body;  // JSON
};

/// The exam session API, independent of the HTTP transport:
///   POST /sessions                 create; returns session_id
///   GET  /sessions/{id}/next       pending stimulus, or completion with threshold
///   POST /sessions/{id}/response   register a "yes"; returns its classification
///   GET  /sessions/{id}/trace      rows and events so far
///   GET  /sessions/{id}/result     threshold once finished (409 before)
/// Session time is seconds since creation on the injected clock. With
/// "timestamp_mode": "client", the creation request carries the client's
/// clock reading and later client_timestamp values are shifted by the
/// measured offset. This trusts the client and is less accurate than server
/// receipt time.
class SessionService {
 public:
  explicit SessionService(ServiceOptions options = {}, std::shared_ptr<Clock> clock = nullptr);
  ~SessionService();
  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  ApiResponse handle(std::string_view method, std::string_view path, const std::string& body);

  /// Rebuilds sessions from an event log written by a previous service.
  /// Returns the number of sessions restored.
  std::size_t recover(const std::string& event_log_path);

  std::size_t session_count() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Replays an event log into the trial records of every session it mentions,
/// in creation order. Unfinished sessions keep their rows and no threshold.
std::vector<TrialRecord> trial_records_from_event_log(const std::string& text);

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::string static_dir;  // served at / when set
};

/// HTTP front end for a SessionService.
class HttpServer {
 public:
  HttpServer(SessionService& service, ServeOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds the socket; returns the bound port. Throws Error(io_error).
  int bind();
  /// Blocks until stop() is called.
  void listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace vpt
