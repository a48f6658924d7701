// percept: command-line front end for the staircase simulator, the virtual
// study pipeline, the analysis report and the HTTP session service.

#include <cmath>
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vpt/error.hpp"
#include "vpt/format.hpp"
#include "vpt/observer.hpp"
#include "vpt/report.hpp"
#include "vpt/service.hpp"
#include "vpt/session.hpp"
#include "vpt/stats.hpp"
#include "vpt/study.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Raised for bad flag values detected after parsing.
struct UsageError {
  std::string message;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw vpt::Error(vpt::ErrorKind::io_error, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw vpt::Error(vpt::ErrorKind::io_error, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw vpt::Error(vpt::ErrorKind::io_error, "write failed for " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw vpt::Error(vpt::ErrorKind::io_error, "cannot create " + dir.string() + ": " + ec.message());
}

/// --seed, then PERCEPT_SEED, then the fallback.
std::uint64_t resolve_seed(const CLI::Option* flag, std::uint64_t flag_value, std::uint64_t fallback) {
  if (flag->count() > 0) return flag_value;
  if (const char* env = std::getenv("PERCEPT_SEED")) {
    try {
      std::size_t used = 0;
      const std::string text(env);
      const auto value = std::stoull(text, &used);
      if (used != text.size() || text.empty() || text[0] == '-') throw std::invalid_argument(text);
      return value;
    } catch (const std::exception&) {
      throw UsageError{"PERCEPT_SEED must be a non-negative integer, got '" + std::string(env) + "'"};
    }
  }
  return fallback;
}

std::string default_monofilament_set() {
  std::vector<fs::path> candidates;
  if (const char* dir = std::getenv("PERCEPT_DATA_DIR")) candidates.emplace_back(dir);
  candidates.emplace_back(PERCEPT_SOURCE_DATA_DIR);
  candidates.emplace_back(PERCEPT_INSTALL_DATA_DIR);
  for (const auto& dir : candidates) {
    const fs::path p = dir / "monofilament_touch_test.json";
    if (fs::exists(p)) return p.string();
  }
  throw UsageError{"no monofilament set found; pass --monofilaments"};
}

std::string trial_file_name(std::size_t index, std::size_t total) {
  const int width = std::max<int>(4, static_cast<int>(std::to_string(total).size()));
  char buf[64];
  std::snprintf(buf, sizeof buf, "trial_%0*zu.csv", width, index);
  return buf;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string observer;
  int trials = 1;
  std::uint64_t seed = 1;
  std::string out;
  std::string site = "H1";
  std::string participant = "SIM";
  double latency = 0.8;
};

int run_simulate(const SimulateArgs& a, const CLI::Option* seed_flag) {
  const std::uint64_t seed = resolve_seed(seed_flag, a.seed, 1);
  const vpt::PsychometricObserver observer = vpt::load_observer(a.observer);
  const auto site = vpt::parse_site(a.site);
  if (!site) throw UsageError{"--site: unknown code '" + a.site + "'"};
  const fs::path out(a.out);
  ensure_dir(out);

  std::vector<vpt::TrialThreshold> thresholds;
  const auto n = static_cast<std::size_t>(a.trials);
  for (std::size_t i = 1; i <= n; ++i) {
    vpt::TrialSetup setup;
    setup.participant_id = a.participant;
    setup.site = *site;
    setup.rep = static_cast<int>(i);
    vpt::Rng schedule(vpt::derive_seed(seed, i, 0));
    vpt::SimulatedResponder responder(observer, vpt::Rng(vpt::derive_seed(seed, i, 1)), a.latency);
    const vpt::TrialRecord record = vpt::run_trial(setup, responder, schedule);
    vpt::write_trial_csv(record, (out / trial_file_name(i, n)).string());
    thresholds.push_back(record.threshold);
  }

  const vpt::SiteThreshold agg = vpt::aggregate_site_threshold(thresholds);
  std::vector<double> values;
  for (const auto& t : thresholds) values.push_back(t.value);
  const auto finite = vpt::stats::drop_nan(values);
  nlohmann::ordered_json summary;
  summary["trials"] = n;
  summary["seed"] = seed;
  summary["observer"] = {{"alpha", observer.alpha},
                         {"beta", observer.beta},
                         {"guess", observer.guess},
                         {"lapse", observer.lapse},
                         {"false_positive_rate", observer.false_positive_rate}};
  try {
    summary["fifty_percent_point"] = vpt::fifty_percent_point(observer);
  } catch (const vpt::Error&) {
    summary["fifty_percent_point"] = nullptr;
  }
  summary["mean_threshold"] = std::isfinite(agg.value) ? nlohmann::ordered_json(agg.value) : nullptr;
  summary["sd_threshold"] = finite.size() >= 2 ? nlohmann::ordered_json(std::sqrt(vpt::stats::variance(finite)))
                                               : nlohmann::ordered_json(nullptr);
  summary["nan_trials"] = agg.nan_count;
  write_file(out / "summary.json", summary.dump(2) + "\n");
  std::cout << "trials=" << n << " mean_threshold=" << vpt::format_double(agg.value)
            << " nan_trials=" << agg.nan_count << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct AnalysisArgs {
  int site_m = 3;
  int age_m = 2;
  bool pooled = false;
};

vpt::AnalysisConfig analysis_config(const AnalysisArgs& a) {
  vpt::AnalysisConfig c;
  c.site_comparisons = a.site_m;
  c.age_comparisons = a.age_m;
  c.unpaired_variant = a.pooled ? vpt::stats::TVariant::pooled : vpt::stats::TVariant::welch;
  return c;
}

struct StudyArgs {
  std::string spec;
  std::uint64_t seed = 1;
  std::string out;
  std::string monofilaments;
  int max_false_positives = 3;
  bool keep_equipment_change = false;
  AnalysisArgs analysis;
};

int run_study(const StudyArgs& a, const CLI::Option* seed_flag) {
  const vpt::CohortSpec spec = vpt::load_cohort_spec(a.spec);
  const std::uint64_t seed = resolve_seed(seed_flag, a.seed, spec.seed);
  vpt::StudyConfig config;
  config.monofilaments = vpt::load_monofilament_set(a.monofilaments.empty() ? default_monofilament_set()
                                                                           : a.monofilaments);
  const fs::path out(a.out);
  ensure_dir(out);

  vpt::Rng rng(seed);
  const auto cohort = vpt::generate_cohort(spec, rng);
  const vpt::StudyRun run = vpt::run_virtual_study(cohort, config, spec, rng);
  const vpt::ExclusionRule rule{a.max_false_positives, !a.keep_equipment_change};
  const auto marked = vpt::mark_exclusions(run.measurements, rule, run.logs);
  const vpt::StudyReport report = vpt::analyze_study(marked, analysis_config(a.analysis));

  vpt::CohortSpec resolved = spec;
  resolved.seed = seed;
  write_file(out / "cohort.json", vpt::cohort_spec_to_json_text(resolved));
  write_file(out / "measurements.csv", vpt::export_measurements_csv(marked));
  write_file(out / "study_log.json", vpt::export_study_log_json(run.logs));
  write_file(out / "report.json", vpt::report_to_json(report));
  const std::string table = vpt::report_to_table(report);
  write_file(out / "report.txt", table);
  std::cout << table;
  return 0;
}

struct AnalyzeArgs {
  std::string measurements;
  std::string out;
  bool json = false;
  AnalysisArgs analysis;
};

int run_analyze(const AnalyzeArgs& a) {
  const auto measurements = vpt::import_measurements_csv(read_file(a.measurements));
  const vpt::StudyReport report = vpt::analyze_study(measurements, analysis_config(a.analysis));
  const std::string json = vpt::report_to_json(report);
  const std::string table = vpt::report_to_table(report);
  if (!a.out.empty()) {
    const fs::path out(a.out);
    ensure_dir(out);
    write_file(out / "report.json", json);
    write_file(out / "report.txt", table);
  }
  std::cout << (a.json ? json : table);
  return 0;
}

// ---------------------------------------------------------------------------

vpt::HttpServer* g_server = nullptr;

extern "C" void handle_stop_signal(int) {
  if (g_server) g_server->stop();
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
  std::string event_log;
  bool recover = false;
  bool strict = false;
  std::uint64_t seed = 1;
};

int run_serve(const ServeArgs& a, const CLI::Option* seed_flag) {
  vpt::ServiceOptions options;
  options.seed = resolve_seed(seed_flag, a.seed, 1);
  options.strict_default = a.strict;
  if (a.recover && a.event_log.empty()) throw UsageError{"--recover needs --event-log"};
  options.event_log_path = a.event_log;
  vpt::SessionService service(options);
  if (a.recover && fs::exists(a.event_log)) {
    std::cerr << "recovered " << service.recover(a.event_log) << " session(s)\n";
  }
  vpt::HttpServer server(service, {a.host, a.port, a.static_dir});
  const int port = server.bind();
  g_server = &server;
  std::signal(SIGINT, handle_stop_signal);
  std::signal(SIGTERM, handle_stop_signal);
  std::cerr << "listening on http://" << a.host << ":" << port << "\n";
  server.listen();
  g_server = nullptr;
  return 0;
}

struct ExportArgs {
  std::string log;
  std::string out;
};

int run_export(const ExportArgs& a) {
  const auto records = vpt::trial_records_from_event_log(read_file(a.log));
  const fs::path out(a.out);
  ensure_dir(out);
  std::size_t i = 0;
  for (const auto& r : records) {
    ++i;
    char name[32];
    std::snprintf(name, sizeof name, "session_%03zu_", i);
    const std::string file = std::string(name) + r.participant_id + "_" + std::string(vpt::site_code(r.site)) +
                             "_rep" + std::to_string(r.rep) + ".csv";
    vpt::write_trial_csv(r, (out / file).string());
  }
  std::cout << "exported " << records.size() << " session(s)\n";
  return 0;
}

void add_analysis_flags(CLI::App* cmd, AnalysisArgs& a) {
  cmd->add_option("--site-comparisons", a.site_m, "Bonferroni family size for finger vs toe")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--age-comparisons", a.age_m, "Bonferroni family size for younger vs older")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--pooled-t", a.pooled, "Pooled-variance unpaired t test instead of Welch");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vibrotactile perception threshold toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run seeded staircases against a simulated observer");
  simulate->add_option("--observer", sim.observer, "Observer JSON {alpha, beta, guess, lapse, false_positive_rate}")
      ->required()
      ->check(CLI::ExistingFile);
  simulate->add_option("--trials", sim.trials, "Number of staircases")->check(CLI::Range(1, 10'000'000));
  auto* sim_seed = simulate->add_option("--seed", sim.seed, "Master seed (default: $PERCEPT_SEED, else 1)");
  simulate->add_option("--out", sim.out, "Output directory")->required();
  simulate->add_option("--site", sim.site, "Body site code recorded in the CSVs");
  simulate->add_option("--participant", sim.participant, "Participant id recorded in the CSVs");
  simulate->add_option("--latency", sim.latency, "Response latency in seconds")->check(CLI::NonNegativeNumber);

  StudyArgs st;
  auto* study = app.add_subcommand("study", "Generate a cohort, run the virtual study and analyze it");
  study->add_option("--spec", st.spec, "Cohort spec JSON")->required()->check(CLI::ExistingFile);
  auto* study_seed = study->add_option("--seed", st.seed, "Master seed (default: $PERCEPT_SEED, else the spec's)");
  study->add_option("--out", st.out, "Output directory")->required();
  study->add_option("--monofilaments", st.monofilaments, "Monofilament set JSON")->check(CLI::ExistingFile);
  study->add_option("--max-false-positives", st.max_false_positives, "Exclusion limit per clinical exam")
      ->check(CLI::NonNegativeNumber);
  study->add_flag("--keep-equipment-change", st.keep_equipment_change,
                  "Do not exclude participants flagged for a tuning fork change");
  add_analysis_flags(study, st.analysis);

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Analyze a measurement CSV");
  analyze->add_option("--measurements", an.measurements, "Measurement CSV")->required()->check(CLI::ExistingFile);
  analyze->add_option("--out", an.out, "Write report.json and report.txt here");
  analyze->add_flag("--json", an.json, "Print JSON instead of the table");
  add_analysis_flags(analyze, an.analysis);

  ServeArgs sv;
  auto* serve = app.add_subcommand("serve", "Serve the exam session API");
  serve->add_option("--host", sv.host, "Bind address");
  serve->add_option("--port", sv.port, "TCP port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--static", sv.static_dir, "Directory served at /")->check(CLI::ExistingDirectory);
  serve->add_option("--event-log", sv.event_log, "Append-only JSONL event log");
  serve->add_flag("--recover", sv.recover, "Restore sessions from --event-log before serving");
  serve->add_flag("--strict", sv.strict, "Answer 409 to responses outside any open window");
  auto* serve_seed = serve->add_option("--seed", sv.seed, "Master seed for session schedules");

  ExportArgs ex;
  auto* exp = app.add_subcommand("export", "Convert a session event log into trial CSVs");
  exp->add_option("--log", ex.log, "Event log written by serve --event-log")->required()->check(CLI::ExistingFile);
  exp->add_option("--out", ex.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (simulate->parsed()) return run_simulate(sim, sim_seed);
    if (study->parsed()) return run_study(st, study_seed);
    if (analyze->parsed()) return run_analyze(an);
    if (serve->parsed()) return run_serve(sv, serve_seed);
    if (exp->parsed()) return run_export(ex);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.message << "\n";
    return kExitUsage;
  } catch (const vpt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case vpt::ErrorKind::invalid_spec:
      case vpt::ErrorKind::invalid_config:
      case vpt::ErrorKind::parse_error:
        return kExitUsage;
      default:
        return kExitRuntime;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
