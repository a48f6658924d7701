// Acceptance gate: one PASS/FAIL line per criterion, tolerances pinned below.
//
//   acceptance [--known-red NAME]...
//
// Exits 0 when every criterion passes or fails only among the names given
// with --known-red; those still print FAIL.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "pipeline.hpp"
#include "vpt/clinical.hpp"
#include "vpt/observer.hpp"
#include "vpt/session.hpp"
#include "vpt/staircase.hpp"
#include "vpt/stats.hpp"

namespace fs = std::filesystem;
namespace st = vpt::stats;

namespace {

// Pinned tolerances.
constexpr int kConvergenceRuns = 1000;
constexpr double kConvergenceTolerance = 0.05;  // one step
constexpr double kConvergenceSeconds = 5.0;
constexpr double kReferenceTolerance = 1e-9;
constexpr double kOracleSeconds = 30.0;
constexpr int kTrendSeeds = 100;
constexpr int kTrendRequired = 95;
constexpr double kTrendAlpha = 0.05;
constexpr double kTrendSeconds = 120.0;
constexpr int kTimingIntervals = 10000;
constexpr double kTimingMeanSigmas = 4.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome staircase_convergence() {
  const auto start = Clock::now();
  const vpt::PsychometricObserver obs{0.3, 0.02, 0.0, 0.0, 0.0};
  double sum = 0.0;
  int nan_count = 0;
  for (int i = 0; i < kConvergenceRuns; ++i) {
    vpt::SimulatedResponder responder(obs, vpt::Rng(vpt::derive_seed(2024, i, 1)));
    vpt::Rng rng(vpt::derive_seed(2024, i, 0));
    const auto rec = vpt::run_trial(vpt::TrialSetup{}, responder, rng);
    if (std::isnan(rec.threshold.value)) {
      ++nan_count;
    } else {
      sum += rec.threshold.value;
    }
  }
  const double mean = sum / (kConvergenceRuns - nan_count);
  const double elapsed = seconds_since(start);
  Outcome o;
  o.pass = nan_count == 0 && std::fabs(mean - 0.3) <= kConvergenceTolerance && elapsed < kConvergenceSeconds;
  o.detail = fmt("mean=%.4f target=0.3 tol=%.2f nan=%.0f time=%.2fs", mean, kConvergenceTolerance, nan_count,
                 elapsed);
  return o;
}

Outcome exact_trace() {
  vpt::DeterministicResponder responder({0.23});
  vpt::Rng rng(1);
  const auto rec = vpt::run_trial(vpt::TrialSetup{}, responder, rng);
  // Hand-written expectation: climb from 0.05 to 0.25, then alternate 0.20/0.25.
  const std::vector<double> levels{0.05, 0.10, 0.15, 0.20, 0.25, 0.20,
                                   0.25, 0.20, 0.25, 0.20, 0.25, 0.20};
  const std::vector<bool> detected{false, false, false, false, true, false,
                                   true,  false, true,  false, true, false};
  const std::vector<bool> reversal{false, false, false, false, true, true,
                                   true,  true,  true,  true,  true, true};
  bool match = rec.rows.size() == levels.size();
  for (std::size_t i = 0; match && i < levels.size(); ++i) {
    match = std::fabs(rec.rows[i].level - levels[i]) < 1e-12 && rec.rows[i].detected == detected[i] &&
            rec.rows[i].reversal == reversal[i];
  }
  Outcome o;
  o.pass = match && rec.threshold.value == 0.225;
  o.detail = fmt("threshold=%.17g presentations=%.0f sequence_match=%.0f", rec.threshold.value,
                 static_cast<double>(rec.rows.size()), match ? 1.0 : 0.0);
  return o;
}

Outcome nan_rule() {
  vpt::SilentResponder responder;
  vpt::Rng rng(1);
  const auto rec = vpt::run_trial(vpt::TrialSetup{}, responder, rng);
  int trailing = 0;
  for (auto it = rec.rows.rbegin(); it != rec.rows.rend() && it->level == 1.0; ++it) ++trailing;
  Outcome o;
  o.pass = rec.threshold.saturated && std::isnan(rec.threshold.value) && trailing == 3;
  o.detail = fmt("trailing_at_1.0=%.0f presentations=%.0f threshold_is_nan=%.0f", trailing,
                 static_cast<double>(rec.rows.size()), std::isnan(rec.threshold.value) ? 1.0 : 0.0);
  return o;
}

Outcome stats_oracle() {
  const auto start = Clock::now();
  const auto sr = oracle::sweep_signed_rank([](const auto& x, const auto& y, bool less) {
    return st::wilcoxon_signed_rank_one_sided(x, y, less ? st::Alternative::less : st::Alternative::greater)
        .p_value;
  });
  const auto rs = oracle::sweep_rank_sum([](const auto& x, const auto& y, bool less) {
    return st::wilcoxon_rank_sum_one_sided(x, y, less ? st::Alternative::less : st::Alternative::greater).p_value;
  });

  // Reference values from scipy 1.15.3 / numpy inverted_cdf on fixed 10-point data.
  const std::vector<double> x{0.21, 0.18, 0.30, 0.25, 0.12, 0.27, 0.19, 0.33, 0.16, 0.22};
  const std::vector<double> y{0.35, 0.29, 0.52, 0.31, 0.20, 0.61, 0.24, 0.45, 0.40, 0.28};
  const std::vector<double> z{4.0, 5.0, 3.0, 4.0, 6.0, 2.0, 5.0, 3.0, 4.0, 5.0};
  const std::vector<double> m{0.07, 0.07, 0.16, 0.4, 0.07, 0.6, 0.16, 0.4, 0.16, 0.07};
  const auto paired = st::t_test_one_sided(x, y, true, st::Alternative::less);
  const auto welch = st::t_test_one_sided(x, y, false, st::Alternative::less);
  const auto pr = st::pearson(x, z);
  const auto sp = st::spearman(x, m);
  const std::vector<std::pair<double, double>> checks{
      {paired.statistic, -4.699800074473326}, {paired.p_value, 0.000560242955460042},
      {welch.statistic, -3.094930013293453},  {welch.p_value, 0.004182211333682751},
      {welch.df, 13.249841888617649},         {pr.coefficient, -0.8040158399750233},
      {pr.p_value, 0.005057004054592136},     {sp.coefficient, 0.6292853089020909},
      {sp.p_value, 0.05124855216842294},      {st::quantile_type1(y, 0.25), 0.28},
      {st::quantile_type1(y, 0.5), 0.31},     {st::quantile_type1(y, 0.75), 0.45},
      {st::quantile_type1(y, 0.1), 0.2},      {st::quantile_type1(y, 0.9), 0.52}};
  double worst_ref = 0.0;
  for (const auto& [got, want] : checks) worst_ref = std::max(worst_ref, std::fabs(got - want));
  const double elapsed = seconds_since(start);

  Outcome o;
  o.pass = sr.mismatches == 0 && rs.mismatches == 0 && worst_ref <= kReferenceTolerance && elapsed < kOracleSeconds;
  o.detail = fmt("signed_rank %.0f cases/%.0f mismatches, rank_sum %.0f cases/%.0f mismatches",
                 static_cast<double>(sr.cases), static_cast<double>(sr.mismatches),
                 static_cast<double>(rs.cases), static_cast<double>(rs.mismatches)) +
             fmt(", reference max|err|=%.1e time=%.1fs", worst_ref, elapsed);
  return o;
}

Outcome trend_reproduction() {
  const auto start = Clock::now();
  const auto spec = vpt::load_cohort_spec(testing_support::data_path("paper_calibrated.json"));
  int site_hits[3] = {0, 0, 0};
  int age_toe = 0;
  int neg_sp_tf = 0;
  int pos_sp_mf = 0;
  for (int seed = 1; seed <= kTrendSeeds; ++seed) {
    const auto report = testing_support::run_pipeline(spec, static_cast<std::uint64_t>(seed)).report;
    auto significant = [](const vpt::Comparison& c) {
      return c.result && c.result->p_adjusted && *c.result->p_adjusted < kTrendAlpha;
    };
    for (int m = 0; m < 3; ++m) site_hits[m] += significant(report.comparisons[m]) ? 1 : 0;
    for (const auto& c : report.comparisons) {
      if (c.kind == vpt::ComparisonKind::age && c.modality == vpt::Modality::smartphone &&
          c.site == vpt::BodySite::F && significant(c)) {
        ++age_toe;
      }
    }
    for (const auto& c : report.correlations) {
      if (c.sites.empty() || !c.result) continue;
      if (c.a == vpt::Modality::smartphone && c.b == vpt::Modality::tuning_fork && c.result->coefficient < 0) {
        ++neg_sp_tf;
      }
      if (c.a == vpt::Modality::smartphone && c.b == vpt::Modality::monofilament && c.result->coefficient > 0) {
        ++pos_sp_mf;
      }
    }
  }
  const double elapsed = seconds_since(start);
  Outcome o;
  o.pass = site_hits[0] >= kTrendRequired && site_hits[1] >= kTrendRequired && site_hits[2] >= kTrendRequired &&
           age_toe >= kTrendRequired && neg_sp_tf >= kTrendRequired && pos_sp_mf >= kTrendRequired &&
           elapsed < kTrendSeconds;
  o.detail = fmt("finger<toe smartphone %.0f, fork %.0f, mono %.0f; ", site_hits[0], site_hits[1], site_hits[2]) +
             fmt("younger<older toe %.0f; r(sp,tf)<0 %.0f; rho(sp,mf)>0 %.0f", age_toe, neg_sp_tf, pos_sp_mf) +
             fmt(" of %.0f seeds (need %.0f) time=%.1fs", kTrendSeeds, kTrendRequired, elapsed);
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = "env -u PERCEPT_SEED " + std::string(PERCEPT_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("percept_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string spec = testing_support::data_path("paper_calibrated.json");
  bool ok = run_cli("study --spec " + spec + " --seed 1 --out " + (dir / "a").string()) == 0 &&
            run_cli("study --spec " + spec + " --seed 1 --out " + (dir / "b").string()) == 0;
  int identical = 0;
  for (const char* f : {"measurements.csv", "report.json", "report.txt"}) {
    const auto a = slurp(dir / "a" / f);
    if (!a.empty() && a == slurp(dir / "b" / f)) ++identical;
  }
  ok = ok && identical == 3;

  const std::string observer = testing_support::data_path("observer_example.json");
  const bool sim_ok =
      run_cli("simulate --observer " + observer + " --trials 3 --seed 7 --out " + (dir / "sim").string()) == 0;
  int golden_match = 0;
  int golden_total = 0;
  for (const auto& entry : fs::directory_iterator(fs::path(PERCEPT_TEST_GOLDEN_DIR) / "simulate_seed7")) {
    if (entry.path().extension() != ".csv") continue;
    ++golden_total;
    if (slurp(entry.path()) == slurp(dir / "sim" / entry.path().filename())) ++golden_match;
  }
  fs::remove_all(dir);
  Outcome o;
  o.pass = ok && sim_ok && golden_total > 0 && golden_match == golden_total;
  o.detail = fmt("study outputs identical %.0f/3; simulate golden CSVs %.0f/%.0f", identical, golden_match,
                 golden_total);
  return o;
}

Outcome timing_contract() {
  vpt::SessionConfig cfg;
  vpt::Rng rng(31);
  double now = 0.0;
  double sum = 0.0;
  int out_of_range = 0;
  for (int i = 0; i < kTimingIntervals; ++i) {
    const double next = vpt::schedule_next_stimulus(cfg, now, rng);
    const double isi = next - now;
    if (isi < 3.0 || isi > 6.0) ++out_of_range;
    sum += isi;
    now = next;
  }
  const double mean = sum / kTimingIntervals;
  const double se = 3.0 / std::sqrt(12.0) / std::sqrt(static_cast<double>(kTimingIntervals));
  const bool mean_ok = std::fabs(mean - 4.5) <= kTimingMeanSigmas * se;

  vpt::TrialRunner hit(vpt::TrialSetup{}, vpt::Rng(5));
  const auto tp = hit.respond(hit.pending()->onset + 2.4);
  vpt::TrialRunner miss(vpt::TrialSetup{}, vpt::Rng(5));
  const auto late = miss.respond(miss.pending()->onset + 2.6);
  const bool window_ok = tp.classification == vpt::ResponseClass::true_positive && hit.rows().at(0).detected &&
                         late.classification == vpt::ResponseClass::ignored_late && !miss.rows().at(0).detected;
  Outcome o;
  o.pass = out_of_range == 0 && mean_ok && window_ok;
  o.detail = fmt("intervals outside [3,6]=%.0f mean=%.4f (4.5 +/- %.4f) window_2.4/2.6_ok=%.0f", out_of_range,
                 mean, kTimingMeanSigmas * se, window_ok ? 1.0 : 0.0);
  return o;
}

Outcome monofilament_sweep() {
  const auto set = vpt::load_monofilament_set(testing_support::data_path("monofilament_touch_test.json"));
  vpt::Rng rng(1);
  int table_ok = 0;
  for (const auto& row : oracle::kMonofilamentTable) {
    const double feel_from = row.feel_from < 20 ? set.sizes[row.feel_from] : 1000.0;
    const vpt::ForceResponder responder{vpt::deterministic_force_observer(feel_from), 0.0};
    const auto r = vpt::run_monofilament_exam(set, responder, set.sizes[row.start_index], rng);
    const bool threshold_ok = row.threshold_index < 0 ? r.none_felt()
                                                      : (!r.none_felt() && *r.threshold == set.sizes[row.threshold_index]);
    if (threshold_ok && static_cast<int>(r.touch_log.size()) == row.touches) ++table_ok;
  }
  int monotone_violations = 0;
  int pairs = 0;
  for (const double start : {0.07, 0.4}) {
    for (std::size_t a = 0; a < set.sizes.size(); ++a) {
      for (std::size_t b = a + 1; b < set.sizes.size(); ++b) {
        const vpt::ForceResponder ra{vpt::deterministic_force_observer(set.sizes[a]), 0.0};
        const vpt::ForceResponder rb{vpt::deterministic_force_observer(set.sizes[b]), 0.0};
        if (vpt::run_monofilament_exam(set, ra, start, rng).value() >
            vpt::run_monofilament_exam(set, rb, start, rng).value()) {
          ++monotone_violations;
        }
        ++pairs;
      }
    }
  }
  Outcome o;
  const auto rows = static_cast<int>(oracle::kMonofilamentTable.size());
  o.pass = table_ok == rows && monotone_violations == 0;
  o.detail = fmt("oracle table %.0f/%.0f rows; monotonicity violations %.0f of %.0f pairs", table_ok, rows,
                 monotone_violations, pairs);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> known_red;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--known-red" && i + 1 < argc) {
      known_red.insert(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: acceptance [--known-red NAME]...\n");
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"staircase_convergence", staircase_convergence},
      {"exact_trace", exact_trace},
      {"nan_rule", nan_rule},
      {"stats_oracle", stats_oracle},
      {"trend_reproduction", trend_reproduction},
      {"determinism", determinism},
      {"timing_contract", timing_contract},
      {"monofilament_sweep", monofilament_sweep},
  };

  int unexpected = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const bool red_ok = known_red.count(name) > 0;
    std::printf("%s %-22s %s%s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
                !o.pass && red_ok ? "  [known red]" : "");
    std::fflush(stdout);
    if (!o.pass && !red_ok) ++unexpected;
  }
  return unexpected == 0 ? 0 : 1;
}
