#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpt/report.hpp"
#include "vpt/study.hpp"

namespace testing_support {

inline std::string data_path(const std::string& name) {
  return std::string(PERCEPT_TEST_DATA_DIR) + "/" + name;
}

struct PipelineOutput {
  std::vector<vpt::SimulatedParticipant> cohort;
  vpt::StudyRun run;
  std::vector<vpt::SiteMeasurement> marked;
  vpt::StudyReport report;
};

/// Cohort generation, virtual study, exclusions and analysis in the same
/// order as `percept study`.
inline PipelineOutput run_pipeline(const vpt::CohortSpec& spec, std::uint64_t seed) {
  vpt::StudyConfig config;
  config.monofilaments = vpt::load_monofilament_set(data_path("monofilament_touch_test.json"));
  PipelineOutput out;
  vpt::Rng rng(seed);
  out.cohort = vpt::generate_cohort(spec, rng);
  out.run = vpt::run_virtual_study(out.cohort, config, spec, rng);
  out.marked = vpt::mark_exclusions(out.run.measurements, {}, out.run.logs);
  out.report = vpt::analyze_study(out.marked);
  return out;
}

}  // namespace testing_support
