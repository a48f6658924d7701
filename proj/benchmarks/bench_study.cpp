#include <benchmark/benchmark.h>

#include <string>

#include "vpt/clinical.hpp"
#include "vpt/report.hpp"
#include "vpt/study.hpp"

namespace {

void BM_StudyPipeline(benchmark::State& state) {
  const std::string data = PERCEPT_BENCH_DATA_DIR;
  const auto spec = vpt::load_cohort_spec(data + "/paper_calibrated.json");
  vpt::StudyConfig config;
  config.monofilaments = vpt::load_monofilament_set(data + "/monofilament_touch_test.json");
  std::uint64_t seed = 1;
  for (auto _ : state) {
    vpt::Rng rng(seed++);
    const auto cohort = vpt::generate_cohort(spec, rng);
    const auto run = vpt::run_virtual_study(cohort, config, spec, rng);
    const auto marked = vpt::mark_exclusions(run.measurements, {}, run.logs);
    benchmark::DoNotOptimize(vpt::analyze_study(marked));
  }
}
BENCHMARK(BM_StudyPipeline)->Unit(benchmark::kMillisecond);

}  // namespace
