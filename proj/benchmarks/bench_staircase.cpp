#include <benchmark/benchmark.h>

#include "vpt/observer.hpp"
#include "vpt/random.hpp"
#include "vpt/session.hpp"

namespace {

void BM_RunTrialSimulated(benchmark::State& state) {
  const vpt::PsychometricObserver obs{0.3, 0.02, 0.0, 0.0, 0.0};
  std::uint64_t i = 0;
  for (auto _ : state) {
    vpt::SimulatedResponder responder(obs, vpt::Rng(vpt::derive_seed(3, i, 1)));
    vpt::Rng rng(vpt::derive_seed(3, i, 0));
    benchmark::DoNotOptimize(vpt::run_trial(vpt::TrialSetup{}, responder, rng));
    ++i;
  }
}
BENCHMARK(BM_RunTrialSimulated);

void BM_RunTrialSaturating(benchmark::State& state) {
  for (auto _ : state) {
    vpt::SilentResponder responder;
    vpt::Rng rng(1);
    benchmark::DoNotOptimize(vpt::run_trial(vpt::TrialSetup{}, responder, rng));
  }
}
BENCHMARK(BM_RunTrialSaturating);

}  // namespace
