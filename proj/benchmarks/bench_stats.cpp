#include <benchmark/benchmark.h>

#include <vector>

#include "vpt/random.hpp"
#include "vpt/stats.hpp"

namespace {

namespace st = vpt::stats;

std::vector<double> sample(std::size_t n, std::uint64_t seed, double shift) {
  vpt::Rng rng(seed);
  std::vector<double> out(n);
  for (auto& v : out) v = vpt::normal(rng, shift, 1.0);
  return out;
}

void BM_SignedRank(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = sample(n, 1, 0.0);
  const auto y = sample(n, 2, 0.3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(st::wilcoxon_signed_rank_one_sided(x, y, st::Alternative::less));
  }
}
// 25 is the largest exact case; 40 takes the normal approximation.
BENCHMARK(BM_SignedRank)->Arg(8)->Arg(25)->Arg(40);

void BM_RankSum(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = sample(n, 3, 0.0);
  const auto y = sample(n, 4, 0.3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(st::wilcoxon_rank_sum_one_sided(x, y, st::Alternative::less));
  }
}
// Per-group size; 7 + 7 is the largest combined size on the exact path.
BENCHMARK(BM_RankSum)->Arg(5)->Arg(7)->Arg(14);

void BM_Spearman(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto x = sample(n, 5, 0.0);
  const auto y = sample(n, 6, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(st::spearman(x, y));
}
BENCHMARK(BM_Spearman)->Arg(28)->Arg(1000);

}  // namespace
