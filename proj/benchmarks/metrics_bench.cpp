#include <benchmark/benchmark.h>

#include <random>

#include "salm/metrics.hpp"

namespace {

using namespace salm;

std::vector<TokenList> random_corpus(std::size_t n, std::size_t len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TokenList> out(n);
  for (auto& t : out)
    for (std::size_t i = 0; i < len; ++i) t.push_back("w" + std::to_string(rng() % 200));
  return out;
}

void BM_Bleu3(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto c = random_corpus(n, 12, 1);
  const auto r = random_corpus(n, 12, 2);
  for (auto _ : state) benchmark::DoNotOptimize(bleu(c, r, 3));
}
BENCHMARK(BM_Bleu3)->Arg(100)->Arg(1000);

void BM_RougeL(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto c = random_corpus(n, 12, 3);
  const auto r = random_corpus(n, 12, 4);
  for (auto _ : state) benchmark::DoNotOptimize(rouge_l(c, r));
}
BENCHMARK(BM_RougeL)->Arg(100)->Arg(1000);

void BM_Distinct2(benchmark::State& state) {
  const auto c = random_corpus(static_cast<std::size_t>(state.range(0)), 12, 5);
  for (auto _ : state) benchmark::DoNotOptimize(distinct_n(c, 2));
}
BENCHMARK(BM_Distinct2)->Arg(1000);

}  // namespace
