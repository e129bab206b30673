#include <benchmark/benchmark.h>

#include <numeric>

#include "kgrec/metrics.hpp"

namespace {

using namespace kgrec;

std::vector<RankedRecommendations> random_lists(int users, int items, Rng& rng) {
  std::vector<RankedRecommendations> out;
  for (int u = 0; u < users; ++u) {
    std::vector<int> ids(static_cast<std::size_t>(items));
    std::iota(ids.begin(), ids.end(), 0);
    shuffle(std::span<int>(ids), rng);
    RankedRecommendations r;
    r.user = u;
    double s = 1.0;
    for (int id : ids) r.items.push_back({id, s -= 1e-4});
    out.push_back(std::move(r));
  }
  return out;
}

void BM_Auc(benchmark::State& state) {
  Rng rng(1);
  std::vector<ScoredLabel> scores(static_cast<std::size_t>(state.range(0)));
  for (auto& s : scores) s = {uniform01(rng), static_cast<int>(uniform_index(rng, 2))};
  for (auto _ : state) benchmark::DoNotOptimize(auc(scores));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Auc)->Arg(1 << 10)->Arg(1 << 16);

void BM_InterListDiversity(benchmark::State& state) {
  Rng rng(2);
  const auto recs = random_lists(static_cast<int>(state.range(0)), 1000, rng);
  for (auto _ : state) benchmark::DoNotOptimize(inter_list_diversity(recs, 20));
}
BENCHMARK(BM_InterListDiversity)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_IntraListDiversity(benchmark::State& state) {
  Rng rng(3);
  const auto recs = random_lists(1000, 1000, rng);
  std::map<int, Vec> vecs;
  for (int c = 0; c < 1000; ++c) {
    Vec v(static_cast<std::size_t>(state.range(0)));
    for (double& x : v) x = uniform_real(rng, -1, 1);
    vecs[c] = v;
  }
  for (auto _ : state) benchmark::DoNotOptimize(intra_list_diversity(recs, vecs, 20));
}
BENCHMARK(BM_IntraListDiversity)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Uniformity(benchmark::State& state) {
  Rng rng(4);
  std::vector<Vec> vs(static_cast<std::size_t>(state.range(0)), Vec(16));
  for (auto& v : vs) {
    for (double& x : v) x = uniform_real(rng, -1, 1);
  }
  for (auto _ : state) benchmark::DoNotOptimize(uniformity_loss(vs));
}
BENCHMARK(BM_Uniformity)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

}  // namespace
