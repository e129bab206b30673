#include <benchmark/benchmark.h>

#include <numeric>

#include "kgrec/kgcn.hpp"
#include "kgrec/train.hpp"

namespace {

using namespace kgrec;

// Contents 0..C-1 each link to a few of A attribute entities.
struct World {
  KnowledgeGraph graph;
  InteractionSet train;
  PairSets pairs;
  ExternalEmbeddingTable external;

  World(int users, int contents, int attributes, std::size_t ext_dim) {
    Rng rng(3);
    std::vector<Triple> triples;
    for (int c = 0; c < contents; ++c) {
      for (int r = 0; r < 3; ++r) {
        triples.push_back({c, r, contents + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(attributes)))});
      }
    }
    std::vector<int> ids(static_cast<std::size_t>(contents));
    std::iota(ids.begin(), ids.end(), 0);
    graph = KnowledgeGraph(triples, contents + attributes, 3, ids);

    std::vector<Interaction> records;
    for (int u = 0; u < users; ++u) {
      for (int c : sample_excluding({}, 10, ids, rng)) records.push_back({u, c, 1});
    }
    train = InteractionSet(records, users, contents);

    pairs.n = 2;
    for (int c = 0; c < contents; ++c) {
      pairs.positives[c] = {(c + 1) % contents, (c + 2) % contents};
      pairs.negatives[c] = {(c + contents / 2) % contents, (c + contents / 2 + 1) % contents};
    }
    if (ext_dim > 0) {
      external = ExternalEmbeddingTable(ext_dim);
      for (int c = 0; c < contents; ++c) {
        Vec v(ext_dim);
        for (double& x : v) x = uniform_real(rng, -1, 1);
        external.insert(c, v);
      }
    }
  }
};

ModelContext context(const World& w, int layers, int dim, bool ext) {
  ModelContext ctx;
  ctx.graph = &w.graph;
  ctx.hp.layers = layers;
  ctx.hp.dim = dim;
  ctx.hp.neighbor_size = 4;
  ctx.external = ext ? &w.external : nullptr;
  return ctx;
}

void BM_Predict(benchmark::State& state) {
  const World w(50, 500, 100, 32);
  const auto ctx = context(w, static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), true);
  Rng rng(1);
  const auto params = init_parameters(ctx.hp, 50, w.graph.num_entities(), 3, 32, rng);
  int c = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(predict(7, c, ctx, params, rng));
    c = (c + 1) % 500;
  }
}
BENCHMARK(BM_Predict)->Args({1, 16})->Args({2, 16})->Args({1, 64})->Args({2, 64});

void BM_GradientStep(benchmark::State& state) {
  const World w(200, 500, 100, 32);
  auto ctx = context(w, static_cast<int>(state.range(0)), 16, true);
  ctx.hp.gamma = 0.8;
  Rng rng(1);
  auto params = init_parameters(ctx.hp, 200, w.graph.num_entities(), 3, 32, rng);
  auto adam = AdamState::for_params(params);
  TrainingBatch batch;
  for (int i = 0; i < 256; ++i) {
    batch.examples.push_back({i % 200, static_cast<int>(uniform_index(rng, 500)), i % 2});
  }
  for (int a = 0; a < 32; ++a) batch.anchors.push_back(a);
  const auto weights = ObjectiveWeights::from_hp(ctx.hp);
  for (auto _ : state) {
    auto step = loss_and_gradients(batch, &w.pairs, ctx, params, rng, weights);
    adam_step(params, step.gradients, adam, 0.01);
    benchmark::DoNotOptimize(step.loss.total);
  }
  state.SetItemsProcessed(state.iterations() * 256);
}
BENCHMARK(BM_GradientStep)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_FitEpoch(benchmark::State& state) {
  const World w(200, 500, 100, 0);
  auto ctx = context(w, 1, 16, false);
  ctx.hp.epochs = 1;
  ctx.hp.gamma = 0.8;
  for (auto _ : state) benchmark::DoNotOptimize(fit(w.train, &w.pairs, ctx).log.back().loss.total);
}
BENCHMARK(BM_FitEpoch)->Unit(benchmark::kMillisecond);

}  // namespace
