#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kgrec/error.hpp"
#include "kgrec/kgcn.hpp"
#include "oracles.hpp"

using namespace kgrec;
namespace oracle = kgrec::oracle;

namespace {

HyperParams small_hp(int k, int layers, int d, Aggregator agg = Aggregator::concat) {
  HyperParams hp;
  hp.neighbor_size = k;
  hp.layers = layers;
  hp.dim = d;
  hp.aggregator = agg;
  return hp;
}

void randomize(ParameterSet& p, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  p.for_each([&](std::string_view, Matrix& m) {
    for (double& v : m.values()) v = uniform_real(rng, -scale, scale);
  });
}

// 0 -r0- 1 -r0- 3, 0 -r1- 2 -r1- 4: every node reached by the field has degree 2.
KnowledgeGraph five_node_graph() { return KnowledgeGraph({{0, 0, 1}, {0, 1, 2}, {1, 0, 3}, {2, 1, 4}}, 5, 2, {0}); }

Vec concat(const Vec& a, const Vec& b) {
  Vec out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

Vec mix(double wa, const Vec& a, double wb, const Vec& b) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = wa * a[i] + wb * b[i];
  return out;
}

std::vector<std::span<const double>> spans(const std::vector<Vec>& vs) {
  return {vs.begin(), vs.end()};
}

}  // namespace

TEST(HyperParams, Validation) {
  EXPECT_NO_THROW(HyperParams{}.validate());
  auto bad = [](auto mutate) {
    HyperParams hp;
    mutate(hp);
    return hp;
  };
  EXPECT_THROW(bad([](HyperParams& h) { h.neighbor_size = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](HyperParams& h) { h.layers = 3; }).validate(), ConfigError);
  EXPECT_THROW(bad([](HyperParams& h) { h.dim = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](HyperParams& h) { h.gamma = 1.5; }).validate(), ConfigError);
  EXPECT_THROW(bad([](HyperParams& h) { h.gamma = -0.1; }).validate(), ConfigError);
  EXPECT_THROW(bad([](HyperParams& h) { h.l2 = -1e-9; }).validate(), ConfigError);
  EXPECT_THROW(bad([](HyperParams& h) { h.lr = 0.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](HyperParams& h) { h.batch_size = 0; }).validate(), ConfigError);
}

TEST(Aggregator, ParseAndPrint) {
  EXPECT_EQ(parse_aggregator("sum"), Aggregator::sum);
  EXPECT_EQ(to_string(Aggregator::concat), "concat");
  EXPECT_THROW(parse_aggregator("mean"), ConfigError);
}

TEST(InitParameters, DeterministicUnderSeed) {
  auto hp = small_hp(2, 2, 4);
  Rng a(5), b(5);
  EXPECT_EQ(init_parameters(hp, 3, 10, 2, 6, a), init_parameters(hp, 3, 10, 2, 6, b));
}

TEST(InitParameters, ShapesAndOptionalProjection) {
  Rng rng(1);
  auto p = init_parameters(small_hp(2, 1, 4), 3, 10, 2, std::nullopt, rng);
  EXPECT_FALSE(p.has_projection());
  EXPECT_EQ(p.users.rows(), 3u);
  EXPECT_EQ(p.entities.rows(), 10u);
  EXPECT_EQ(p.relations.rows(), 2u);
  ASSERT_EQ(p.layer_weights.size(), 1u);
  EXPECT_EQ(p.layer_weights[0].rows(), 8u);
  EXPECT_EQ(p.layer_weights[0].cols(), 4u);
  EXPECT_EQ(p.layer_biases[0].cols(), 4u);

  auto s = init_parameters(small_hp(2, 2, 4, Aggregator::sum), 3, 10, 2, 7, rng);
  EXPECT_TRUE(s.has_projection());
  EXPECT_EQ(s.layer_weights[1].rows(), 4u);
  EXPECT_EQ(s.proj_weight.rows(), 7u);
  EXPECT_EQ(s.proj_weight.cols(), 4u);
}

TEST(InitParameters, GlorotBounds) {
  Rng rng(2);
  auto p = init_parameters(small_hp(2, 1, 16), 50, 80, 3, 32, rng);
  p.for_each([](std::string_view name, const Matrix& m) {
    const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (double v : m.values()) {
      ASSERT_LE(std::abs(v), a) << name;
    }
  });
}

TEST(ParameterSet, ForEachOrderAndCount) {
  Rng rng(1);
  auto p = init_parameters(small_hp(2, 2, 3), 2, 4, 1, 5, rng);
  std::vector<std::string> names;
  p.for_each([&](std::string_view n, const Matrix&) { names.emplace_back(n); });
  EXPECT_EQ(names, (std::vector<std::string>{"U", "V", "R", "W0", "b0", "W1", "b1", "W_alpha", "b_alpha"}));
  EXPECT_EQ(p.parameter_count(), 2u * 3 + 4 * 3 + 3 + 2 * (6 * 3 + 3) + 5 * 3 + 3);
  auto z = p.zeros_like();
  EXPECT_EQ(z.squared_norm(), 0.0);
}

TEST(ProjectContent, ZeroWeightsGiveZero) {
  Rng rng(1);
  auto p = init_parameters(small_hp(1, 1, 3), 1, 2, 1, 4, rng);
  p.proj_weight.fill(0.0);
  p.proj_bias.fill(0.0);
  EXPECT_EQ(project_content(Vec{1.0, -2.0, 3.0, 0.5}, p), (Vec{0.0, 0.0, 0.0}));
}

TEST(ProjectContent, IdentityBlockPassesNonNegativeInput) {
  Rng rng(1);
  auto p = init_parameters(small_hp(1, 1, 3), 1, 2, 1, 3, rng);
  p.proj_weight.fill(0.0);
  p.proj_bias.fill(0.0);
  for (std::size_t i = 0; i < 3; ++i) p.proj_weight(i, i) = 1.0;
  EXPECT_EQ(project_content(Vec{0.25, 0.0, 7.0}, p), (Vec{0.25, 0.0, 7.0}));
}

TEST(ProjectContent, MatchesTripleLoopOracle) {
  Rng rng(3);
  auto p = init_parameters(small_hp(1, 1, 5), 1, 2, 1, 9, rng);
  randomize(p, 11);
  for (int trial = 0; trial < 50; ++trial) {
    Vec x(9);
    for (double& v : x) v = uniform_real(rng, -2, 2);
    const auto got = project_content(x, p);
    const auto want = oracle::relu(oracle::matvec(x, p.proj_weight, p.proj_bias));
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(ProjectContent, DimensionMismatchIsError) {
  Rng rng(1);
  auto p = init_parameters(small_hp(1, 1, 3), 1, 2, 1, 4, rng);
  EXPECT_THROW(project_content(Vec{1.0, 2.0}, p), DataError);
}

TEST(RelationWeights, EqualDotsGiveUniform) {
  Vec u{1.0, 2.0};
  std::vector<Vec> r(4, Vec{0.5, -0.5});
  for (double w : relation_weights(u, spans(r))) EXPECT_DOUBLE_EQ(w, 0.25);
}

TEST(RelationWeights, LnThreeVersusZero) {
  Vec u{1.0};
  std::vector<Vec> r{{std::log(3.0)}, {0.0}};
  auto w = relation_weights(u, spans(r));
  EXPECT_NEAR(w[0], 0.75, 1e-15);
  EXPECT_NEAR(w[1], 0.25, 1e-15);
}

TEST(RelationWeights, ShiftInvariant) {
  // With u = (1, 0), adding c to the first coordinate of every r adds c to every dot.
  Vec u{1.0, 0.0};
  std::vector<Vec> r{{0.3, 1.0}, {-1.2, 2.0}, {2.0, 0.0}};
  auto base = relation_weights(u, spans(r));
  for (auto& v : r) v[0] += 40.0;
  auto shifted = relation_weights(u, spans(r));
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(base[k], shifted[k], 1e-12);
}

TEST(RelationWeights, SumsToOneOnRandomDraws) {
  Rng rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d = 1 + uniform_index(rng, 8);
    const auto k = 1 + uniform_index(rng, 6);
    Vec u(d);
    for (double& v : u) v = uniform_real(rng, -5, 5);
    std::vector<Vec> r(k, Vec(d));
    for (auto& row : r) {
      for (double& v : row) v = uniform_real(rng, -5, 5);
    }
    auto w = relation_weights(u, spans(r));
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-9);
    const auto want = oracle::softmax_dots(u, r);
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_GE(w[i], 0.0);
      EXPECT_NEAR(w[i], want[i], 1e-12);
    }
  }
}

TEST(Aggregate, IdenticalNeighborsGiveThatVector) {
  // Layer 0 of two (relu); W picks out the neighborhood half of [self || neighborhood].
  auto hp = small_hp(3, 2, 3);
  Rng rng(1);
  auto p = init_parameters(hp, 1, 2, 1, std::nullopt, rng);
  p.layer_weights[0].fill(0.0);
  p.layer_biases[0].fill(0.0);
  for (std::size_t i = 0; i < 3; ++i) p.layer_weights[0](3 + i, i) = 1.0;
  Vec self{9.0, 9.0, 9.0};
  Vec v{0.5, 1.5, 0.25};
  std::vector<Vec> nbs(3, v);
  Vec w(3, 1.0 / 3.0);
  auto out = aggregate(self, spans(nbs), w, 0, p, hp);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(out[i], v[i], 1e-15);
}

TEST(Aggregate, SumModeZeroInputFinalLayer) {
  auto hp = small_hp(2, 1, 3, Aggregator::sum);
  Rng rng(1);
  auto p = init_parameters(hp, 1, 2, 1, std::nullopt, rng);
  p.layer_weights[0].fill(0.0);
  p.layer_biases[0].fill(0.0);
  for (std::size_t i = 0; i < 3; ++i) p.layer_weights[0](i, i) = 1.0;
  std::vector<Vec> nbs(2, Vec(3, 0.0));
  EXPECT_EQ(aggregate(Vec(3, 0.0), spans(nbs), Vec{0.5, 0.5}, 0, p, hp), Vec(3, 0.0));
}

TEST(Aggregate, MatchesOracleForBothAggregatorsAndActivations) {
  Rng rng(21);
  for (auto agg : {Aggregator::concat, Aggregator::sum}) {
    for (int layers : {1, 2}) {
      auto hp = small_hp(4, layers, 5, agg);
      auto p = init_parameters(hp, 1, 2, 1, std::nullopt, rng);
      randomize(p, 31 + static_cast<std::uint64_t>(layers));
      for (int layer = 0; layer < layers; ++layer) {
        for (int trial = 0; trial < 20; ++trial) {
          Vec self(5);
          for (double& v : self) v = uniform_real(rng, -1, 1);
          std::vector<Vec> nbs(4, Vec(5));
          for (auto& n : nbs) {
            for (double& v : n) v = uniform_real(rng, -1, 1);
          }
          Vec w(4);
          double total = 0;
          for (double& v : w) total += (v = uniform01(rng) + 0.01);
          for (double& v : w) v /= total;
          const auto got = aggregate(self, spans(nbs), w, layer, p, hp);
          const auto L = static_cast<std::size_t>(layer);
          const auto want = oracle::aggregate_step(self, nbs, w, p.layer_weights[L], p.layer_biases[L], agg,
                                                   layer == layers - 1);
          for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
        }
      }
    }
  }
}

TEST(InitialFeature, ProjectionOnlyForCoveredContents) {
  KnowledgeGraph g({{0, 0, 2}, {1, 0, 2}}, 3, 1, {0, 1});
  ExternalEmbeddingTable ext(2);
  ext.insert(0, {1.0, 0.5});
  ext.insert(2, {3.0, 3.0});  // attribute entity: ignored
  auto hp = small_hp(1, 1, 3);
  Rng rng(4);
  auto p = init_parameters(hp, 1, 3, 1, 2, rng);
  ModelContext ctx{&g, hp, &ext};
  EXPECT_EQ(initial_feature(0, ctx, p), project_content(ext.find(0), p));
  EXPECT_EQ(initial_feature(1, ctx, p), oracle::row(p.entities, 1));
  EXPECT_EQ(initial_feature(2, ctx, p), oracle::row(p.entities, 2));
}

TEST(ContentRepresentation, SingleNeighborForcedPath) {
  KnowledgeGraph g({{0, 0, 1}}, 2, 1, {0});
  auto hp = small_hp(1, 1, 4);
  Rng rng(7);
  auto p = init_parameters(hp, 2, 2, 1, std::nullopt, rng);
  ModelContext ctx{&g, hp, nullptr};
  const auto self = oracle::row(p.entities, 0);
  std::vector<Vec> nbs{oracle::row(p.entities, 1)};
  const auto want = aggregate(self, spans(nbs), Vec{1.0}, 0, p, hp);
  EXPECT_EQ(content_representation(1, 0, ctx, p, rng), want);
}

TEST(ContentRepresentation, DeterministicUnderRngState) {
  std::vector<Triple> t;
  for (int a = 1; a <= 9; ++a) t.push_back({0, a % 3, a});
  KnowledgeGraph g(t, 10, 3, {0});
  auto hp = small_hp(3, 2, 4);
  Rng init(1);
  auto p = init_parameters(hp, 2, 10, 3, std::nullopt, init);
  ModelContext ctx{&g, hp, nullptr};
  Rng a(99), b(99);
  EXPECT_EQ(content_representation(0, 0, ctx, p, a), content_representation(0, 0, ctx, p, b));
}

TEST(ContentRepresentation, TwoLayerHandUnrolled) {
  const auto g = five_node_graph();
  for (auto agg : {Aggregator::concat, Aggregator::sum}) {
    auto hp = small_hp(2, 2, 3, agg);
    Rng init(8);
    auto p = init_parameters(hp, 1, 5, 2, std::nullopt, init);
    randomize(p, 41);
    ModelContext ctx{&g, hp, nullptr};

    const auto u = oracle::row(p.users, 0);
    const auto v = [&](int e) { return oracle::row(p.entities, e); };
    const auto w01 = oracle::softmax_dots(u, {oracle::row(p.relations, 0), oracle::row(p.relations, 1)});
    const auto& W0 = p.layer_weights[0];
    const auto& b0 = p.layer_biases[0];
    const auto& W1 = p.layer_weights[1];
    const auto& b1 = p.layer_biases[1];
    auto combine = [&](const Vec& self, const Vec& nb) {
      if (agg == Aggregator::concat) return concat(self, nb);
      return mix(1.0, self, 1.0, nb);
    };
    // Node 1 and node 2 each see two neighbors over a single relation: uniform weights.
    const auto h0 = oracle::relu(oracle::matvec(combine(v(0), mix(w01[0], v(1), w01[1], v(2))), W0, b0));
    const auto h1 = oracle::relu(oracle::matvec(combine(v(1), mix(0.5, v(0), 0.5, v(3))), W0, b0));
    const auto h2 = oracle::relu(oracle::matvec(combine(v(2), mix(0.5, v(0), 0.5, v(4))), W0, b0));
    const auto want = oracle::tanh_vec(oracle::matvec(combine(h0, mix(w01[0], h1, w01[1], h2)), W1, b1));

    // Sampling without replacement at K = degree only permutes children, so any seed agrees.
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
      Rng rng(seed);
      const auto got = content_representation(0, 0, ctx, p, rng);
      for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(got[i], want[i], 1e-10) << to_string(agg) << " seed " << seed;
    }
  }
}

TEST(ContentRepresentation, ShapesForAllConfigurations) {
  const auto g = five_node_graph();
  ExternalEmbeddingTable ext(6);
  ext.insert(0, {1, 2, 3, 4, 5, 6});
  for (auto agg : {Aggregator::concat, Aggregator::sum}) {
    for (int layers : {1, 2}) {
      for (const ExternalEmbeddingTable* table : {static_cast<const ExternalEmbeddingTable*>(nullptr), static_cast<const ExternalEmbeddingTable*>(&ext)}) {
        auto hp = small_hp(3, layers, 5, agg);
        Rng rng(2);
        auto p = init_parameters(hp, 2, 5, 2, table ? std::optional<std::size_t>(6) : std::nullopt, rng);
        ModelContext ctx{&g, hp, table};
        auto field = sample_receptive_field(g, 0, 3, layers, rng);
        ASSERT_EQ(field.entities.size(), static_cast<std::size_t>(layers + 1));
        for (int h = 0; h <= layers; ++h) {
          EXPECT_EQ(field.entities[static_cast<std::size_t>(h)].size(), static_cast<std::size_t>(std::pow(3, h)));
        }
        auto trace = trace_forward(1, 0, field, ctx, p);
        EXPECT_EQ(trace.representation.size(), 5u);
        EXPECT_TRUE(std::isfinite(trace.logit));
      }
    }
  }
}

TEST(Predict, ZeroUserVectorGivesHalf) {
  const auto g = five_node_graph();
  auto hp = small_hp(2, 1, 4);
  Rng rng(3);
  auto p = init_parameters(hp, 1, 5, 2, std::nullopt, rng);
  for (double& v : p.users.row(0)) v = 0.0;
  ModelContext ctx{&g, hp, nullptr};
  EXPECT_EQ(predict(0, 0, ctx, p, rng), 0.5);
}

TEST(Predict, MonotoneInLogit) {
  // One relation only: the representation does not depend on the user vector.
  KnowledgeGraph g({{0, 0, 1}, {0, 0, 2}}, 3, 1, {0});
  auto hp = small_hp(2, 1, 4);
  Rng init(5);
  auto p = init_parameters(hp, 1, 3, 1, std::nullopt, init);
  ModelContext ctx{&g, hp, nullptr};
  Rng probe(1);
  const auto rep = content_representation(0, 0, ctx, p, probe);
  const double norm2 = dot(rep, rep);
  double previous = 0.0;
  for (double target : {-2.0, 0.0, 2.0}) {
    auto row = p.users.row(0);
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = target * rep[i] / norm2;
    Rng rng(1);
    const double y = predict(0, 0, ctx, p, rng);
    EXPECT_NEAR(y, oracle::sig(target), 1e-12);
    EXPECT_GT(y, previous);
    previous = y;
  }
}

TEST(Predict, MatchesCompositionOracle) {
  std::vector<Triple> t;
  for (int c = 0; c < 4; ++c) {
    for (int a = 4; a < 8; ++a) {
      if ((c + a) % 2 == 0) t.push_back({c, a % 3, a});
    }
  }
  KnowledgeGraph g(t, 8, 3, {0, 1, 2, 3});
  auto hp = small_hp(3, 2, 4);
  Rng init(9);
  auto p = init_parameters(hp, 3, 8, 3, std::nullopt, init);
  ModelContext ctx{&g, hp, nullptr};
  for (int u = 0; u < 3; ++u) {
    for (int c = 0; c < 4; ++c) {
      Rng a(100 + static_cast<std::uint64_t>(u * 4 + c)), b = a;
      const auto rep = content_representation(u, c, ctx, p, a);
      const double want = oracle::sig(dot(p.users.row(static_cast<std::size_t>(u)), rep));
      const double got = predict(u, c, ctx, p, b);
      EXPECT_NEAR(got, want, 1e-12);
      EXPECT_GT(got, 0.0);
      EXPECT_LT(got, 1.0);
    }
  }
}

TEST(Predict, StrictlyInsideUnitIntervalForLargeParameters) {
  const auto g = five_node_graph();
  auto hp = small_hp(2, 1, 4);
  Rng rng(6);
  auto p = init_parameters(hp, 1, 5, 2, std::nullopt, rng);
  randomize(p, 7, 3.0);
  ModelContext ctx{&g, hp, nullptr};
  const double y = predict(0, 0, ctx, p, rng);
  EXPECT_GT(y, 0.0);
  EXPECT_LT(y, 1.0);
}

TEST(RankAll, SingleCandidate) {
  const auto g = five_node_graph();
  auto hp = small_hp(2, 1, 4);
  Rng rng(1);
  auto p = init_parameters(hp, 1, 5, 2, std::nullopt, rng);
  ModelContext ctx{&g, hp, nullptr};
  std::vector<int> candidates{0};
  auto recs = rank_all(0, candidates, ctx, p, rng);
  ASSERT_EQ(recs.items.size(), 1u);
  EXPECT_EQ(recs.items[0].content, 0);
  EXPECT_THROW(rank_all(0, std::span<const int>(), ctx, p, rng), DataError);
}

TEST(RankAll, EqualScoresLowerIdFirst) {
  // Contents 3 and 1 are structurally identical with identical rows.
  KnowledgeGraph g({{1, 0, 0}, {3, 0, 0}, {2, 0, 0}}, 4, 1, {1, 2, 3});
  auto hp = small_hp(1, 1, 4);
  Rng rng(2);
  auto p = init_parameters(hp, 1, 4, 1, std::nullopt, rng);
  for (std::size_t i = 0; i < 4; ++i) p.entities(3, i) = p.entities(1, i);
  ModelContext ctx{&g, hp, nullptr};
  std::vector<int> candidates{3, 1};
  auto recs = rank_all(0, candidates, ctx, p, rng);
  EXPECT_EQ(recs.items[0].score, recs.items[1].score);
  EXPECT_EQ(recs.top_ids(2), (std::vector<int>{1, 3}));
}

TEST(RankAll, MatchesSortOracle) {
  std::vector<Triple> t;
  std::vector<int> contents;
  for (int c = 0; c < 10; ++c) {
    t.push_back({c, c % 2, 10 + c % 3});
    t.push_back({c, 2, 13 + c % 4});
    contents.push_back(c);
  }
  KnowledgeGraph g(t, 17, 3, contents);
  auto hp = small_hp(2, 1, 6);
  Rng init(4);
  auto p = init_parameters(hp, 2, 17, 3, std::nullopt, init);
  ModelContext ctx{&g, hp, nullptr};
  std::vector<int> candidates{7, 2, 9, 0, 4, 1, 8, 3, 6, 5};

  Rng replay(55);
  std::vector<std::pair<double, int>> want;
  for (int c : candidates) want.push_back({-predict(1, c, ctx, p, replay), c});
  std::sort(want.begin(), want.end());

  Rng rng(55);
  auto recs = rank_all(1, candidates, ctx, p, rng);
  ASSERT_EQ(recs.items.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(recs.items[i].content, want[i].second);
    EXPECT_EQ(recs.items[i].score, -want[i].first);
  }
}
