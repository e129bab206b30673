// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "kgrec/checkpoint.hpp"
#include "kgrec/evaluation.hpp"
#include "kgrec/metrics.hpp"
#include "kgrec/train.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace kgrec;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// Shared training setup of the synthetic trend checks.
HyperParams trend_hp(double gamma, std::uint64_t seed) {
  HyperParams hp;
  hp.dim = 16;
  hp.neighbor_size = 4;
  hp.layers = 1;
  hp.epochs = 30;
  hp.lr = 0.01;
  hp.batch_size = 256;
  hp.l2 = 1e-5;
  hp.gamma = gamma;
  hp.seed = seed;
  return hp;
}

constexpr int kSeeds = 5;

struct RunMetrics {
  double auc = 0, recall10 = 0, alignment = 0, intra10 = 0, ndcg20 = 0, bottom_ndcg20 = 0;
};

RunMetrics train_and_measure(double gamma, std::uint64_t seed, double cold_fraction) {
  synthetic::Spec spec;
  spec.seed = seed;
  spec.cold_fraction = cold_fraction;
  const auto data = synthetic::make(spec);
  const auto pairs = synthetic::genre_pairs(data, 5);
  ModelContext ctx;
  ctx.graph = &data.graph;
  ctx.hp = trend_hp(gamma, seed);
  const auto fitted = fit(data.split.train, &pairs, ctx);

  EvalSpec es;
  es.ks = {10, 20};
  es.diversity_k = 10;
  es.strata.cuts = {10, 100};
  const EvalInputs in{&data.split.train, &data.split.eval, &data.split.test, &pairs};
  RunMetrics m;
  for (const auto& r : evaluate_model(in, ctx, fitted.params, es, seed)) {
    if (r.metric == "auc") m.auc = r.value;
    if (r.metric == "recall" && r.k == 10) m.recall10 = r.value;
    if (r.metric == "alignment") m.alignment = r.value;
    if (r.metric == "intra_diversity") m.intra10 = r.value;
    if (r.metric == "cold_ndcg" && r.stratum == "100") m.ndcg20 = r.value;
    if (r.metric == "cold_ndcg" && r.stratum == "10") m.bottom_ndcg20 = r.value;
  }
  return m;
}

std::vector<RunMetrics> seeds_at(double gamma, double cold_fraction) {
  std::vector<RunMetrics> out;
  for (int s = 1; s <= kSeeds; ++s) out.push_back(train_and_measure(gamma, static_cast<std::uint64_t>(s), cold_fraction));
  return out;
}

double mean_of(const std::vector<RunMetrics>& runs, const std::function<double(const RunMetrics&)>& f) {
  double s = 0;
  for (const auto& r : runs) s += f(r);
  return s / static_cast<double>(runs.size());
}

// ---------------------------------------------------------------------------

Outcome gradient_check() {
  const auto t0 = Clock::now();
  const auto micro = synthetic::micro(11);
  ModelContext ctx;
  ctx.graph = &micro.graph;
  ctx.external = &micro.external;
  ctx.hp.dim = 4;
  ctx.hp.neighbor_size = 2;
  ctx.hp.layers = 1;
  ctx.hp.aggregator = Aggregator::concat;
  ctx.hp.gamma = 0.8;
  ctx.hp.l2 = 1e-4;
  Rng init = derive_rng(11, 0);
  auto params = init_parameters(ctx.hp, micro.train.num_users(), micro.graph.num_entities(),
                                micro.graph.num_relations(), micro.external.dim(), init);

  TrainingBatch batch;
  for (int u = 0; u < micro.train.num_users(); ++u) {
    for (int c = 0; c < micro.train.num_contents(); ++c) {
      batch.examples.push_back({u, c, micro.train.is_positive(u, c) ? 1 : 0});
    }
  }
  batch.anchors = {0, 1, 2, 3};

  const Rng field_rng = derive_rng(11, 1);
  Rng grad_rng = field_rng;
  const auto grads = compute_gradients(batch, &micro.pairs, ctx, params, grad_rng);
  const auto loss = [&] {
    Rng r = field_rng;
    return total_loss(batch, &micro.pairs, ctx, params, r).total;
  };

  struct Coord {
    std::size_t tensor, index;
  };
  std::vector<Matrix*> tensors;
  std::vector<const Matrix*> grad_tensors;
  std::vector<std::string> names;
  params.for_each([&](std::string_view name, Matrix& m) {
    tensors.push_back(&m);
    names.emplace_back(name);
  });
  grads.for_each([&](std::string_view, const Matrix& m) { grad_tensors.push_back(&m); });

  // One coordinate from every tensor first, the rest drawn at random.
  Rng pick = derive_rng(11, 2);
  std::vector<Coord> coords;
  for (std::size_t t = 0; t < tensors.size(); ++t) coords.push_back({t, uniform_index(pick, tensors[t]->size())});
  std::size_t total = 0;
  for (auto* m : tensors) total += m->size();
  while (coords.size() < 100) {
    auto flat = uniform_index(pick, total);
    std::size_t t = 0;
    while (flat >= tensors[t]->size()) flat -= tensors[t++]->size();
    coords.push_back({t, flat});
  }

  double worst = 0;
  std::string worst_at;
  for (const auto& c : coords) {
    double& x = tensors[c.tensor]->values()[c.index];
    const double fd = oracle::central_difference(loss, x, 1e-5);
    const double a = grad_tensors[c.tensor]->values()[c.index];
    const double err = std::abs(a - fd) / std::max(1.0, std::abs(a));
    if (err > worst || worst_at.empty()) {
      worst = std::max(worst, err);
      worst_at = names[c.tensor] + "[" + std::to_string(c.index) + "]";
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && secs < 10.0,
          fmt("max rel err %.3g at %s over %zu coords in %zu tensors, %.2f s", worst, worst_at.c_str(),
              coords.size(), tensors.size(), secs)};
}

RankedRecommendations ranked(int user, const std::vector<int>& ids) {
  RankedRecommendations r;
  r.user = user;
  double score = 1.0;
  for (int id : ids) r.items.push_back({id, score -= 0.01});
  return r;
}

Outcome metric_oracles() {
  const auto t0 = Clock::now();
  Rng rng(2718);
  double worst = 0;
  std::string worst_metric = "none";
  auto track = [&](const char* metric, double got, double want) {
    const double err = std::abs(got - want);
    if (!(err <= worst)) {
      worst = std::isnan(err) ? INFINITY : err;
      worst_metric = metric;
    }
  };
  for (int trial = 0; trial < 1000; ++trial) {
    const int users = 2 + static_cast<int>(uniform_index(rng, 9));
    const int items = 5 + static_cast<int>(uniform_index(rng, 16));
    const std::size_t k = 1 + uniform_index(rng, 5);
    const std::size_t div_k = std::max<std::size_t>(k, 2);

    std::map<int, Vec> vecs;
    for (int c = 0; c < items; ++c) {
      Vec v(4);
      for (double& x : v) x = uniform_real(rng, -1, 1);
      vecs[c] = v;
    }
    std::vector<RankedRecommendations> recs;
    std::vector<std::vector<int>> tops;
    for (int u = 0; u < users; ++u) {
      std::vector<int> list(static_cast<std::size_t>(items));
      std::iota(list.begin(), list.end(), 0);
      shuffle(std::span<int>(list), rng);
      recs.push_back(ranked(u, list));
      tops.emplace_back(list.begin(), list.begin() + static_cast<std::ptrdiff_t>(div_k));
      std::set<int> relevant;
      for (int c = 0; c < items; ++c) {
        if (uniform01(rng) < 0.25) relevant.insert(c);
      }
      if (relevant.empty()) relevant.insert(static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(items))));
      track("recall", recall_at_k(recs.back(), relevant, k), oracle::recall(list, relevant, k));
      track("ndcg", ndcg_at_k(recs.back(), relevant, k), oracle::ndcg(list, relevant, k));
    }
    track("inter", inter_list_diversity(recs, div_k), oracle::inter(tops, items));
    track("intra", intra_list_diversity(recs, vecs, div_k), oracle::intra(tops, vecs));

    std::vector<double> pos, neg, scores;
    std::vector<int> labels;
    std::vector<ScoredLabel> sl;
    const auto n = 2 + uniform_index(rng, 30);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = static_cast<double>(uniform_index(rng, 6)) / 5.0;  // ties are common
      const int y = i == 0 ? 1 : (i == 1 ? 0 : static_cast<int>(uniform_index(rng, 2)));
      (y ? pos : neg).push_back(s);
      scores.push_back(s);
      labels.push_back(y);
      sl.push_back({s, y});
    }
    track("auc", auc(sl), oracle::auc(pos, neg));
    track("f1", f1(sl), oracle::f1(scores, labels, 0.5));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 30.0,
          fmt("1000 instances, max abs diff %.3g (%s), %.2f s", worst, worst_metric.c_str(), secs)};
}

bool bitwise_equal(const ParameterSet& a, const ParameterSet& b) {
  std::vector<std::span<const double>> va, vb;
  a.for_each([&](std::string_view, const Matrix& m) { va.push_back(m.values()); });
  b.for_each([&](std::string_view, const Matrix& m) { vb.push_back(m.values()); });
  if (va.size() != vb.size()) return false;
  for (std::size_t i = 0; i < va.size(); ++i) {
    if (va[i].size() != vb[i].size() ||
        std::memcmp(va[i].data(), vb[i].data(), va[i].size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

Outcome reduction_identities() {
  synthetic::Spec spec;
  spec.users = 60;
  spec.seed = 4;
  const auto data = synthetic::make(spec);
  const auto pairs = synthetic::genre_pairs(data, 5);
  ModelContext ctx;
  ctx.graph = &data.graph;
  ctx.hp = trend_hp(1.0, 4);
  ctx.hp.epochs = 4;
  const auto with = fit(data.split.train, &pairs, ctx);
  const auto without = fit(data.split.train, nullptr, ctx);
  bool trajectory = bitwise_equal(with.params, without.params) && with.log.size() == without.log.size();
  for (std::size_t e = 0; trajectory && e < with.log.size(); ++e) {
    trajectory = same_bits(with.log[e].loss.total, without.log[e].loss.total) &&
                 same_bits(with.log[e].loss.base, without.log[e].loss.base);
  }

  const auto micro = synthetic::micro(5);
  ModelContext mctx;
  mctx.graph = &micro.graph;
  mctx.external = &micro.external;
  mctx.hp.dim = 4;
  mctx.hp.neighbor_size = 2;
  mctx.hp.gamma = 0.0;
  mctx.hp.l2 = 0.0;
  Rng init(5);
  const auto params = init_parameters(mctx.hp, 3, micro.graph.num_entities(), micro.graph.num_relations(),
                                      micro.external.dim(), init);
  TrainingBatch batch;
  batch.examples = {{0, 0, 1}, {1, 2, 0}, {2, 3, 1}};
  batch.anchors = {0, 1, 2, 3};
  Rng r(6);
  const double total = total_loss(batch, &micro.pairs, mctx, params, r).total;
  const auto features = content_features(batch.anchors, mctx, params);
  const double cl = contrastive_loss(micro.pairs, features, batch.anchors);
  const double diff = std::abs(total - cl);
  return {trajectory && diff <= 1e-12,
          fmt("gamma=1 trajectory %s over %zu epochs; gamma=0 |total - CL| = %.3g", trajectory ? "bit-identical" : "DIFFERS",
              with.log.size(), diff)};
}

struct TrendRuns {
  std::vector<RunMetrics> baseline, joint;
};

Outcome learning_check(TrendRuns& runs) {
  const auto t0 = Clock::now();
  runs.joint = seeds_at(0.8, 0.0);
  const double secs = seconds_since(t0);
  const double a = mean_of(runs.joint, [](const RunMetrics& m) { return m.auc; });
  const double r = mean_of(runs.joint, [](const RunMetrics& m) { return m.recall10; });
  return {a >= 0.90 && r >= 0.5 && secs < 120.0,
          fmt("gamma=0.8 mean AUC %.4f, Recall@10 %.4f over %d seeds, %.1f s", a, r, kSeeds, secs)};
}

Outcome contrastive_trend(TrendRuns& runs) {
  runs.baseline = seeds_at(1.0, 0.0);
  const double al_base = mean_of(runs.baseline, [](const RunMetrics& m) { return m.alignment; });
  const double al_joint = mean_of(runs.joint, [](const RunMetrics& m) { return m.alignment; });
  const double in_base = mean_of(runs.baseline, [](const RunMetrics& m) { return m.intra10; });
  const double in_joint = mean_of(runs.joint, [](const RunMetrics& m) { return m.intra10; });
  const bool align_ok = al_joint <= 0.8 * al_base;
  const bool intra_ok = in_joint > in_base;
  return {align_ok && intra_ok,
          fmt("alignment %.4f vs %.4f (ratio %.3f, %s); intra@10 %.4f vs %.4f (%s)", al_joint, al_base,
              al_joint / al_base, align_ok ? "ok" : "not 20%% lower", in_joint, in_base,
              intra_ok ? "ok" : "not higher")};
}

Outcome cold_start_trend() {
  const auto base = seeds_at(1.0, 0.1);
  const auto joint = seeds_at(0.8, 0.1);
  auto drop = [](const RunMetrics& m) { return (m.ndcg20 - m.bottom_ndcg20) / m.ndcg20; };
  const double d_base = mean_of(base, drop);
  const double d_joint = mean_of(joint, drop);
  return {d_joint <= d_base, fmt("bottom-decile NDCG@20 relative drop %.4f (gamma=0.8) vs %.4f (gamma=1)", d_joint, d_base)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / ("kgrec_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);
  auto run = [&](const std::string& name) {
    synthetic::Spec spec;
    spec.users = 80;
    spec.seed = 9;
    const auto data = synthetic::make(spec);
    const auto pairs = synthetic::genre_pairs(data, 5);
    ModelContext ctx;
    ctx.graph = &data.graph;
    ctx.hp = trend_hp(0.8, 9);
    ctx.hp.epochs = 3;
    const auto result = fit(data.split.train, &pairs, ctx, [&](const ParameterSet& p, EpochReport& rep) {
      Rng rng = derive_rng(9, 77);
      const std::vector<const InteractionSet*> known{&data.split.train};
      const auto ex = ctr_examples(data.split.eval, known, data.graph.content_ids(), rng);
      const auto m = evaluate_ctr(ex, ctx, p, 9);
      rep.auc = m.auc;
      rep.f1 = m.f1;
    });
    const auto dir = root / name;
    save_checkpoint(make_checkpoint(ctx.hp, result.params), dir / "model.ckpt");
    write_training_log(result.log, dir / "train_log.tsv");
    const EvalInputs in{&data.split.train, &data.split.eval, &data.split.test, &pairs};
    write_metrics(evaluate_model(in, ctx, result.params, EvalSpec{}, 9), dir / "metrics.tsv");
    return dir;
  };
  const auto a = run("a");
  const auto b = run("b");
  std::vector<std::string> differing;
  for (const char* f : {"model.ckpt", "train_log.tsv", "metrics.tsv"}) {
    if (slurp(a / f) != slurp(b / f) || slurp(a / f).empty()) differing.emplace_back(f);
  }
  const auto loaded = load_checkpoint(a / "model.ckpt");
  save_checkpoint(loaded, root / "resaved.ckpt");
  const bool round_trip = slurp(root / "resaved.ckpt") == slurp(a / "model.ckpt") &&
                          bitwise_equal(load_checkpoint(root / "resaved.ckpt").params, loaded.params);
  fs::remove_all(root);
  std::string which;
  for (const auto& d : differing) which += " " + d;
  return {differing.empty() && round_trip, fmt("artifacts %s%s; checkpoint round trip %s",
                                               differing.empty() ? "byte-identical" : "differ:", which.c_str(),
                                               round_trip ? "bit-exact" : "NOT bit-exact")};
}

Outcome statistics() {
  std::mt19937_64 gen(31337);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> a(12), b(12);
  for (double& x : a) x = noise(gen);
  for (double& x : b) x = noise(gen) + 10.0;

  const auto same = two_sample_ttest(a, a);
  const bool identity = same.t == 0.0 && same.p == 1.0;

  // Reference: Welch statistic written out, tail from Boost.Math.
  auto moments = [](const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair{m, ss / (n - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double n = 12.0;
  const double se2 = va / n + vb / n;
  const double t = (ma - mb) / std::sqrt(se2);
  const double df = se2 * se2 / ((va / n) * (va / n) / (n - 1) + (vb / n) * (vb / n) / (n - 1));
  const double p_ref = 2.0 * boost::math::cdf(boost::math::complement(boost::math::students_t(df), std::abs(t)));

  const auto shifted = two_sample_ttest(a, b);
  const double rel = std::abs(shifted.p - p_ref) / p_ref;
  const bool ok = identity && shifted.p < 1e-3 && rel < 1e-8 && std::abs(shifted.t - t) < 1e-10 * std::abs(t);
  return {ok, fmt("identical: t=%g p=%g; 10-sigma shift: t=%.4f p=%.4g (reference %.4g, rel diff %.2g)", same.t, same.p,
                  shifted.t, shifted.p, p_ref, rel)};
}

}  // namespace

int main() {
  TrendRuns runs;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_check},
      {"metric oracle equivalence", metric_oracles},
      {"loss reduction identities", reduction_identities},
      {"synthetic learning check", [&] { return learning_check(runs); }},
      {"contrastive effect trend", [&] { return contrastive_trend(runs); }},
      {"cold-start trend", cold_start_trend},
      {"determinism and round trip", determinism},
      {"statistical machinery", statistics},
  };
  int failures = 0;
  int index = 0;
  for (const auto& [name, check] : criteria) {
    ++index;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s  %d %-28s %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
