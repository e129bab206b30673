#include "kgrec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>
#include <string>

#include "kgrec/error.hpp"
#include "text_io.hpp"

namespace kgrec {

namespace {

constexpr std::uint64_t kCtrStream = 0x43545200;
constexpr std::uint64_t kRankStream = 0x52414e4b00000000ull;

std::string stratum_label(double p) { return detail::format_real(p); }

}  // namespace

std::vector<Example> ctr_examples(const InteractionSet& held_out, std::span<const InteractionSet* const> known,
                                  std::span<const int> contents, Rng& rng) {
  std::vector<Example> out;
  for (int u = 0; u < held_out.num_users(); ++u) {
    const auto pos = held_out.positives(u);
    if (pos.empty()) continue;
    std::vector<int> excluded(pos.begin(), pos.end());
    for (const auto* set : known) {
      if (set && u < set->num_users()) {
        auto p = set->positives(u);
        excluded.insert(excluded.end(), p.begin(), p.end());
      }
    }
    std::sort(excluded.begin(), excluded.end());
    excluded.erase(std::unique(excluded.begin(), excluded.end()), excluded.end());
    for (int c : pos) out.push_back({u, c, 1});
    for (int c : sample_excluding(excluded, pos.size(), contents, rng)) out.push_back({u, c, 0});
  }
  return out;
}

CtrMetrics evaluate_ctr(std::span<const Example> examples, const ModelContext& ctx, const ParameterSet& params,
                        std::uint64_t seed) {
  std::vector<ScoredLabel> scored;
  scored.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    Rng rng = derive_rng(seed, kCtrStream + i);
    scored.push_back({predict(examples[i].user, examples[i].content, ctx, params, rng), examples[i].label});
  }
  return {auc(scored), f1(scored)};
}

std::map<int, RankedRecommendations> rank_users(std::span<const int> users, const InteractionSet& train,
                                                std::span<const int> contents, const ModelContext& ctx,
                                                const ParameterSet& params, std::uint64_t seed) {
  std::map<int, RankedRecommendations> out;
  std::vector<int> candidates;
  for (int u : users) {
    candidates.clear();
    for (int c : contents) {
      if (u >= train.num_users() || !train.is_positive(u, c)) candidates.push_back(c);
    }
    Rng rng = derive_rng(seed, kRankStream + static_cast<std::uint64_t>(u));
    out.emplace(u, rank_all(u, candidates, ctx, params, rng));
  }
  return out;
}

void EvalSpec::validate() const {
  if (ks.empty()) throw ConfigError("at least one K is required for ranking metrics");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] < 1) throw ConfigError("K values must be positive");
    if (i > 0 && ks[i] <= ks[i - 1]) throw ConfigError("K list must be sorted ascending without duplicates");
  }
  if (diversity_k < 2) throw ConfigError("diversity K must be at least 2");
  strata.validate();
}

std::vector<std::pair<Vec, Vec>> positive_pair_vectors(const PairSets& pairs, const ContentVectors& vectors) {
  std::vector<std::pair<Vec, Vec>> out;
  for (const auto& [anchor, list] : pairs.positives) {
    for (auto p : list) out.emplace_back(vectors.at(static_cast<int>(anchor)), vectors.at(static_cast<int>(p)));
  }
  return out;
}

std::vector<MetricRow> evaluate_model(const EvalInputs& inputs, const ModelContext& ctx, const ParameterSet& params,
                                      const EvalSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (!inputs.train || !inputs.test) throw DataError("evaluation needs train and test interactions");
  const auto& train = *inputs.train;
  const auto& test = *inputs.test;
  const auto& contents = ctx.graph->content_ids();
  std::vector<MetricRow> rows;

  if (spec.ctr) {
    Rng rng = derive_rng(seed, kCtrStream - 1);
    const std::vector<const InteractionSet*> known{inputs.train, inputs.eval};
    const auto examples = ctr_examples(test, known, contents, rng);
    const auto ctr = evaluate_ctr(examples, ctx, params, seed);
    rows.push_back({"auc", 0, "all", ctr.auc, 0});
    rows.push_back({"f1", 0, "all", ctr.f1, 0});
  }

  std::vector<int> users;
  for (int u = 0; u < test.num_users(); ++u) {
    if (!test.positives(u).empty()) users.push_back(u);
  }
  if (users.empty()) throw DataError("test set has no users with positives");
  const auto recs = rank_users(users, train, contents, ctx, params, seed);

  for (const char* metric : {"recall", "ndcg"}) {
    for (int k : spec.ks) {
      double total = 0.0;
      for (int u : users) {
        const auto pos = test.positives(u);
        const std::set<int> relevant(pos.begin(), pos.end());
        total += metric[0] == 'r' ? recall_at_k(recs.at(u), relevant, static_cast<std::size_t>(k))
                                  : ndcg_at_k(recs.at(u), relevant, static_cast<std::size_t>(k));
      }
      rows.push_back({metric, k, "all", total / static_cast<double>(users.size()), users.size()});
    }
  }

  std::vector<RankedRecommendations> lists;
  for (const auto& [u, r] : recs) lists.push_back(r);
  const auto dk = static_cast<std::size_t>(spec.diversity_k);
  const auto features = content_features(contents, ctx, params);
  if (lists.size() >= 2) rows.push_back({"inter_diversity", spec.diversity_k, "all", inter_list_diversity(lists, dk), 0});
  rows.push_back({"intra_diversity", spec.diversity_k, "all", intra_list_diversity(lists, features, dk), 0});

  if (inputs.pairs && !inputs.pairs->positives.empty()) {
    rows.push_back({"alignment", 0, "all", alignment_loss(positive_pair_vectors(*inputs.pairs, features)), 0});
  }
  std::vector<Vec> all_vectors;
  for (const auto& [id, v] : features) all_vectors.push_back(v);
  rows.push_back({"uniformity", 0, "all", uniformity_loss(all_vectors), 0});

  const auto cold_k = std::find(spec.ks.begin(), spec.ks.end(), 20) != spec.ks.end() ? 20 : spec.ks.back();
  for (const auto& s : cold_start_report(test, train, recs, spec.strata, static_cast<std::size_t>(cold_k))) {
    rows.push_back({"cold_ndcg", cold_k, stratum_label(s.percentile), s.ndcg, s.users});
    rows.push_back({"cold_recall", cold_k, stratum_label(s.percentile), s.recall, s.users});
  }
  return rows;
}

}  // namespace kgrec

namespace kgrec {

void write_metrics(const std::vector<MetricRow>& rows, std::ostream& out) {
  out << "metric\tk\tstratum\tvalue\tusers\n";
  for (const auto& r : rows) {
    out << r.metric << '\t' << r.k << '\t' << r.stratum << '\t' << detail::format_real(r.value) << '\t' << r.users
        << '\n';
  }
}

void write_metrics(const std::vector<MetricRow>& rows, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  write_metrics(rows, out);
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace kgrec
