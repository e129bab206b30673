#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgrec/interactions.hpp"
#include "kgrec/kgcn.hpp"
#include "kgrec/metrics.hpp"
#include "kgrec/pair_sampler.hpp"
#include "kgrec/train.hpp"

namespace kgrec {

// Held-out positives plus, per user, as many fresh negatives drawn from the
// contents the user has no positive for in any of `known` sets.
std::vector<Example> ctr_examples(const InteractionSet& held_out, std::span<const InteractionSet* const> known,
                                  std::span<const int> contents, Rng& rng);

struct CtrMetrics {
  double auc = 0.0;
  double f1 = 0.0;
};

// Each example draws its receptive field from an rng derived from
// (seed, example index), so results do not depend on evaluation order.
CtrMetrics evaluate_ctr(std::span<const Example> examples, const ModelContext& ctx, const ParameterSet& params,
                        std::uint64_t seed);

// Ranks every content except the user's training positives. The rng of
// each user is derived from (seed, user).
std::map<int, RankedRecommendations> rank_users(std::span<const int> users, const InteractionSet& train,
                                                std::span<const int> contents, const ModelContext& ctx,
                                                const ParameterSet& params, std::uint64_t seed);

struct EvalSpec {
  std::vector<int> ks{5, 10, 20, 50, 100};
  int diversity_k = 20;
  StrataSpec strata;
  bool ctr = true;

  void validate() const;
};

struct MetricRow {
  std::string metric;
  int k = 0;                    // 0 when the metric has no cutoff
  std::string stratum = "all";  // "all" or the percentile cut
  double value = 0.0;
  std::size_t users = 0;  // cold-start rows only

  bool operator==(const MetricRow&) const = default;
};

struct EvalInputs {
  const InteractionSet* train = nullptr;
  const InteractionSet* eval = nullptr;  // optional, excluded from CTR negatives
  const InteractionSet* test = nullptr;
  const PairSets* pairs = nullptr;  // dense ids; optional, drives alignment
};

// CTR, Recall/NDCG at each k, inter/intra diversity, alignment/uniformity
// and the cold-start table, in that order.
std::vector<MetricRow> evaluate_model(const EvalInputs& inputs, const ModelContext& ctx, const ParameterSet& params,
                                      const EvalSpec& spec, std::uint64_t seed);

// `metric \t k \t stratum \t value \t users` with a header line; values
// printed with round-trip precision.
void write_metrics(const std::vector<MetricRow>& rows, std::ostream& out);
void write_metrics(const std::vector<MetricRow>& rows, const std::filesystem::path& path);

// Pairs of content features for every (anchor, positive) link.
std::vector<std::pair<Vec, Vec>> positive_pair_vectors(const PairSets& pairs, const ContentVectors& vectors);

}  // namespace kgrec
