#pragma once

#include <map>
#include <set>
#include <span>
#include <vector>

#include "kgrec/interactions.hpp"
#include "kgrec/kgcn.hpp"
#include "kgrec/matrix.hpp"

namespace kgrec {

struct ScoredLabel {
  double score = 0.0;
  int label = 0;
};

// Probability that a random positive outscores a random negative, ties 0.5.
// Throws DataError unless both classes are present.
double auc(std::span<const ScoredLabel> scores);

// Predictions are score >= threshold; 0 when nothing is predicted positive.
double f1(std::span<const ScoredLabel> scores, double threshold = 0.5);

double recall_at_k(const RankedRecommendations& recs, const std::set<int>& relevant, std::size_t k);

// Binary gains; the ideal DCG places min(k, |relevant|) hits first.
double ndcg_at_k(const RankedRecommendations& recs, const std::set<int>& relevant, std::size_t k);

// 1 - cos(a, b); throws DataError for zero vectors.
double cosine_distance(std::span<const double> a, std::span<const double> b);

// Mean cosine distance between top-k indicator vectors over all user pairs.
double inter_list_diversity(std::span<const RankedRecommendations> recs, std::size_t k);

// Per user mean pairwise cosine distance among the top-k content vectors,
// averaged over users.
double intra_list_diversity(std::span<const RankedRecommendations> recs, const std::map<int, Vec>& content_vectors,
                            std::size_t k);

// Mean squared distance between normalized positive-pair vectors.
double alignment_loss(std::span<const std::pair<Vec, Vec>> positive_pairs);

// log mean over unordered pairs of exp(-2 ||x - y||^2), normalized vectors.
double uniformity_loss(std::span<const Vec> vectors);

// Percentile cut points over per-user training interaction counts. Stratum
// p holds the users whose count is at most the nearest-rank p-th
// percentile, so 100 is everyone and small p isolates cold-start users.
struct StrataSpec {
  std::vector<double> cuts{1, 5, 10, 25, 50, 100};

  void validate() const;  // strictly increasing within (0, 100]
};

struct StratumRow {
  double percentile = 0.0;
  double ndcg = 0.0;    // NaN when the stratum is empty
  double recall = 0.0;  // NaN when the stratum is empty
  std::size_t users = 0;
};

// Users that have test positives and a ranking in recs are bucketed by
// their training positive count.
std::vector<StratumRow> cold_start_report(const InteractionSet& test, const InteractionSet& train,
                                          const std::map<int, RankedRecommendations>& recs, const StrataSpec& strata,
                                          std::size_t k);

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  double df = 0.0;
};

// Welch's unequal-variance two-sided t-test.
TTestResult two_sample_ttest(std::span<const double> a, std::span<const double> b);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double a, double b, double x);

// Two-sided tail probability P(|T| >= |t|) of Student's t with df degrees.
double student_t_two_sided(double t, double df);

}  // namespace kgrec
