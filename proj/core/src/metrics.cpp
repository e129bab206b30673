#include "kgrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "kgrec/error.hpp"

namespace kgrec {

double auc(std::span<const ScoredLabel> scores) {
  std::vector<ScoredLabel> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.score < b.score; });
  double pos = 0.0;
  double neg = 0.0;
  double positive_rank_sum = 0.0;
  // Average ranks over tie groups (Mann-Whitney U).
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].score == sorted[i].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t m = i; m < j; ++m) {
      if (sorted[m].label == 1) {
        positive_rank_sum += avg_rank;
        pos += 1.0;
      } else {
        neg += 1.0;
      }
    }
    i = j;
  }
  if (pos == 0.0 || neg == 0.0) throw DataError("AUC needs both positive and negative examples");
  return (positive_rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

double f1(std::span<const ScoredLabel> scores, double threshold) {
  double tp = 0.0, fp = 0.0, fn = 0.0;
  bool any_pos = false, any_neg = false;
  for (const auto& s : scores) {
    const bool predicted = s.score >= threshold;
    if (s.label == 1) {
      any_pos = true;
      (predicted ? tp : fn) += 1.0;
    } else {
      any_neg = true;
      if (predicted) fp += 1.0;
    }
  }
  if (!any_pos || !any_neg) throw DataError("F1 needs both positive and negative examples");
  if (tp + fp == 0.0) return 0.0;
  const double precision = tp / (tp + fp);
  const double recall = tp / (tp + fn);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double recall_at_k(const RankedRecommendations& recs, const std::set<int>& relevant, std::size_t k) {
  if (relevant.empty()) throw DataError("recall needs a non-empty relevant set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < std::min(k, recs.items.size()); ++i) hits += relevant.count(recs.items[i].content);
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

double ndcg_at_k(const RankedRecommendations& recs, const std::set<int>& relevant, std::size_t k) {
  if (relevant.empty()) throw DataError("NDCG needs a non-empty relevant set");
  double dcg = 0.0;
  for (std::size_t i = 0; i < std::min(k, recs.items.size()); ++i) {
    if (relevant.count(recs.items[i].content)) dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  double ideal = 0.0;
  for (std::size_t i = 0; i < std::min(k, relevant.size()); ++i) ideal += 1.0 / std::log2(static_cast<double>(i) + 2.0);
  return dcg / ideal;
}

double cosine_distance(std::span<const double> a, std::span<const double> b) {
  const double na = std::sqrt(dot(a, a));
  const double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) throw DataError("cosine distance of a zero vector");
  return 1.0 - dot(a, b) / (na * nb);
}

double inter_list_diversity(std::span<const RankedRecommendations> recs, std::size_t k) {
  if (recs.size() < 2) throw DataError("inter-list diversity needs at least two users");
  std::vector<std::vector<int>> lists;
  for (const auto& r : recs) {
    if (r.items.size() < k) throw DataError("user " + std::to_string(r.user) + " has fewer than k recommendations");
    auto ids = r.top_ids(k);
    std::sort(ids.begin(), ids.end());
    lists.push_back(std::move(ids));
  }
  double total = 0.0;
  std::size_t pairs = 0;
  std::vector<int> common;
  for (std::size_t i = 0; i < lists.size(); ++i) {
    for (std::size_t j = i + 1; j < lists.size(); ++j) {
      common.clear();
      std::set_intersection(lists[i].begin(), lists[i].end(), lists[j].begin(), lists[j].end(),
                            std::back_inserter(common));
      const double norm = std::sqrt(static_cast<double>(lists[i].size()) * static_cast<double>(lists[j].size()));
      total += 1.0 - static_cast<double>(common.size()) / norm;
      ++pairs;
    }
  }
  return total / static_cast<double>(pairs);
}

double intra_list_diversity(std::span<const RankedRecommendations> recs, const std::map<int, Vec>& content_vectors,
                            std::size_t k) {
  if (recs.empty()) throw DataError("intra-list diversity needs at least one user");
  double total = 0.0;
  for (const auto& r : recs) {
    const auto ids = r.top_ids(k);
    if (ids.size() < 2) throw DataError("user " + std::to_string(r.user) + " has fewer than two recommendations");
    std::vector<const Vec*> vecs;
    for (int id : ids) {
      auto it = content_vectors.find(id);
      if (it == content_vectors.end()) throw DataError("no vector for content " + std::to_string(id));
      vecs.push_back(&it->second);
    }
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t p = 0; p < vecs.size(); ++p) {
      for (std::size_t q = p + 1; q < vecs.size(); ++q) {
        sum += cosine_distance(*vecs[p], *vecs[q]);
        ++pairs;
      }
    }
    total += sum / static_cast<double>(pairs);
  }
  return total / static_cast<double>(recs.size());
}

namespace {

Vec normalized(std::span<const double> v) {
  const double n = std::sqrt(dot(v, v));
  if (n == 0.0) throw DataError("cannot normalize a zero vector");
  Vec out(v.begin(), v.end());
  for (double& x : out) x /= n;
  return out;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

double alignment_loss(std::span<const std::pair<Vec, Vec>> positive_pairs) {
  if (positive_pairs.empty()) throw DataError("alignment needs at least one positive pair");
  double total = 0.0;
  for (const auto& [a, b] : positive_pairs) total += squared_distance(normalized(a), normalized(b));
  return total / static_cast<double>(positive_pairs.size());
}

double uniformity_loss(std::span<const Vec> vectors) {
  if (vectors.size() < 2) throw DataError("uniformity needs at least two vectors");
  std::vector<Vec> unit;
  unit.reserve(vectors.size());
  for (const auto& v : vectors) unit.push_back(normalized(v));
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < unit.size(); ++i) {
    for (std::size_t j = i + 1; j < unit.size(); ++j) {
      total += std::exp(-2.0 * squared_distance(unit[i], unit[j]));
      ++pairs;
    }
  }
  return std::log(total / static_cast<double>(pairs));
}

void StrataSpec::validate() const {
  if (cuts.empty()) throw ConfigError("strata need at least one cut point");
  double prev = 0.0;
  for (double c : cuts) {
    if (!(c > prev && c <= 100.0)) throw ConfigError("strata cut points must increase strictly within (0, 100]");
    prev = c;
  }
}

std::vector<StratumRow> cold_start_report(const InteractionSet& test, const InteractionSet& train,
                                          const std::map<int, RankedRecommendations>& recs, const StrataSpec& strata,
                                          std::size_t k) {
  strata.validate();
  struct UserScore {
    std::size_t count;
    double ndcg;
    double recall;
  };
  std::vector<UserScore> users;
  for (int u = 0; u < test.num_users(); ++u) {
    auto pos = test.positives(u);
    auto it = recs.find(u);
    if (pos.empty() || it == recs.end()) continue;
    const std::set<int> relevant(pos.begin(), pos.end());
    users.push_back({u < train.num_users() ? train.positive_count(u) : 0, ndcg_at_k(it->second, relevant, k),
                     recall_at_k(it->second, relevant, k)});
  }
  std::vector<std::size_t> counts;
  for (const auto& u : users) counts.push_back(u.count);
  std::sort(counts.begin(), counts.end());

  std::vector<StratumRow> rows;
  for (double p : strata.cuts) {
    StratumRow row;
    row.percentile = p;
    if (counts.empty()) {
      row.ndcg = row.recall = std::numeric_limits<double>::quiet_NaN();
      rows.push_back(row);
      continue;
    }
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(counts.size())));
    const std::size_t threshold = counts[std::max<std::size_t>(rank, 1) - 1];
    double ndcg = 0.0, recall = 0.0;
    for (const auto& u : users) {
      if (u.count > threshold) continue;
      ndcg += u.ndcg;
      recall += u.recall;
      ++row.users;
    }
    row.ndcg = ndcg / static_cast<double>(row.users);
    row.recall = recall / static_cast<double>(row.users);
    rows.push_back(row);
  }
  return rows;
}

namespace {

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 500;
  constexpr double kEpsilon = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEpsilon) return h;
  }
  throw NumericError("incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0) || !(x >= 0.0 && x <= 1.0)) throw NumericError("incomplete beta argument out of range");
  if (x == 0.0 || x == 1.0) return x;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double df) {
  if (!(df > 0.0)) throw NumericError("degrees of freedom must be positive");
  if (std::isinf(t)) return 0.0;
  return regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

TTestResult two_sample_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw DataError("t-test needs at least two samples per group");
  auto moments = [](std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::pair{mean, ss / (n - 1.0)};
  };
  const auto [mean_a, var_a] = moments(a);
  const auto [mean_b, var_b] = moments(b);
  const double se_a = var_a / static_cast<double>(a.size());
  const double se_b = var_b / static_cast<double>(b.size());
  const double se = se_a + se_b;
  if (se == 0.0) {
    if (mean_a == mean_b) return {0.0, 1.0, static_cast<double>(a.size() + b.size() - 2)};
    throw NumericError("t-test undefined: zero variance with unequal means");
  }
  TTestResult r;
  r.t = (mean_a - mean_b) / std::sqrt(se);
  r.df = se * se / (se_a * se_a / static_cast<double>(a.size() - 1) + se_b * se_b / static_cast<double>(b.size() - 1));
  r.p = student_t_two_sided(r.t, r.df);
  return r;
}

}  // namespace kgrec
