#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "kgrec/interactions.hpp"
#include "kgrec/kgcn.hpp"
#include "kgrec/pair_sampler.hpp"

namespace kgrec {

inline constexpr double kProbabilityClamp = 1e-12;

struct Example {
  int user = 0;
  int content = 0;
  int label = 0;
};

struct LossBreakdown {
  double base = 0.0;
  double contrastive = 0.0;
  double l2 = 0.0;
  double total = 0.0;
};

// One optimizer step's worth of work: user-content examples for the
// collaborative term and anchors (dense content ids) for the contrastive term.
struct TrainingBatch {
  std::vector<Example> examples;
  std::vector<int> anchors;
};

// Binary cross-entropy with the probability clamped to [eps, 1 - eps].
double binary_cross_entropy(int label, double prob);

// Mean BCE of predict() against labels; receptive fields drawn from rng.
double base_loss(std::span<const Example> batch, const ModelContext& ctx, const ParameterSet& params, Rng& rng);

using ContentVectors = std::map<int, Vec>;

// Per anchor: mean BCE(1, sigmoid(h_c . h_p)) over positives plus mean
// BCE(0, sigmoid(h_c . h_n)) over negatives; averaged over anchors.
double contrastive_loss(const PairSets& pairs, const ContentVectors& content_vectors, std::span<const int> anchors);

// initial_feature() of each listed content.
ContentVectors content_features(std::span<const int> contents, const ModelContext& ctx, const ParameterSet& params);

// Relative weight of each objective term. from_hp gives gamma, 1 - gamma and 1.
struct ObjectiveWeights {
  double base = 1.0;
  double contrastive = 0.0;
  double l2 = 1.0;

  static ObjectiveWeights from_hp(const HyperParams& hp) { return {hp.gamma, 1.0 - hp.gamma, 1.0}; }
};

// Fills total from the three components.
LossBreakdown combine_losses(double base, double contrastive, double l2, const ObjectiveWeights& weights);

// gamma * base + (1 - gamma) * CL + lambda * ||Theta||^2. The contrastive
// term is skipped (reported as 0) when its weight is 0 or pairs is null.
LossBreakdown total_loss(const TrainingBatch& batch, const PairSets* pairs, const ModelContext& ctx,
                         const ParameterSet& params, Rng& rng);

struct LossAndGradients {
  LossBreakdown loss;
  ParameterSet gradients;
};

LossAndGradients loss_and_gradients(const TrainingBatch& batch, const PairSets* pairs, const ModelContext& ctx,
                                    const ParameterSet& params, Rng& rng, const ObjectiveWeights& weights);

// Exact gradients of total_loss, drawing the same receptive fields
// total_loss would from an identical rng state.
ParameterSet compute_gradients(const TrainingBatch& batch, const PairSets* pairs, const ModelContext& ctx,
                               const ParameterSet& params, Rng& rng);

// Accumulates d(scale * logit)/d(theta) of one traced forward pass into grads.
void backprop(const ForwardTrace& trace, double dlogit, const ModelContext& ctx, const ParameterSet& params,
              ParameterSet& grads);

struct AdamState {
  ParameterSet first_moment;
  ParameterSet second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const ParameterSet& params);
};

void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state, double lr);

struct EpochReport {
  int epoch = 0;
  LossBreakdown loss;
  std::optional<double> auc;
  std::optional<double> f1;
};

// Called after every epoch; may fill auc/f1.
using EpochCallback = std::function<void(const ParameterSet&, EpochReport&)>;

struct FitResult {
  ParameterSet params;
  std::vector<EpochReport> log;
};

// Trains from a fresh initialization. pairs (dense ids) may be null, in
// which case the contrastive term is absent regardless of gamma.
FitResult fit(const InteractionSet& train, const PairSets* pairs, const ModelContext& ctx,
              const EpochCallback& on_epoch = {});

// `epoch \t base \t contrastive \t l2 \t total \t auc \t f1`, with a header line.
void write_training_log(const std::vector<EpochReport>& log, const std::filesystem::path& path);
std::vector<EpochReport> read_training_log(const std::filesystem::path& path);

}  // namespace kgrec
