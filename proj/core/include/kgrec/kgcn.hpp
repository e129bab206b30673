#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgrec/embeddings.hpp"
#include "kgrec/knowledge_graph.hpp"
#include "kgrec/matrix.hpp"
#include "kgrec/random.hpp"

namespace kgrec {

enum class Aggregator { sum, concat };

std::string_view to_string(Aggregator a);
Aggregator parse_aggregator(std::string_view text);

struct HyperParams {
  int neighbor_size = 4;  // K
  int layers = 1;         // L
  int dim = 16;           // d
  Aggregator aggregator = Aggregator::concat;
  double gamma = 0.8;
  double l2 = 1e-7;  // lambda
  double lr = 2e-2;
  int batch_size = 256;
  int epochs = 10;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError

  bool operator==(const HyperParams&) const = default;
};

// Trainable tensors. Also used, zero-filled, as the container for
// gradients and Adam moments since shapes are identical.
struct ParameterSet {
  Matrix users;      // U: num_users x d
  Matrix entities;   // V: num_entities x d
  Matrix relations;  // R: num_relations x d
  std::vector<Matrix> layer_weights;  // W_i: (2d or d) x d
  std::vector<Matrix> layer_biases;   // b_i: 1 x d
  Matrix proj_weight;                 // W_alpha: ext_dim x d, empty without external embeddings
  Matrix proj_bias;                   // b_alpha: 1 x d

  bool has_projection() const { return !proj_weight.empty(); }

  // Visits every tensor in a fixed order: U, V, R, W0, b0, ..., W_alpha, b_alpha.
  void for_each(const std::function<void(std::string_view, Matrix&)>& fn);
  void for_each(const std::function<void(std::string_view, const Matrix&)>& fn) const;

  ParameterSet zeros_like() const;
  double squared_norm() const;
  std::size_t parameter_count() const;

  bool operator==(const ParameterSet&) const = default;
};

// Glorot-uniform for every tensor; W_alpha is only allocated when
// ext_dim is set.
ParameterSet init_parameters(const HyperParams& hp, int num_users, int num_entities, int num_relations,
                             std::optional<std::size_t> ext_dim, Rng& rng);

// Everything besides the parameters that a forward pass reads.
struct ModelContext {
  const KnowledgeGraph* graph = nullptr;
  HyperParams hp;
  // Dense-id keyed content embeddings; null runs without semantic text.
  const ExternalEmbeddingTable* external = nullptr;
};

// relu(ext_vec * W_alpha + b_alpha)
Vec project_content(std::span<const double> ext_vec, const ParameterSet& params);

// Softmax of user_vec . relation_vec_k over k.
Vec relation_weights(std::span<const double> user_vec, std::span<const std::span<const double>> relation_vecs);

// act(W_i [self || sum_k w_k n_k] + b_i) for concat, act(W_i (self + sum) + b_i)
// for sum; act is tanh on the last layer and relu otherwise.
Vec aggregate(std::span<const double> self_vec, std::span<const std::span<const double>> neighbor_vecs,
              std::span<const double> weights, int layer_index, const ParameterSet& params, const HyperParams& hp);

// Input feature of an entity before aggregation: the projected external
// vector for covered contents, its V row otherwise.
Vec initial_feature(int entity, const ModelContext& ctx, const ParameterSet& params);

// Depth-L tree of sampled neighbors; hop h holds K^h entities, and the
// children of entity j at hop h are j*K .. j*K+K-1 at hop h+1.
struct ReceptiveField {
  std::vector<std::vector<int>> entities;   // hops 0..L
  std::vector<std::vector<int>> relations;  // hops 1..L (index 0 unused)
};

ReceptiveField sample_receptive_field(const KnowledgeGraph& graph, int content, int k, int layers, Rng& rng);

// Cached intermediates of one user-content forward pass.
struct ForwardTrace {
  int user = 0;
  int content = 0;
  ReceptiveField field;
  std::vector<std::vector<Vec>> projection_pre;  // per hop/entity: pre-relu projection, empty if V row
  std::vector<std::vector<double>> weights;      // per hop 1..L: softmax weights aligned with field.entities
  // activations[i][h][j]: input of layer i (i = 0 initial features,
  // i = L final), for hops h <= L - i.
  std::vector<std::vector<std::vector<Vec>>> activations;
  // layer_inputs[i][h][j]: affine input of layer i ([self || neighborhood]
  // for concat, self + neighborhood for sum), hops h < L - i.
  std::vector<std::vector<std::vector<Vec>>> layer_inputs;
  Vec representation;
  double logit = 0.0;
};

ForwardTrace trace_forward(int user, int content, const ReceptiveField& field, const ModelContext& ctx,
                           const ParameterSet& params);

// User-conditioned content vector; draws the receptive field from rng.
Vec content_representation(int user, int content, const ModelContext& ctx, const ParameterSet& params, Rng& rng);

// sigmoid(U[user] . content_representation(user, content)).
double predict(int user, int content, const ModelContext& ctx, const ParameterSet& params, Rng& rng);

struct ScoredContent {
  int content = 0;
  double score = 0.0;
};

struct RankedRecommendations {
  int user = 0;
  std::vector<ScoredContent> items;  // non-increasing score, ties by ascending id

  std::vector<int> top_ids(std::size_t k) const;
};

RankedRecommendations rank_all(int user, std::span<const int> candidates, const ModelContext& ctx,
                               const ParameterSet& params, Rng& rng);

double sigmoid(double x);

}  // namespace kgrec
