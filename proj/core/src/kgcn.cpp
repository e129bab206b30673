#include "kgrec/kgcn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "kgrec/error.hpp"

namespace kgrec {

std::string_view to_string(Aggregator a) { return a == Aggregator::sum ? "sum" : "concat"; }

Aggregator parse_aggregator(std::string_view text) {
  if (text == "sum") return Aggregator::sum;
  if (text == "concat") return Aggregator::concat;
  throw ConfigError("unknown aggregator '" + std::string(text) + "' (expected sum or concat)");
}

void HyperParams::validate() const {
  if (neighbor_size < 1) throw ConfigError("K (neighbor sample size) must be >= 1");
  if (layers != 1 && layers != 2) throw ConfigError("number of layers must be 1 or 2");
  if (dim < 1) throw ConfigError("embedding dimension must be >= 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw ConfigError("lambda must be >= 0");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
}

namespace {

constexpr const char* kLayerNames[][2] = {{"W0", "b0"}, {"W1", "b1"}};

template <typename Params, typename Fn>
void visit(Params& p, Fn&& fn) {
  fn("U", p.users);
  fn("V", p.entities);
  fn("R", p.relations);
  for (std::size_t i = 0; i < p.layer_weights.size(); ++i) {
    fn(kLayerNames[i][0], p.layer_weights[i]);
    fn(kLayerNames[i][1], p.layer_biases[i]);
  }
  if (!p.proj_weight.empty()) {
    fn("W_alpha", p.proj_weight);
    fn("b_alpha", p.proj_bias);
  }
}

void glorot(Matrix& m, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (double& v : m.values()) v = uniform_real(rng, -a, a);
}

}  // namespace

void ParameterSet::for_each(const std::function<void(std::string_view, Matrix&)>& fn) { visit(*this, fn); }

void ParameterSet::for_each(const std::function<void(std::string_view, const Matrix&)>& fn) const {
  visit(*this, fn);
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out = *this;
  out.for_each([](std::string_view, Matrix& m) { m.fill(0.0); });
  return out;
}

double ParameterSet::squared_norm() const {
  double total = 0.0;
  for_each([&](std::string_view, const Matrix& m) {
    for (double v : m.values()) total += v * v;
  });
  return total;
}

std::size_t ParameterSet::parameter_count() const {
  std::size_t total = 0;
  for_each([&](std::string_view, const Matrix& m) { total += m.size(); });
  return total;
}

ParameterSet init_parameters(const HyperParams& hp, int num_users, int num_entities, int num_relations,
                             std::optional<std::size_t> ext_dim, Rng& rng) {
  hp.validate();
  if (num_users < 1 || num_entities < 1 || num_relations < 1) {
    throw ConfigError("user, entity and relation counts must be positive");
  }
  const auto d = static_cast<std::size_t>(hp.dim);
  const std::size_t in = hp.aggregator == Aggregator::concat ? 2 * d : d;
  ParameterSet p;
  p.users = Matrix(static_cast<std::size_t>(num_users), d);
  p.entities = Matrix(static_cast<std::size_t>(num_entities), d);
  p.relations = Matrix(static_cast<std::size_t>(num_relations), d);
  for (int i = 0; i < hp.layers; ++i) {
    p.layer_weights.emplace_back(in, d);
    p.layer_biases.emplace_back(1, d);
  }
  if (ext_dim) {
    if (*ext_dim == 0) throw ConfigError("external embedding dimension must be positive");
    p.proj_weight = Matrix(*ext_dim, d);
    p.proj_bias = Matrix(1, d);
  }
  p.for_each([&](std::string_view, Matrix& m) { glorot(m, rng); });
  return p;
}

Vec project_content(std::span<const double> ext_vec, const ParameterSet& params) {
  if (!params.has_projection()) throw ConfigError("model has no content projection layer");
  if (ext_vec.size() != params.proj_weight.rows()) {
    throw DataError("external vector has length " + std::to_string(ext_vec.size()) + ", projection expects " +
                    std::to_string(params.proj_weight.rows()));
  }
  Vec out(params.proj_weight.cols());
  affine(ext_vec, params.proj_weight, params.proj_bias.row(0), out);
  for (double& v : out) v = std::max(v, 0.0);
  return out;
}

Vec relation_weights(std::span<const double> user_vec, std::span<const std::span<const double>> relation_vecs) {
  Vec w(relation_vecs.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = dot(user_vec, relation_vecs[k]);
    top = std::max(top, w[k]);
  }
  double total = 0.0;
  for (double& v : w) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : w) v /= total;
  return w;
}

namespace {

bool is_final(int layer_index, const HyperParams& hp) { return layer_index == hp.layers - 1; }

// Builds the affine input of a layer from self vector and weighted neighbors.
Vec layer_input(std::span<const double> self_vec, std::span<const std::span<const double>> neighbor_vecs,
                std::span<const double> weights, Aggregator aggregator) {
  const auto d = self_vec.size();
  Vec neighborhood(d, 0.0);
  for (std::size_t k = 0; k < neighbor_vecs.size(); ++k) {
    for (std::size_t j = 0; j < d; ++j) neighborhood[j] += weights[k] * neighbor_vecs[k][j];
  }
  if (aggregator == Aggregator::concat) {
    Vec in(self_vec.begin(), self_vec.end());
    in.insert(in.end(), neighborhood.begin(), neighborhood.end());
    return in;
  }
  for (std::size_t j = 0; j < d; ++j) neighborhood[j] += self_vec[j];
  return neighborhood;
}

Vec apply_layer(const Vec& input, int layer_index, const ParameterSet& params, const HyperParams& hp) {
  const auto& w = params.layer_weights.at(static_cast<std::size_t>(layer_index));
  if (input.size() != w.rows()) {
    throw DataError("layer " + std::to_string(layer_index) + " expects input of length " + std::to_string(w.rows()) +
                    ", got " + std::to_string(input.size()));
  }
  Vec out(w.cols());
  affine(input, w, params.layer_biases[static_cast<std::size_t>(layer_index)].row(0), out);
  if (is_final(layer_index, hp)) {
    for (double& v : out) v = std::tanh(v);
  } else {
    for (double& v : out) v = std::max(v, 0.0);
  }
  return out;
}

}  // namespace

Vec aggregate(std::span<const double> self_vec, std::span<const std::span<const double>> neighbor_vecs,
              std::span<const double> weights, int layer_index, const ParameterSet& params, const HyperParams& hp) {
  return apply_layer(layer_input(self_vec, neighbor_vecs, weights, hp.aggregator), layer_index, params, hp);
}

Vec initial_feature(int entity, const ModelContext& ctx, const ParameterSet& params) {
  if (ctx.external && params.has_projection()) {
    auto ext = ctx.external->find(entity);
    if (!ext.empty() && ctx.graph->is_content(entity)) return project_content(ext, params);
  }
  auto row = params.entities.row(static_cast<std::size_t>(entity));
  return Vec(row.begin(), row.end());
}

ReceptiveField sample_receptive_field(const KnowledgeGraph& graph, int content, int k, int layers, Rng& rng) {
  ReceptiveField field;
  field.entities.push_back({content});
  field.relations.emplace_back();
  for (int h = 0; h < layers; ++h) {
    std::vector<int> next_entities;
    std::vector<int> next_relations;
    next_entities.reserve(field.entities.back().size() * static_cast<std::size_t>(k));
    next_relations.reserve(next_entities.capacity());
    for (int e : field.entities.back()) {
      for (const auto& nb : neighbor_sample(graph, e, k, rng)) {
        next_entities.push_back(nb.entity);
        next_relations.push_back(nb.relation);
      }
    }
    field.entities.push_back(std::move(next_entities));
    field.relations.push_back(std::move(next_relations));
  }
  return field;
}

ForwardTrace trace_forward(int user, int content, const ReceptiveField& field, const ModelContext& ctx,
                           const ParameterSet& params) {
  const auto& hp = ctx.hp;
  const auto layers = static_cast<std::size_t>(hp.layers);
  const auto k = static_cast<std::size_t>(hp.neighbor_size);
  if (field.entities.size() != layers + 1) throw DataError("receptive field depth does not match layer count");

  ForwardTrace t;
  t.user = user;
  t.content = content;
  t.field = field;
  const auto user_vec = params.users.row(static_cast<std::size_t>(user));

  // Initial features, remembering pre-activations of projected contents.
  t.projection_pre.resize(layers + 1);
  t.activations.resize(layers + 1);
  t.activations[0].resize(layers + 1);
  for (std::size_t h = 0; h <= layers; ++h) {
    const auto& hop = field.entities[h];
    t.projection_pre[h].resize(hop.size());
    t.activations[0][h].resize(hop.size());
    for (std::size_t j = 0; j < hop.size(); ++j) {
      const int e = hop[j];
      std::span<const double> ext;
      if (ctx.external && params.has_projection() && ctx.graph->is_content(e)) ext = ctx.external->find(e);
      if (!ext.empty()) {
        Vec pre(params.proj_weight.cols());
        affine(ext, params.proj_weight, params.proj_bias.row(0), pre);
        Vec out(pre.size());
        for (std::size_t m = 0; m < pre.size(); ++m) out[m] = std::max(pre[m], 0.0);
        t.projection_pre[h][j] = std::move(pre);
        t.activations[0][h][j] = std::move(out);
      } else {
        auto row = params.entities.row(static_cast<std::size_t>(e));
        t.activations[0][h][j].assign(row.begin(), row.end());
      }
    }
  }

  // Relation importance is layer independent: one softmax per parent.
  t.weights.resize(layers + 1);
  for (std::size_t h = 1; h <= layers; ++h) {
    const auto& rels = field.relations[h];
    t.weights[h].resize(rels.size());
    std::vector<std::span<const double>> rel_vecs(k);
    for (std::size_t parent = 0; parent < rels.size() / k; ++parent) {
      for (std::size_t c = 0; c < k; ++c) {
        rel_vecs[c] = params.relations.row(static_cast<std::size_t>(rels[parent * k + c]));
      }
      auto w = relation_weights(user_vec, rel_vecs);
      std::copy(w.begin(), w.end(), t.weights[h].begin() + static_cast<std::ptrdiff_t>(parent * k));
    }
  }

  t.layer_inputs.resize(layers);
  std::vector<std::span<const double>> nb(k);
  for (std::size_t i = 0; i < layers; ++i) {
    const std::size_t hops = layers - i;
    t.layer_inputs[i].resize(hops);
    t.activations[i + 1].resize(hops);
    for (std::size_t h = 0; h < hops; ++h) {
      const auto& selves = t.activations[i][h];
      const auto& children = t.activations[i][h + 1];
      t.layer_inputs[i][h].resize(selves.size());
      t.activations[i + 1][h].resize(selves.size());
      for (std::size_t j = 0; j < selves.size(); ++j) {
        for (std::size_t c = 0; c < k; ++c) nb[c] = children[j * k + c];
        std::span<const double> w(t.weights[h + 1].data() + j * k, k);
        t.layer_inputs[i][h][j] = layer_input(selves[j], nb, w, hp.aggregator);
        t.activations[i + 1][h][j] = apply_layer(t.layer_inputs[i][h][j], static_cast<int>(i), params, hp);
      }
    }
  }
  t.representation = t.activations[layers][0][0];
  t.logit = dot(user_vec, t.representation);
  return t;
}

Vec content_representation(int user, int content, const ModelContext& ctx, const ParameterSet& params, Rng& rng) {
  if (!ctx.graph->is_content(content)) throw DataError("entity " + std::to_string(content) + " is not a content");
  auto field = sample_receptive_field(*ctx.graph, content, ctx.hp.neighbor_size, ctx.hp.layers, rng);
  return trace_forward(user, content, field, ctx, params).representation;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double predict(int user, int content, const ModelContext& ctx, const ParameterSet& params, Rng& rng) {
  const auto rep = content_representation(user, content, ctx, params, rng);
  return sigmoid(dot(params.users.row(static_cast<std::size_t>(user)), rep));
}

std::vector<int> RankedRecommendations::top_ids(std::size_t k) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < std::min(k, items.size()); ++i) out.push_back(items[i].content);
  return out;
}

RankedRecommendations rank_all(int user, std::span<const int> candidates, const ModelContext& ctx,
                               const ParameterSet& params, Rng& rng) {
  if (candidates.empty()) throw DataError("no candidates to rank for user " + std::to_string(user));
  RankedRecommendations recs;
  recs.user = user;
  recs.items.reserve(candidates.size());
  for (int c : candidates) recs.items.push_back({c, predict(user, c, ctx, params, rng)});
  std::sort(recs.items.begin(), recs.items.end(), [](const ScoredContent& a, const ScoredContent& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.content < b.content;
  });
  return recs;
}

}  // namespace kgrec
