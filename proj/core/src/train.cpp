#include "kgrec/train.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "kgrec/error.hpp"
#include "text_io.hpp"

namespace kgrec {

namespace {

// d BCE(label, sigmoid(s)) / ds, zero where the clamp is active.
double bce_logit_grad(int label, double prob) {
  if (prob < kProbabilityClamp || prob > 1.0 - kProbabilityClamp) return 0.0;
  return prob - static_cast<double>(label);
}

void add_scaled(std::span<double> dst, std::span<const double> src, double scale) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

bool contrastive_active(const PairSets* pairs, std::span<const int> anchors, double weight) {
  return pairs != nullptr && weight != 0.0 && !anchors.empty();
}

void check_anchor(const PairSets& pairs, int anchor) {
  auto p = pairs.positives.find(anchor);
  auto n = pairs.negatives.find(anchor);
  if (p == pairs.positives.end() || p->second.empty() || n == pairs.negatives.end() || n->second.empty()) {
    throw DataError("anchor " + std::to_string(anchor) + " lacks positive or negative pairs");
  }
}

std::vector<int> contrastive_contents(const PairSets& pairs, std::span<const int> anchors) {
  std::set<int> ids;
  for (int a : anchors) {
    check_anchor(pairs, a);
    ids.insert(a);
    for (auto p : pairs.positives.at(a)) ids.insert(static_cast<int>(p));
    for (auto n : pairs.negatives.at(a)) ids.insert(static_cast<int>(n));
  }
  return {ids.begin(), ids.end()};
}

// Gradient of an initial feature into V or through the projection layer.
void backprop_feature(int entity, std::span<const double> grad, const ModelContext& ctx, const ParameterSet& params,
                      ParameterSet& grads) {
  std::span<const double> ext;
  if (ctx.external && params.has_projection() && ctx.graph->is_content(entity)) ext = ctx.external->find(entity);
  if (ext.empty()) {
    add_scaled(grads.entities.row(static_cast<std::size_t>(entity)), grad, 1.0);
    return;
  }
  const auto d = params.proj_weight.cols();
  Vec pre(d);
  affine(ext, params.proj_weight, params.proj_bias.row(0), pre);
  Vec dz(d);
  for (std::size_t m = 0; m < d; ++m) dz[m] = pre[m] > 0.0 ? grad[m] : 0.0;
  for (std::size_t r = 0; r < ext.size(); ++r) add_scaled(grads.proj_weight.row(r), dz, ext[r]);
  add_scaled(grads.proj_bias.row(0), dz, 1.0);
}

}  // namespace

double binary_cross_entropy(int label, double prob) {
  const double p = std::clamp(prob, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return label == 1 ? -std::log(p) : -std::log(1.0 - p);
}

double base_loss(std::span<const Example> batch, const ModelContext& ctx, const ParameterSet& params, Rng& rng) {
  if (batch.empty()) throw DataError("base loss needs a non-empty batch");
  double total = 0.0;
  for (const auto& ex : batch) total += binary_cross_entropy(ex.label, predict(ex.user, ex.content, ctx, params, rng));
  return total / static_cast<double>(batch.size());
}

double contrastive_loss(const PairSets& pairs, const ContentVectors& content_vectors, std::span<const int> anchors) {
  if (anchors.empty()) throw DataError("contrastive loss needs at least one anchor");
  auto vec = [&](std::int64_t id) -> const Vec& {
    auto it = content_vectors.find(static_cast<int>(id));
    if (it == content_vectors.end()) throw DataError("no vector for content " + std::to_string(id));
    return it->second;
  };
  double total = 0.0;
  for (int a : anchors) {
    check_anchor(pairs, a);
    const auto& h = vec(a);
    const auto& pos = pairs.positives.at(a);
    const auto& neg = pairs.negatives.at(a);
    double pos_term = 0.0;
    for (auto p : pos) pos_term += binary_cross_entropy(1, sigmoid(dot(h, vec(p))));
    double neg_term = 0.0;
    for (auto n : neg) neg_term += binary_cross_entropy(0, sigmoid(dot(h, vec(n))));
    total += pos_term / static_cast<double>(pos.size()) + neg_term / static_cast<double>(neg.size());
  }
  return total / static_cast<double>(anchors.size());
}

ContentVectors content_features(std::span<const int> contents, const ModelContext& ctx, const ParameterSet& params) {
  ContentVectors out;
  for (int c : contents) out.emplace(c, initial_feature(c, ctx, params));
  return out;
}

LossBreakdown combine_losses(double base, double contrastive, double l2, const ObjectiveWeights& weights) {
  return {base, contrastive, l2, weights.base * base + weights.contrastive * contrastive + weights.l2 * l2};
}

LossBreakdown total_loss(const TrainingBatch& batch, const PairSets* pairs, const ModelContext& ctx,
                         const ParameterSet& params, Rng& rng) {
  const auto w = ObjectiveWeights::from_hp(ctx.hp);
  double base = 0.0;
  double contrastive = 0.0;
  if (!batch.examples.empty()) base = base_loss(batch.examples, ctx, params, rng);
  if (contrastive_active(pairs, batch.anchors, w.contrastive)) {
    const auto ids = contrastive_contents(*pairs, batch.anchors);
    contrastive = contrastive_loss(*pairs, content_features(ids, ctx, params), batch.anchors);
  }
  return combine_losses(base, contrastive, ctx.hp.l2 * params.squared_norm(), w);
}

void backprop(const ForwardTrace& t, double dlogit, const ModelContext& ctx, const ParameterSet& params,
              ParameterSet& grads) {
  const auto& hp = ctx.hp;
  const auto layers = static_cast<std::size_t>(hp.layers);
  const auto k = static_cast<std::size_t>(hp.neighbor_size);
  const auto d = static_cast<std::size_t>(hp.dim);
  const auto user = static_cast<std::size_t>(t.user);
  const auto user_vec = params.users.row(user);

  add_scaled(grads.users.row(user), t.representation, dlogit);

  // Upstream gradient of the current layer outputs, indexed [hop][entity].
  std::vector<std::vector<Vec>> upstream(1, std::vector<Vec>(1, Vec(user_vec.begin(), user_vec.end())));
  for (double& v : upstream[0][0]) v *= dlogit;

  // Gradient wrt relation scores, accumulated over layers.
  std::vector<std::vector<double>> dscore(layers + 1);
  for (std::size_t h = 1; h <= layers; ++h) dscore[h].assign(t.field.relations[h].size(), 0.0);

  Vec dz(d);
  Vec din;
  for (std::size_t i = layers; i-- > 0;) {
    const auto& w = params.layer_weights[i];
    auto& dw = grads.layer_weights[i];
    auto db = grads.layer_biases[i].row(0);
    const bool final_layer = i + 1 == layers;
    const std::size_t hops = layers - i;

    std::vector<std::vector<Vec>> below(hops + 1);
    for (std::size_t h = 0; h <= hops; ++h) below[h].assign(t.activations[i][h].size(), Vec(d, 0.0));

    for (std::size_t h = 0; h < hops; ++h) {
      for (std::size_t j = 0; j < t.activations[i + 1][h].size(); ++j) {
        const auto& out = t.activations[i + 1][h][j];
        const auto& g = upstream[h][j];
        for (std::size_t m = 0; m < d; ++m) {
          const double deriv = final_layer ? 1.0 - out[m] * out[m] : (out[m] > 0.0 ? 1.0 : 0.0);
          dz[m] = g[m] * deriv;
        }
        const auto& input = t.layer_inputs[i][h][j];
        for (std::size_t r = 0; r < input.size(); ++r) add_scaled(dw.row(r), dz, input[r]);
        add_scaled(db, dz, 1.0);
        din.assign(input.size(), 0.0);
        for (std::size_t r = 0; r < input.size(); ++r) din[r] = dot(w.row(r), dz);

        const std::span<const double> dself(din.data(), d);
        const std::span<const double> dneighborhood(
            din.data() + (hp.aggregator == Aggregator::concat ? d : 0), d);
        add_scaled(below[h][j], dself, 1.0);

        const double* weights = t.weights[h + 1].data() + j * k;
        double weighted = 0.0;
        Vec dweight(k);
        for (std::size_t c = 0; c < k; ++c) {
          const auto child = j * k + c;
          add_scaled(below[h + 1][child], dneighborhood, weights[c]);
          dweight[c] = dot(dneighborhood, t.activations[i][h + 1][child]);
          weighted += weights[c] * dweight[c];
        }
        for (std::size_t c = 0; c < k; ++c) dscore[h + 1][j * k + c] += weights[c] * (dweight[c] - weighted);
      }
    }
    upstream = std::move(below);
  }

  for (std::size_t h = 0; h <= layers; ++h) {
    for (std::size_t j = 0; j < t.field.entities[h].size(); ++j) {
      backprop_feature(t.field.entities[h][j], upstream[h][j], ctx, params, grads);
    }
  }

  auto du = grads.users.row(user);
  for (std::size_t h = 1; h <= layers; ++h) {
    for (std::size_t m = 0; m < dscore[h].size(); ++m) {
      const auto rel = static_cast<std::size_t>(t.field.relations[h][m]);
      add_scaled(grads.relations.row(rel), user_vec, dscore[h][m]);
      add_scaled(du, params.relations.row(rel), dscore[h][m]);
    }
  }
}

LossAndGradients loss_and_gradients(const TrainingBatch& batch, const PairSets* pairs, const ModelContext& ctx,
                                    const ParameterSet& params, Rng& rng, const ObjectiveWeights& weights) {
  LossAndGradients out;
  out.gradients = params.zeros_like();
  auto& grads = out.gradients;

  if (!batch.examples.empty()) {
    const double scale = 1.0 / static_cast<double>(batch.examples.size());
    double total = 0.0;
    for (const auto& ex : batch.examples) {
      if (!ctx.graph->is_content(ex.content)) throw DataError("entity " + std::to_string(ex.content) + " is not a content");
      const auto field = sample_receptive_field(*ctx.graph, ex.content, ctx.hp.neighbor_size, ctx.hp.layers, rng);
      const auto trace = trace_forward(ex.user, ex.content, field, ctx, params);
      const double prob = sigmoid(trace.logit);
      total += binary_cross_entropy(ex.label, prob);
      if (weights.base != 0.0) {
        backprop(trace, weights.base * scale * bce_logit_grad(ex.label, prob), ctx, params, grads);
      }
    }
    out.loss.base = total * scale;
  }

  if (contrastive_active(pairs, batch.anchors, weights.contrastive)) {
    const auto ids = contrastive_contents(*pairs, batch.anchors);
    const auto features = content_features(ids, ctx, params);
    out.loss.contrastive = contrastive_loss(*pairs, features, batch.anchors);

    std::map<int, Vec> dfeature;
    for (int id : ids) dfeature.emplace(id, Vec(static_cast<std::size_t>(ctx.hp.dim), 0.0));
    const double anchor_scale = weights.contrastive / static_cast<double>(batch.anchors.size());
    for (int a : batch.anchors) {
      const auto& h = features.at(a);
      auto accumulate = [&](const std::vector<std::int64_t>& partners, int label) {
        const double scale = anchor_scale / static_cast<double>(partners.size());
        for (auto p64 : partners) {
          const int p = static_cast<int>(p64);
          const auto& partner = features.at(p);
          const double g = scale * bce_logit_grad(label, sigmoid(dot(h, partner)));
          add_scaled(dfeature[a], partner, g);
          add_scaled(dfeature[p], h, g);
        }
      };
      accumulate(pairs->positives.at(a), 1);
      accumulate(pairs->negatives.at(a), 0);
    }
    for (const auto& [id, g] : dfeature) backprop_feature(id, g, ctx, params, grads);
  }

  out.loss = combine_losses(out.loss.base, out.loss.contrastive, ctx.hp.l2 * params.squared_norm(), weights);

  const double l2_scale = 2.0 * ctx.hp.l2 * weights.l2;
  std::vector<const Matrix*> values;
  params.for_each([&](std::string_view, const Matrix& m) { values.push_back(&m); });
  std::size_t index = 0;
  grads.for_each([&](std::string_view name, Matrix& g) {
    const auto theta = values[index++]->values();
    auto gv = g.values();
    for (std::size_t i = 0; i < gv.size(); ++i) {
      if (l2_scale != 0.0) gv[i] += l2_scale * theta[i];
      if (!std::isfinite(gv[i])) throw NumericError("non-finite gradient in tensor " + std::string(name));
    }
  });
  return out;
}

ParameterSet compute_gradients(const TrainingBatch& batch, const PairSets* pairs, const ModelContext& ctx,
                               const ParameterSet& params, Rng& rng) {
  return loss_and_gradients(batch, pairs, ctx, params, rng, ObjectiveWeights::from_hp(ctx.hp)).gradients;
}

AdamState AdamState::for_params(const ParameterSet& params) {
  AdamState s;
  s.first_moment = params.zeros_like();
  s.second_moment = params.zeros_like();
  return s;
}

void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state, double lr) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);

  std::vector<std::span<const double>> g;
  grads.for_each([&](std::string_view, const Matrix& m) { g.push_back(m.values()); });
  std::vector<std::span<double>> m1;
  state.first_moment.for_each([&](std::string_view, Matrix& m) { m1.push_back(m.values()); });
  std::vector<std::span<double>> m2;
  state.second_moment.for_each([&](std::string_view, Matrix& m) { m2.push_back(m.values()); });

  std::size_t index = 0;
  params.for_each([&](std::string_view name, Matrix& p) {
    if (index >= g.size() || g[index].size() != p.size() || m1[index].size() != p.size()) {
      throw DataError("gradient/optimizer shape mismatch at tensor " + std::string(name));
    }
    auto theta = p.values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g[index][i];
      m1[index][i] = state.beta1 * m1[index][i] + (1.0 - state.beta1) * gi;
      m2[index][i] = state.beta2 * m2[index][i] + (1.0 - state.beta2) * gi * gi;
      const double mhat = m1[index][i] / correction1;
      const double vhat = m2[index][i] / correction2;
      theta[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
    ++index;
  });
}

FitResult fit(const InteractionSet& train, const PairSets* pairs, const ModelContext& ctx, const EpochCallback& on_epoch) {
  const auto& hp = ctx.hp;
  hp.validate();
  const auto& graph = *ctx.graph;
  if (train.num_contents() > graph.num_entities()) throw DataError("interaction contents exceed KG entities");

  std::optional<std::size_t> ext_dim;
  if (ctx.external && ctx.external->size() > 0) ext_dim = ctx.external->dim();
  Rng init_rng = derive_rng(hp.seed, 0);
  FitResult result;
  result.params = init_parameters(hp, std::max(train.num_users(), 1), graph.num_entities(), graph.num_relations(),
                                  ext_dim, init_rng);
  auto& params = result.params;

  Rng rng = derive_rng(hp.seed, 1);
  Rng anchor_rng = derive_rng(hp.seed, 2);
  AdamState adam = AdamState::for_params(params);
  const std::vector<int>& contents = graph.content_ids();
  const auto weights = ObjectiveWeights::from_hp(hp);

  std::vector<int> anchors;
  if (pairs && weights.contrastive != 0.0) {
    for (const auto& [a, list] : pairs->positives) {
      auto neg = pairs->negatives.find(a);
      if (!list.empty() && neg != pairs->negatives.end() && !neg->second.empty()) anchors.push_back(static_cast<int>(a));
    }
  }

  std::vector<int> users;
  for (int u = 0; u < train.num_users(); ++u) {
    if (train.positive_count(u) > 0) users.push_back(u);
  }

  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    shuffle(std::span<int>(users), rng);
    std::vector<Example> examples;
    for (int u : users) {
      for (int c : train.positives(u)) examples.push_back({u, c, 1});
      for (int c : sample_user_negatives(u, train, contents, rng)) examples.push_back({u, c, 0});
    }
    shuffle(std::span<Example>(examples), rng);
    shuffle(std::span<int>(anchors), anchor_rng);

    const auto batch_size = static_cast<std::size_t>(hp.batch_size);
    const std::size_t num_batches = (examples.size() + batch_size - 1) / batch_size;
    EpochReport report;
    report.epoch = epoch;
    for (std::size_t b = 0; b < num_batches; ++b) {
      TrainingBatch batch;
      const auto begin = b * batch_size;
      const auto end = std::min(examples.size(), begin + batch_size);
      batch.examples.assign(examples.begin() + static_cast<std::ptrdiff_t>(begin),
                            examples.begin() + static_cast<std::ptrdiff_t>(end));
      const auto a_begin = b * anchors.size() / num_batches;
      const auto a_end = (b + 1) * anchors.size() / num_batches;
      batch.anchors.assign(anchors.begin() + static_cast<std::ptrdiff_t>(a_begin),
                           anchors.begin() + static_cast<std::ptrdiff_t>(a_end));

      auto step = loss_and_gradients(batch, pairs, ctx, params, rng, weights);
      if (!std::isfinite(step.loss.total)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(b + 1));
      }
      report.loss.base += step.loss.base;
      report.loss.contrastive += step.loss.contrastive;
      adam_step(params, step.gradients, adam, hp.lr);
    }
    if (num_batches > 0) {
      report.loss.base /= static_cast<double>(num_batches);
      report.loss.contrastive /= static_cast<double>(num_batches);
    }
    report.loss = combine_losses(report.loss.base, report.loss.contrastive, hp.l2 * params.squared_norm(), weights);
    if (!std::isfinite(report.loss.total)) {
      throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
    }
    if (on_epoch) on_epoch(params, report);
    result.log.push_back(report);
  }
  return result;
}

void write_training_log(const std::vector<EpochReport>& log, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "epoch\tbase\tcontrastive\tl2\ttotal\tauc\tf1\n";
  auto opt = [](const std::optional<double>& v) { return v ? detail::format_real(*v) : std::string("nan"); };
  for (const auto& r : log) {
    out << r.epoch << '\t' << detail::format_real(r.loss.base) << '\t' << detail::format_real(r.loss.contrastive)
        << '\t' << detail::format_real(r.loss.l2) << '\t' << detail::format_real(r.loss.total) << '\t' << opt(r.auc)
        << '\t' << opt(r.f1) << '\n';
  }
}

std::vector<EpochReport> read_training_log(const std::filesystem::path& path) {
  std::vector<EpochReport> log;
  detail::for_each_record(path, '\t', [&](const auto& f, std::size_t line) {
    if (f.size() != 7) throw DataError(detail::location(path, line) + ": expected 7 columns");
    if (f[0] == "epoch") return;
    EpochReport r;
    r.epoch = static_cast<int>(detail::parse_int(f[0], path, line));
    r.loss = {detail::parse_real(f[1], path, line), detail::parse_real(f[2], path, line),
              detail::parse_real(f[3], path, line), detail::parse_real(f[4], path, line)};
    auto opt = [&](std::string_view s) -> std::optional<double> {
      if (s == "nan") return std::nullopt;
      return detail::parse_real(s, path, line);
    };
    r.auc = opt(f[5]);
    r.f1 = opt(f[6]);
    log.push_back(r);
  });
  return log;
}

}  // namespace kgrec
