#include "kgrec/cli/commands.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>

#include "json.hpp"
#include "kgrec/error.hpp"
#include "kgrec/pair_sampler.hpp"
#include "kgrec/train.hpp"

namespace kgrec::cli {

namespace fs = std::filesystem;

namespace {

// Per-epoch validation examples come from their own rng streams.
constexpr std::uint64_t kEpochEvalStream = 0x45504f4300000000ULL;

IdMap read_map(const RunConfig& cfg, const std::string& name) {
  const auto path = cfg.data(name);
  if (!fs::is_regular_file(path)) {
    throw ConfigError("data_dir: " + path.string() + " does not exist (run prepare first)");
  }
  return read_id_map(path);
}

std::optional<PairSets> load_pairs(const fs::path& path, const PreparedData& data, std::optional<PairMode> expected) {
  auto raw = read_pairs(path);
  if (expected && raw.mode != *expected) {
    throw ConfigError("pairs: " + path.string() + " holds " + std::string(to_string(raw.mode)) + " pairs but cl = " +
                      std::string(to_string(*expected)));
  }
  raw.validate(data.contents.externals());
  return raw.remap(data.contents);
}

struct LoadedModel {
  Checkpoint ckpt;
  ExternalEmbeddingTable external;

  ModelContext context(const KnowledgeGraph& graph) const {
    ModelContext ctx;
    ctx.graph = &graph;
    ctx.hp = ckpt.hp;
    ctx.external = ckpt.ext_dim > 0 ? &external : nullptr;
    return ctx;
  }
};

void check_dimension(const char* what, std::uint64_t in_checkpoint, std::size_t in_data) {
  if (in_checkpoint != in_data) {
    throw DataError(std::string("checkpoint was trained with ") + std::to_string(in_checkpoint) + " " + what +
                    " but the prepared data has " + std::to_string(in_data));
  }
}

LoadedModel load_model(const RunConfig& cfg, const PreparedData& data) {
  require_file(cfg.checkpoint_path(), "checkpoint");
  LoadedModel m;
  m.ckpt = load_checkpoint(cfg.checkpoint_path());
  check_dimension("users", m.ckpt.num_users, data.users.size());
  check_dimension("entities", m.ckpt.num_entities, data.entities.size());
  check_dimension("relations", m.ckpt.num_relations, data.relations.size());
  if (m.ckpt.ext_dim > 0) {
    require_file(cfg.data("embeddings.txt"), "embeddings");
    m.external = load_embeddings(cfg.data("embeddings.txt"));
    check_dimension("embedding dimensions", m.ckpt.ext_dim, m.external.dim());
  }
  return m;
}

std::string format_score(double v) { return fmt::format("{}", v); }

}  // namespace

PreparedData load_prepared(const RunConfig& cfg) {
  PreparedData d;
  d.users = read_map(cfg, "users.map");
  d.contents = read_map(cfg, "contents.map");
  d.entities = read_map(cfg, "entities.map");
  d.relations = read_map(cfg, "relations.map");
  const auto users = static_cast<int>(d.users.size());
  const auto contents = static_cast<int>(d.contents.size());
  d.split.train = read_interactions(cfg.data("train.tsv"), users, contents);
  d.split.eval = read_interactions(cfg.data("eval.tsv"), users, contents);
  d.split.test = read_interactions(cfg.data("test.tsv"), users, contents);
  std::vector<int> content_ids(static_cast<std::size_t>(contents));
  std::iota(content_ids.begin(), content_ids.end(), 0);
  d.graph = KnowledgeGraph(read_triples(cfg.data("kg.tsv")), static_cast<int>(d.entities.size()),
                           static_cast<int>(d.relations.size()), std::move(content_ids));
  return d;
}

void cmd_prepare(const RunConfig& cfg) {
  require_file(cfg.interactions, "interactions");
  require_file(cfg.kg, "kg");
  if (!cfg.embeddings.empty()) require_file(cfg.embeddings, "embeddings");

  const auto loaded = load_interactions(cfg.interactions, cfg.rating_threshold);
  const auto aligned = align_graph(read_triples(cfg.kg), loaded.contents);
  const auto split = split_dataset(loaded.set, cfg.split);

  write_interactions(split.train, cfg.data("train.tsv"));
  write_interactions(split.eval, cfg.data("eval.tsv"));
  write_interactions(split.test, cfg.data("test.tsv"));
  write_triples(aligned.graph.triples(), cfg.data("kg.tsv"));
  write_id_map(loaded.users, cfg.data("users.map"));
  write_id_map(loaded.contents, cfg.data("contents.map"));
  write_id_map(aligned.entities, cfg.data("entities.map"));
  write_id_map(aligned.relations, cfg.data("relations.map"));
  spdlog::info("{} users, {} contents, {} positives split {}/{}/{}; KG {} entities, {} relations, {} triples",
               loaded.users.size(), loaded.contents.size(), loaded.set.size(), split.train.size(), split.eval.size(),
               split.test.size(), aligned.entities.size(), aligned.relations.size(), aligned.graph.num_triples());

  if (!cfg.embeddings.empty()) {
    std::size_t dropped = 0;
    const auto table = load_embeddings(cfg.embeddings).remap(loaded.contents, &dropped);
    write_embeddings(table, cfg.data("embeddings.txt"));
    spdlog::info("{} content embeddings of dim {} kept, {} for unknown contents dropped", table.size(), table.dim(),
                 dropped);
  }
}

void cmd_sample_pairs(const RunConfig& cfg) {
  const auto mode = cfg.cl.value_or(PairMode::genre);
  const auto contents = read_map(cfg, "contents.map");

  std::vector<std::int64_t> universe;
  ExternalEmbeddingTable table;
  ScoreTableProvider scores;
  std::unique_ptr<SimilarityProvider> provider;
  if (!cfg.metadata.empty()) {
    require_file(cfg.metadata, "metadata");
    std::map<std::int64_t, std::string> sentences;
    for (const auto& meta : load_metadata_csv(cfg.metadata)) {
      if (!contents.contains(meta.content_id)) continue;
      if (mode == PairMode::title_genre && meta.title.empty()) {
        throw DataError("metadata: content " + std::to_string(meta.content_id) +
                        " has no title, which title+genre pairs need");
      }
      sentences[meta.content_id] = render_template(meta, mode, cfg.domain);
    }
    if (sentences.size() < contents.size()) {
      spdlog::warn("{} of {} contents have no metadata and get no pairs", contents.size() - sentences.size(),
                   contents.size());
    }
    for (const auto& [id, _] : sentences) universe.push_back(id);
    table = term_vectors(sentences);
    provider = std::make_unique<DotProductProvider>(table);
  } else if (!cfg.scores.empty()) {
    require_file(cfg.scores, "scores");
    scores = ScoreTableProvider::load(cfg.scores);
    universe = contents.externals();
    provider = std::make_unique<ScoreTableProvider>(scores);
  } else if (!cfg.embeddings.empty()) {
    require_file(cfg.embeddings, "embeddings");
    table = load_embeddings(cfg.embeddings);
    for (auto id : contents.externals()) {
      if (table.contains(id)) universe.push_back(id);
    }
    provider = std::make_unique<DotProductProvider>(table);
  } else {
    throw ConfigError("sample-pairs needs metadata, scores or embeddings");
  }
  std::sort(universe.begin(), universe.end());

  const auto pairs = build_pair_sets(universe, *provider, cfg.pair_n, mode);
  pairs.validate(universe);
  const auto path = cfg.pairs_path(mode);
  write_pairs(pairs, path);
  std::size_t negatives = 0;
  for (const auto& [_, list] : pairs.negatives) negatives += list.size();
  spdlog::info("{} pairs over {} anchors: {} positive and {} negative c-c links -> {}", to_string(mode),
               pairs.positives.size(), pairs.total_positive_links(), negatives, path.string());
}

void cmd_train(const RunConfig& cfg) {
  const auto data = load_prepared(cfg);

  ExternalEmbeddingTable external;
  if (cfg.semantic_text) {
    require_file(cfg.data("embeddings.txt"), "semantic_text (prepare with embeddings)");
    external = load_embeddings(cfg.data("embeddings.txt"));
  }
  std::optional<PairSets> pairs;
  if (cfg.cl && cfg.hp.gamma < 1.0) {
    const auto path = cfg.pairs_path(cfg.cl);
    require_file(path, "pairs");
    pairs = load_pairs(path, data, cfg.cl);
  }

  ModelContext ctx;
  ctx.graph = &data.graph;
  ctx.hp = cfg.hp;
  ctx.external = cfg.semantic_text ? &external : nullptr;

  const auto& contents = data.graph.content_ids();
  const bool validate = cfg.eval_each_epoch && !data.split.eval.empty();
  const auto on_epoch = [&](const ParameterSet& params, EpochReport& report) {
    if (validate) {
      Rng rng = derive_rng(cfg.hp.seed, kEpochEvalStream + static_cast<std::uint64_t>(report.epoch));
      const std::vector<const InteractionSet*> known{&data.split.train, &data.split.test};
      const auto examples = ctr_examples(data.split.eval, known, contents, rng);
      const auto m = evaluate_ctr(examples, ctx, params, cfg.hp.seed);
      report.auc = m.auc;
      report.f1 = m.f1;
    }
    spdlog::info("epoch {:>3}  loss {:.6f} (base {:.6f}, cl {:.6f}, l2 {:.6f}){}", report.epoch, report.loss.total,
                 report.loss.base, report.loss.contrastive, report.loss.l2,
                 report.auc ? fmt::format("  eval auc {:.4f} f1 {:.4f}", *report.auc, *report.f1) : "");
  };
  const auto result = fit(data.split.train, pairs ? &*pairs : nullptr, ctx, on_epoch);
  if (!result.log.empty() && !std::isfinite(result.log.back().loss.total)) {
    throw NumericError("final loss is not finite at epoch " + std::to_string(result.log.back().epoch));
  }
  save_checkpoint(make_checkpoint(cfg.hp, result.params), cfg.checkpoint_path());
  write_training_log(result.log, cfg.out("train_log.tsv"));
  spdlog::info("checkpoint -> {}", cfg.checkpoint_path().string());
}

void cmd_evaluate(const RunConfig& cfg) {
  const auto data = load_prepared(cfg);
  const auto model = load_model(cfg, data);
  const auto ctx = model.context(data.graph);

  std::optional<PairSets> pairs;
  if (const auto path = cfg.pairs_path(cfg.cl); fs::is_regular_file(path)) {
    pairs = load_pairs(path, data, std::nullopt);
  } else {
    spdlog::warn("no pair file at {}; alignment is not reported", path.string());
  }
  const EvalInputs inputs{&data.split.train, &data.split.eval, &data.split.test, pairs ? &*pairs : nullptr};
  const auto rows = evaluate_model(inputs, ctx, model.ckpt.params, cfg.eval, model.ckpt.hp.seed);
  write_metrics(rows, cfg.out("metrics.tsv"));
  write_summary(rows, cfg.out("summary.json"));
  spdlog::info("{} metric rows -> {}", rows.size(), cfg.out("metrics.tsv").string());
}

void cmd_recommend(const RunConfig& cfg) {
  const auto data = load_prepared(cfg);
  const auto model = load_model(cfg, data);
  const auto ctx = model.context(data.graph);

  std::vector<int> users;
  if (cfg.users.empty()) {
    users.resize(data.users.size());
    std::iota(users.begin(), users.end(), 0);
  } else {
    std::string unknown;
    for (auto u : cfg.users) {
      if (auto dense = data.users.find(u)) {
        users.push_back(*dense);
      } else {
        unknown += (unknown.empty() ? "" : ", ") + std::to_string(u);
      }
    }
    if (!unknown.empty()) throw DataError("unknown users: " + unknown);
  }

  const auto recs = rank_users(users, data.split.train, data.graph.content_ids(), ctx, model.ckpt.params,
                               model.ckpt.hp.seed);
  const auto path = cfg.out("recommendations.tsv");
  fs::create_directories(cfg.output_dir);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  const auto k = static_cast<std::size_t>(cfg.top_k);
  for (int u : users) {
    const auto& items = recs.at(u).items;
    if (items.size() < k) {
      spdlog::warn("user {} has only {} candidates for top_k = {}", data.users.external(u), items.size(), k);
    }
    for (std::size_t r = 0; r < std::min(k, items.size()); ++r) {
      out << data.users.external(u) << '\t' << r + 1 << '\t' << data.contents.external(items[r].content) << '\t'
          << format_score(items[r].score) << '\n';
    }
  }
  if (!out) throw DataError("failed writing " + path.string());
  spdlog::info("top-{} lists for {} users -> {}", k, users.size(), path.string());
}

std::vector<fs::path> cmd_matrix(const KeyValues& base, const fs::path& dir) {
  const auto parsed = parse_config(base);
  struct Arm {
    const char* name;
    const char* cl;
  };
  const Arm arms[] = {{"baseline", "none"}, {"cl_genre", "genre"}, {"cl_title_genre", "title+genre"}};
  const auto joint_gamma = parsed.hp.gamma < 1.0 ? fmt::format("{}", parsed.hp.gamma) : std::string("0.8");
  if (base.count("pairs")) spdlog::warn("matrix: dropping pairs = {}; each arm uses its mode's pair file", base.at("pairs"));

  std::vector<fs::path> written;
  for (const auto& arm : arms) {
    for (bool text : {false, true}) {
      const std::string name = std::string(arm.name) + (text ? "_text" : "_notext");
      KeyValues kv = base;
      kv.erase("pairs");
      kv.erase("checkpoint");
      kv["cl"] = arm.cl;
      kv["gamma"] = std::string(arm.cl) == "none" ? "1" : joint_gamma;
      kv["semantic_text"] = text ? "true" : "false";
      kv["data_dir"] = fs::absolute(parsed.data_dir).lexically_normal().string();
      kv["output_dir"] = fs::absolute(parsed.output_dir / "arms" / name).lexically_normal().string();
      parse_config(kv).validate();
      const auto path = dir / (name + ".cfg");
      write_config_file(kv, path);
      written.push_back(path);
    }
  }
  return written;
}

std::string metric_key(const MetricRow& row) {
  std::string key = row.metric;
  if (row.k > 0) key += "@" + std::to_string(row.k);
  if (row.stratum != "all") key += "[" + row.stratum + "]";
  return key;
}

void write_summary(const std::vector<MetricRow>& rows, const fs::path& path) {
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();
  for (const auto& r : rows) {
    if (std::isfinite(r.value)) {
      summary[metric_key(r)] = r.value;
    } else {
      summary[metric_key(r)] = nullptr;
    }
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << summary.dump(2) << '\n';
}

}  // namespace kgrec::cli
