#include "kgrec/knowledge_graph.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "kgrec/error.hpp"
#include "text_io.hpp"

namespace kgrec {

KnowledgeGraph::KnowledgeGraph(std::vector<Triple> triples, int num_entities, int num_relations,
                               std::vector<int> content_ids)
    : triples_(std::move(triples)),
      adjacency_(static_cast<std::size_t>(std::max(num_entities, 0))),
      content_ids_(std::move(content_ids)),
      num_entities_(num_entities),
      num_relations_(num_relations) {
  for (const auto& t : triples_) {
    for (int id : {t.head, t.tail}) {
      if (id < 0 || id >= num_entities_) {
        throw DataError("entity id " + std::to_string(id) + " outside [0, " + std::to_string(num_entities_) + ")");
      }
    }
    if (t.relation < 0 || t.relation >= num_relations_) {
      throw DataError("relation id " + std::to_string(t.relation) + " outside [0, " +
                      std::to_string(num_relations_) + ")");
    }
    adjacency_[static_cast<std::size_t>(t.head)].push_back({t.relation, t.tail});
    adjacency_[static_cast<std::size_t>(t.tail)].push_back({t.relation, t.head});
  }
  std::sort(content_ids_.begin(), content_ids_.end());
  content_ids_.erase(std::unique(content_ids_.begin(), content_ids_.end()), content_ids_.end());
  for (int c : content_ids_) {
    if (c < 0 || c >= num_entities_) throw DataError("content id " + std::to_string(c) + " is not an entity");
    if (adjacency_[static_cast<std::size_t>(c)].empty()) {
      throw DataError("content " + std::to_string(c) + " has no KG neighbors");
    }
  }
}

bool KnowledgeGraph::is_content(int entity) const {
  return std::binary_search(content_ids_.begin(), content_ids_.end(), entity);
}

std::vector<Triple> read_triples(const std::filesystem::path& path) {
  std::vector<Triple> triples;
  detail::for_each_record(path, '\t', [&](const auto& f, std::size_t line) {
    if (f.size() != 3) throw DataError(detail::location(path, line) + ": expected 'head\\trelation\\ttail'");
    triples.push_back({static_cast<int>(detail::parse_int(f[0], path, line)),
                       static_cast<int>(detail::parse_int(f[1], path, line)),
                       static_cast<int>(detail::parse_int(f[2], path, line))});
  });
  return triples;
}

void write_triples(const std::vector<Triple>& triples, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (const auto& t : triples) out << t.head << '\t' << t.relation << '\t' << t.tail << '\n';
}

KnowledgeGraph load_kg(const std::filesystem::path& path, std::optional<int> num_entities) {
  auto triples = read_triples(path);
  if (triples.empty()) throw DataError(path.string() + ": KG file has no triples");
  int max_entity = -1;
  int max_relation = -1;
  std::vector<int> heads;
  for (const auto& t : triples) {
    max_entity = std::max({max_entity, t.head, t.tail});
    max_relation = std::max(max_relation, t.relation);
    heads.push_back(t.head);
  }
  if (num_entities && max_entity >= *num_entities) {
    throw DataError(path.string() + ": entity id " + std::to_string(max_entity) + " >= declared count " +
                    std::to_string(*num_entities));
  }
  try {
    return KnowledgeGraph(std::move(triples), num_entities.value_or(max_entity + 1), max_relation + 1,
                          std::move(heads));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

AlignedGraph align_graph(const std::vector<Triple>& raw_triples, const IdMap& contents) {
  std::set<std::int64_t> others;
  std::vector<std::int64_t> relations;
  for (const auto& t : raw_triples) {
    for (int id : {t.head, t.tail}) {
      if (!contents.contains(id)) others.insert(id);
    }
    relations.push_back(t.relation);
  }
  AlignedGraph out;
  out.entities = contents;
  for (auto id : others) out.entities.append(id);
  out.relations = IdMap::from_external(std::move(relations));

  std::vector<Triple> triples;
  triples.reserve(raw_triples.size());
  for (const auto& t : raw_triples) {
    triples.push_back({out.entities.dense(t.head), out.relations.dense(t.relation), out.entities.dense(t.tail)});
  }
  std::vector<int> content_ids(contents.size());
  for (std::size_t i = 0; i < content_ids.size(); ++i) content_ids[i] = static_cast<int>(i);
  out.graph = KnowledgeGraph(std::move(triples), static_cast<int>(out.entities.size()),
                             static_cast<int>(out.relations.size()), std::move(content_ids));
  return out;
}

std::vector<Neighbor> neighbor_sample(const KnowledgeGraph& graph, int entity, int k, Rng& rng) {
  const auto adj = graph.neighbors(entity);
  if (adj.empty()) throw DataError("entity " + std::to_string(entity) + " has no neighbors to sample");
  if (k < 1) throw ConfigError("neighbor sample size must be positive");
  const auto degree = adj.size();
  const auto want = static_cast<std::size_t>(k);
  std::vector<Neighbor> out;
  out.reserve(want);
  if (degree >= want) {
    std::vector<std::size_t> idx(degree);
    for (std::size_t i = 0; i < degree; ++i) idx[i] = i;
    for (std::size_t i = 0; i < want; ++i) {
      const auto j = i + static_cast<std::size_t>(uniform_index(rng, degree - i));
      std::swap(idx[i], idx[j]);
      out.push_back(adj[idx[i]]);
    }
  } else {
    for (std::size_t i = 0; i < want; ++i) out.push_back(adj[uniform_index(rng, degree)]);
  }
  return out;
}

}  // namespace kgrec
