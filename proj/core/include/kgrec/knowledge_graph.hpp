#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "kgrec/interactions.hpp"
#include "kgrec/random.hpp"

namespace kgrec {

struct Triple {
  int head = 0;
  int relation = 0;
  int tail = 0;

  bool operator==(const Triple&) const = default;
};

struct Neighbor {
  int relation = 0;
  int entity = 0;

  bool operator==(const Neighbor&) const = default;
};

// Undirected view of the KG: each triple (h, r, t) contributes (r, t) to
// adjacency[h] and (r, h) to adjacency[t].
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  // content_ids must each have at least one incident triple.
  KnowledgeGraph(std::vector<Triple> triples, int num_entities, int num_relations, std::vector<int> content_ids);

  int num_entities() const { return num_entities_; }
  int num_relations() const { return num_relations_; }
  std::size_t num_triples() const { return triples_.size(); }
  const std::vector<Triple>& triples() const { return triples_; }

  std::span<const Neighbor> neighbors(int entity) const { return adjacency_.at(static_cast<std::size_t>(entity)); }
  std::size_t degree(int entity) const { return neighbors(entity).size(); }

  // Sorted ascending.
  const std::vector<int>& content_ids() const { return content_ids_; }
  bool is_content(int entity) const;

 private:
  std::vector<Triple> triples_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::vector<int> content_ids_;
  int num_entities_ = 0;
  int num_relations_ = 0;
};

std::vector<Triple> read_triples(const std::filesystem::path& path);
void write_triples(const std::vector<Triple>& triples, const std::filesystem::path& path);

// Loads a dense-id KG. num_entities defaults to max id + 1; when declared,
// any id at or above it is rejected. Heads are taken as the content set.
KnowledgeGraph load_kg(const std::filesystem::path& path, std::optional<int> num_entities = std::nullopt);

// Result of aligning raw KG ids with the content id map of an interaction
// file: contents keep their dense ids 0..C-1, remaining entities follow in
// ascending external order, relations are re-indexed the same way.
struct AlignedGraph {
  KnowledgeGraph graph;
  IdMap entities;
  IdMap relations;
};

AlignedGraph align_graph(const std::vector<Triple>& raw_triples, const IdMap& contents);

// Exactly k neighbors: without replacement when degree >= k, otherwise
// uniformly with replacement. Throws DataError for isolated entities.
std::vector<Neighbor> neighbor_sample(const KnowledgeGraph& graph, int entity, int k, Rng& rng);

}  // namespace kgrec
