#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "kgrec/interactions.hpp"
#include "kgrec/matrix.hpp"

namespace kgrec {

// Pretrained content vectors (synopsis encodings, metadata-sentence
// encodings). Contents without a vector are simply absent.
class ExternalEmbeddingTable {
 public:
  ExternalEmbeddingTable() = default;
  explicit ExternalEmbeddingTable(std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }
  bool contains(std::int64_t id) const { return vectors_.count(id) != 0; }
  // Empty span when absent.
  std::span<const double> find(std::int64_t id) const;
  const std::map<std::int64_t, Vec>& vectors() const { return vectors_; }

  // Throws DataError on length mismatch or non-finite components.
  void insert(std::int64_t id, Vec values);

  // Keys translated through map; ids the map does not know are dropped
  // and counted.
  ExternalEmbeddingTable remap(const IdMap& map, std::size_t* dropped = nullptr) const;

  bool operator==(const ExternalEmbeddingTable&) const = default;

 private:
  std::size_t dim_ = 0;
  std::map<std::int64_t, Vec> vectors_;
};

// Line 1 `dim <D>`, then `id v1 ... vD` space separated.
ExternalEmbeddingTable load_embeddings(const std::filesystem::path& path);
void write_embeddings(const ExternalEmbeddingTable& table, const std::filesystem::path& path);

}  // namespace kgrec
