#include "kgrec/embeddings.hpp"

#include <cmath>
#include <string>

#include "kgrec/error.hpp"
#include "text_io.hpp"

namespace kgrec {

ExternalEmbeddingTable::ExternalEmbeddingTable(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw DataError("embedding dimension must be positive");
}

std::span<const double> ExternalEmbeddingTable::find(std::int64_t id) const {
  auto it = vectors_.find(id);
  if (it == vectors_.end()) return {};
  return it->second;
}

void ExternalEmbeddingTable::insert(std::int64_t id, Vec values) {
  if (values.size() != dim_) {
    throw DataError("embedding for " + std::to_string(id) + " has " + std::to_string(values.size()) +
                    " components, expected " + std::to_string(dim_));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw DataError("embedding for " + std::to_string(id) + " has a non-finite component");
  }
  if (!vectors_.emplace(id, std::move(values)).second) {
    throw DataError("duplicate embedding for " + std::to_string(id));
  }
}

ExternalEmbeddingTable ExternalEmbeddingTable::remap(const IdMap& map, std::size_t* dropped) const {
  ExternalEmbeddingTable out(dim_);
  std::size_t missing = 0;
  for (const auto& [id, v] : vectors_) {
    if (auto dense = map.find(id)) {
      out.insert(*dense, v);
    } else {
      ++missing;
    }
  }
  if (dropped) *dropped = missing;
  return out;
}

ExternalEmbeddingTable load_embeddings(const std::filesystem::path& path) {
  ExternalEmbeddingTable table;
  bool have_header = false;
  detail::for_each_record(path, ' ', [&](const auto& f, std::size_t line) {
    if (!have_header) {
      if (f.size() != 2 || f[0] != "dim") throw DataError(detail::location(path, line) + ": expected 'dim <D>' header");
      const auto dim = detail::parse_int(f[1], path, line);
      if (dim <= 0) throw DataError(detail::location(path, line) + ": dimension must be positive");
      table = ExternalEmbeddingTable(static_cast<std::size_t>(dim));
      have_header = true;
      return;
    }
    if (f.size() != table.dim() + 1) {
      throw DataError(detail::location(path, line) + ": row has " + std::to_string(f.size() - 1) +
                      " values, header declares " + std::to_string(table.dim()));
    }
    Vec values(table.dim());
    for (std::size_t i = 0; i < values.size(); ++i) {
      values[i] = detail::parse_real(f[i + 1], path, line);
      if (!std::isfinite(values[i])) throw DataError(detail::location(path, line) + ": non-finite component");
    }
    try {
      table.insert(detail::parse_int(f[0], path, line), std::move(values));
    } catch (const DataError& e) {
      throw DataError(detail::location(path, line) + ": " + e.what());
    }
  });
  if (!have_header) throw DataError(path.string() + ": missing 'dim <D>' header");
  return table;
}

void write_embeddings(const ExternalEmbeddingTable& table, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "dim " << table.dim() << '\n';
  for (const auto& [id, v] : table.vectors()) {
    out << id;
    for (double x : v) out << ' ' << detail::format_real(x);
    out << '\n';
  }
}

}  // namespace kgrec
