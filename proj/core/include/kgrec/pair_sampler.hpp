#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgrec/embeddings.hpp"
#include "kgrec/interactions.hpp"

namespace kgrec {

enum class PairMode { genre, title_genre };
enum class DomainKind { movie, book };

std::string_view to_string(PairMode mode);
std::string_view to_string(DomainKind kind);
PairMode parse_pair_mode(std::string_view text);      // "genre" | "title+genre"
DomainKind parse_domain_kind(std::string_view text);  // "movie" | "book"

struct ContentMetadata {
  std::int64_t content_id = 0;
  std::string title;
  std::optional<int> year;
  std::vector<std::string> genres;
  std::string synopsis;
};

// CSV with header `content_id,title,year,genres,synopsis`; genres are
// '|'-separated, fields may be double-quoted.
std::vector<ContentMetadata> load_metadata_csv(const std::filesystem::path& path);

// Verbalizes metadata:
//   genre:        "The genre(s) of the (film|book) is/are <g1, g2>."
//   title+genre:  "A (movie|book) title is <title> (<year>). " + genre sentence
std::string render_template(const ContentMetadata& meta, PairMode mode, DomainKind domain);

class SimilarityProvider {
 public:
  virtual ~SimilarityProvider() = default;
  virtual double score(std::int64_t anchor, std::int64_t candidate) const = 0;
};

// Inner product of two rows of an embedding table.
class DotProductProvider final : public SimilarityProvider {
 public:
  explicit DotProductProvider(const ExternalEmbeddingTable& table) : table_(&table) {}
  double score(std::int64_t anchor, std::int64_t candidate) const override;

 private:
  const ExternalEmbeddingTable* table_;
};

// Precomputed `anchor \t candidate \t score` matrix.
class ScoreTableProvider final : public SimilarityProvider {
 public:
  ScoreTableProvider() = default;
  static ScoreTableProvider load(const std::filesystem::path& path);
  void set(std::int64_t anchor, std::int64_t candidate, double score);
  double score(std::int64_t anchor, std::int64_t candidate) const override;

 private:
  std::map<std::pair<std::int64_t, std::int64_t>, double> scores_;
};

// L2-normalized term-count vectors over the lowercase word vocabulary of
// the sentences; a local stand-in for a sentence encoder.
ExternalEmbeddingTable term_vectors(const std::map<std::int64_t, std::string>& sentences);

// Universe minus anchor, by descending score, ties by ascending id.
std::vector<std::int64_t> rank_candidates(std::int64_t anchor, const SimilarityProvider& provider,
                                          std::span<const std::int64_t> universe);

struct PairSets {
  PairMode mode = PairMode::genre;
  int n = 0;
  std::map<std::int64_t, std::vector<std::int64_t>> positives;
  std::map<std::int64_t, std::vector<std::int64_t>> negatives;

  std::size_t total_positive_links() const;
  // Anchor absent from its own lists, lists disjoint, ids in universe.
  void validate(std::span<const std::int64_t> universe) const;
  PairSets remap(const IdMap& map) const;  // throws DataError on unknown ids

  bool operator==(const PairSets&) const = default;
};

PairSets build_pair_sets(std::span<const std::int64_t> universe, const SimilarityProvider& provider, int n,
                         PairMode mode);

// `anchor \t pos|neg \t partner`, preceded by a `# mode=<m> n=<n>` comment.
void write_pairs(const PairSets& pairs, const std::filesystem::path& path);
PairSets read_pairs(const std::filesystem::path& path);

}  // namespace kgrec
