#include "kgrec/pair_sampler.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include "kgrec/error.hpp"
#include "text_io.hpp"

namespace kgrec {

std::string_view to_string(PairMode mode) { return mode == PairMode::genre ? "genre" : "title+genre"; }
std::string_view to_string(DomainKind kind) { return kind == DomainKind::movie ? "movie" : "book"; }

PairMode parse_pair_mode(std::string_view text) {
  if (text == "genre") return PairMode::genre;
  if (text == "title+genre") return PairMode::title_genre;
  throw ConfigError("unknown pair mode '" + std::string(text) + "' (expected genre or title+genre)");
}

DomainKind parse_domain_kind(std::string_view text) {
  if (text == "movie") return DomainKind::movie;
  if (text == "book") return DomainKind::book;
  throw ConfigError("unknown domain '" + std::string(text) + "' (expected movie or book)");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line, const std::filesystem::path& path,
                                        std::size_t number) {
  std::vector<std::string> fields(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        fields.back() += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        fields.back() += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.emplace_back();
    } else {
      fields.back() += ch;
    }
  }
  if (quoted) throw DataError(detail::location(path, number) + ": unterminated quote");
  return fields;
}

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

std::vector<ContentMetadata> load_metadata_csv(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  std::string line;
  std::size_t number = 0;
  std::vector<ContentMetadata> rows;
  std::map<std::string, std::size_t> column;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line, path, number);
    if (column.empty()) {
      for (std::size_t i = 0; i < fields.size(); ++i) column[trim(fields[i])] = i;
      for (const char* required : {"content_id", "title", "year", "genres"}) {
        if (!column.count(required)) throw DataError(path.string() + ": missing column '" + required + "'");
      }
      continue;
    }
    auto field = [&](const char* name) -> std::string {
      auto it = column.find(name);
      if (it == column.end() || it->second >= fields.size()) return {};
      return trim(fields[it->second]);
    };
    ContentMetadata meta;
    meta.content_id = detail::parse_int(field("content_id"), path, number);
    meta.title = field("title");
    if (auto year = field("year"); !year.empty()) {
      meta.year = static_cast<int>(detail::parse_int(year, path, number));
    }
    std::string genres = field("genres");
    std::size_t start = 0;
    while (start <= genres.size() && !genres.empty()) {
      auto pos = genres.find('|', start);
      auto g = trim(std::string_view(genres).substr(start, pos == std::string::npos ? std::string::npos : pos - start));
      if (!g.empty()) meta.genres.push_back(g);
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    meta.synopsis = field("synopsis");
    rows.push_back(std::move(meta));
  }
  if (column.empty()) throw DataError(path.string() + ": empty metadata file");
  return rows;
}

std::string render_template(const ContentMetadata& meta, PairMode mode, DomainKind domain) {
  const auto id = std::to_string(meta.content_id);
  if (meta.genres.empty()) throw DataError("content " + id + " has no genres");
  std::string genre_sentence = meta.genres.size() == 1 ? "The genre of the " : "The genres of the ";
  genre_sentence += domain == DomainKind::movie ? "film" : "book";
  genre_sentence += meta.genres.size() == 1 ? " is " : " are ";
  for (std::size_t i = 0; i < meta.genres.size(); ++i) {
    if (i) genre_sentence += ", ";
    genre_sentence += meta.genres[i];
  }
  genre_sentence += '.';
  if (mode == PairMode::genre) return genre_sentence;

  if (meta.title.empty()) throw DataError("content " + id + " has no title for title+genre mode");
  std::string out = domain == DomainKind::movie ? "A movie title is " : "A book title is ";
  out += meta.title;
  if (meta.year) out += " (" + std::to_string(*meta.year) + ")";
  out += ". ";
  out += genre_sentence;
  return out;
}

double DotProductProvider::score(std::int64_t anchor, std::int64_t candidate) const {
  auto a = table_->find(anchor);
  auto b = table_->find(candidate);
  if (a.empty() || b.empty()) {
    throw DataError("no sentence embedding for content " + std::to_string(a.empty() ? anchor : candidate));
  }
  return dot(a, b);
}

ScoreTableProvider ScoreTableProvider::load(const std::filesystem::path& path) {
  ScoreTableProvider provider;
  detail::for_each_record(path, '\t', [&](const auto& f, std::size_t line) {
    if (f.size() != 3) throw DataError(detail::location(path, line) + ": expected 'anchor\\tcandidate\\tscore'");
    provider.set(detail::parse_int(f[0], path, line), detail::parse_int(f[1], path, line),
                 detail::parse_real(f[2], path, line));
  });
  return provider;
}

void ScoreTableProvider::set(std::int64_t anchor, std::int64_t candidate, double score) {
  scores_[{anchor, candidate}] = score;
}

double ScoreTableProvider::score(std::int64_t anchor, std::int64_t candidate) const {
  auto it = scores_.find({anchor, candidate});
  if (it == scores_.end()) {
    throw DataError("no score for pair (" + std::to_string(anchor) + ", " + std::to_string(candidate) + ")");
  }
  return it->second;
}

ExternalEmbeddingTable term_vectors(const std::map<std::int64_t, std::string>& sentences) {
  auto tokenize = [](const std::string& s) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : s) {
      if (std::isalnum(static_cast<unsigned char>(ch))) {
        cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
      } else if (!cur.empty()) {
        words.push_back(std::move(cur));
        cur.clear();
      }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
  };
  std::map<std::string, std::size_t> vocab;
  std::map<std::int64_t, std::vector<std::string>> tokens;
  for (const auto& [id, s] : sentences) {
    tokens[id] = tokenize(s);
    for (const auto& w : tokens[id]) vocab.emplace(w, 0);
  }
  std::size_t next = 0;
  for (auto& [w, index] : vocab) index = next++;
  ExternalEmbeddingTable table(std::max<std::size_t>(vocab.size(), 1));
  for (const auto& [id, words] : tokens) {
    Vec v(table.dim(), 0.0);
    for (const auto& w : words) v[vocab[w]] += 1.0;
    const double norm = std::sqrt(dot(v, v));
    if (norm > 0.0) {
      for (double& x : v) x /= norm;
    }
    table.insert(id, std::move(v));
  }
  return table;
}

std::vector<std::int64_t> rank_candidates(std::int64_t anchor, const SimilarityProvider& provider,
                                          std::span<const std::int64_t> universe) {
  if (std::find(universe.begin(), universe.end(), anchor) == universe.end()) {
    throw DataError("anchor " + std::to_string(anchor) + " is not in the universe");
  }
  if (universe.size() < 2) throw DataError("ranking needs at least two contents");
  std::vector<std::pair<double, std::int64_t>> scored;
  scored.reserve(universe.size() - 1);
  for (auto c : universe) {
    if (c == anchor) continue;
    const double s = provider.score(anchor, c);
    if (!std::isfinite(s)) {
      throw NumericError("non-finite similarity for (" + std::to_string(anchor) + ", " + std::to_string(c) + ")");
    }
    scored.emplace_back(s, c);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::int64_t> out;
  out.reserve(scored.size());
  for (const auto& [s, c] : scored) out.push_back(c);
  return out;
}

std::size_t PairSets::total_positive_links() const {
  std::size_t total = 0;
  for (const auto& [anchor, list] : positives) total += list.size();
  return total;
}

void PairSets::validate(std::span<const std::int64_t> universe) const {
  const std::set<std::int64_t> known(universe.begin(), universe.end());
  auto check_list = [&](std::int64_t anchor, const std::vector<std::int64_t>& list, const char* kind) {
    for (auto id : list) {
      if (id == anchor) throw DataError("anchor " + std::to_string(anchor) + " appears in its own " + kind + " list");
      if (!known.count(id)) throw DataError("pair partner " + std::to_string(id) + " is not a known content");
    }
  };
  for (const auto& [anchor, list] : positives) {
    if (!known.count(anchor)) throw DataError("pair anchor " + std::to_string(anchor) + " is not a known content");
    check_list(anchor, list, "positive");
  }
  for (const auto& [anchor, list] : negatives) {
    if (!known.count(anchor)) throw DataError("pair anchor " + std::to_string(anchor) + " is not a known content");
    check_list(anchor, list, "negative");
    auto pos = positives.find(anchor);
    if (pos == positives.end()) continue;
    for (auto id : list) {
      if (std::find(pos->second.begin(), pos->second.end(), id) != pos->second.end()) {
        throw DataError("content " + std::to_string(id) + " is both positive and negative for " +
                        std::to_string(anchor));
      }
    }
  }
}

PairSets PairSets::remap(const IdMap& map) const {
  PairSets out;
  out.mode = mode;
  out.n = n;
  auto translate = [&](const std::map<std::int64_t, std::vector<std::int64_t>>& in,
                       std::map<std::int64_t, std::vector<std::int64_t>>& dst) {
    for (const auto& [anchor, list] : in) {
      auto& mapped = dst[map.dense(anchor)];
      for (auto id : list) mapped.push_back(map.dense(id));
    }
  };
  translate(positives, out.positives);
  translate(negatives, out.negatives);
  return out;
}

PairSets build_pair_sets(std::span<const std::int64_t> universe, const SimilarityProvider& provider, int n,
                         PairMode mode) {
  if (n < 1) throw ConfigError("pair count n must be positive");
  const auto need = 2 * static_cast<std::size_t>(n) + 1;
  if (universe.size() < need) {
    throw DataError("universe of " + std::to_string(universe.size()) + " contents is too small for n=" +
                    std::to_string(n) + " (needs " + std::to_string(need) + ")");
  }
  PairSets pairs;
  pairs.mode = mode;
  pairs.n = n;
  const auto count = static_cast<std::ptrdiff_t>(n);
  for (auto anchor : universe) {
    auto ranked = rank_candidates(anchor, provider, universe);
    pairs.positives[anchor].assign(ranked.begin(), ranked.begin() + count);
    pairs.negatives[anchor].assign(ranked.end() - count, ranked.end());
  }
  return pairs;
}

void write_pairs(const PairSets& pairs, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  out << "# mode=" << to_string(pairs.mode) << " n=" << pairs.n << '\n';
  std::set<std::int64_t> anchors;
  for (const auto& [a, l] : pairs.positives) anchors.insert(a);
  for (const auto& [a, l] : pairs.negatives) anchors.insert(a);
  for (auto a : anchors) {
    if (auto it = pairs.positives.find(a); it != pairs.positives.end()) {
      for (auto p : it->second) out << a << "\tpos\t" << p << '\n';
    }
    if (auto it = pairs.negatives.find(a); it != pairs.negatives.end()) {
      for (auto p : it->second) out << a << "\tneg\t" << p << '\n';
    }
  }
}

PairSets read_pairs(const std::filesystem::path& path) {
  PairSets pairs;
  std::optional<int> declared_n;
  {
    auto in = detail::open_input(path);
    std::string first;
    std::getline(in, first);
    if (first.rfind("# mode=", 0) == 0) {
      auto rest = first.substr(7);
      auto space = rest.find(' ');
      pairs.mode = parse_pair_mode(rest.substr(0, space));
      if (space != std::string::npos && rest.compare(space, 3, " n=") == 0) {
        declared_n = static_cast<int>(detail::parse_int(rest.substr(space + 3), path, 1));
      }
    }
  }
  detail::for_each_record(path, '\t', [&](const auto& f, std::size_t line) {
    if (f.size() != 3) throw DataError(detail::location(path, line) + ": expected 'anchor\\t{pos|neg}\\tpartner'");
    const auto anchor = detail::parse_int(f[0], path, line);
    const auto partner = detail::parse_int(f[2], path, line);
    if (f[1] == "pos") {
      pairs.positives[anchor].push_back(partner);
    } else if (f[1] == "neg") {
      pairs.negatives[anchor].push_back(partner);
    } else {
      throw DataError(detail::location(path, line) + ": pair kind must be 'pos' or 'neg'");
    }
  });
  std::size_t longest = 0;
  for (const auto& [a, l] : pairs.positives) longest = std::max(longest, l.size());
  for (const auto& [a, l] : pairs.negatives) longest = std::max(longest, l.size());
  pairs.n = declared_n.value_or(static_cast<int>(longest));
  return pairs;
}

}  // namespace kgrec
