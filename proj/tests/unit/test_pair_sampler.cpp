#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "kgrec/error.hpp"
#include "kgrec/pair_sampler.hpp"
#include "temp_dir.hpp"

using namespace kgrec;
using kgrec::testing::TempDir;
using ::testing::ElementsAre;

namespace {

ContentMetadata meta(std::int64_t id, std::vector<std::string> genres, std::string title = "",
                     std::optional<int> year = std::nullopt) {
  ContentMetadata m;
  m.content_id = id;
  m.genres = std::move(genres);
  m.title = std::move(title);
  m.year = year;
  return m;
}

// Scores from a fixed table, symmetric by construction.
ScoreTableProvider random_symmetric(std::span<const std::int64_t> ids, std::uint64_t seed) {
  ScoreTableProvider p;
  Rng rng(seed);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      const double s = uniform01(rng);
      p.set(ids[i], ids[j], s);
      p.set(ids[j], ids[i], s);
    }
  }
  return p;
}

}  // namespace

TEST(RenderTemplate, SingleGenreFilm) {
  EXPECT_EQ(render_template(meta(1, {"Action"}), PairMode::genre, DomainKind::movie),
            "The genre of the film is Action.");
}

TEST(RenderTemplate, TitleAndGenres) {
  EXPECT_EQ(render_template(meta(1, {"Action", "Comedy"}, "Heat", 1995), PairMode::title_genre, DomainKind::movie),
            "A movie title is Heat (1995). The genres of the film are Action, Comedy.");
}

TEST(RenderTemplate, SingleGenreBook) {
  EXPECT_EQ(render_template(meta(1, {"Fantasy"}), PairMode::genre, DomainKind::book),
            "The genre of the book is Fantasy.");
}

TEST(RenderTemplate, BookTitleWithoutYear) {
  EXPECT_EQ(render_template(meta(1, {"Fantasy", "Horror"}, "Dune"), PairMode::title_genre, DomainKind::book),
            "A book title is Dune. The genres of the book are Fantasy, Horror.");
}

TEST(RenderTemplate, MissingFieldsAreErrors) {
  EXPECT_THROW(render_template(meta(1, {}), PairMode::genre, DomainKind::movie), DataError);
  EXPECT_THROW(render_template(meta(1, {"Drama"}), PairMode::title_genre, DomainKind::movie), DataError);
}

TEST(Modes, ParseAndPrint) {
  EXPECT_EQ(parse_pair_mode("title+genre"), PairMode::title_genre);
  EXPECT_EQ(to_string(parse_pair_mode("genre")), "genre");
  EXPECT_EQ(parse_domain_kind("book"), DomainKind::book);
  EXPECT_THROW(parse_pair_mode("title"), ConfigError);
  EXPECT_THROW(parse_domain_kind("music"), ConfigError);
}

TEST(LoadMetadataCsv, QuotedFieldsAndGenreLists) {
  TempDir dir;
  const auto p = dir.write("m.csv",
                           "content_id,title,year,genres,synopsis\n"
                           "3,\"Heat, Part \"\"One\"\"\",1995,Action|Crime,\"A heist, then a chase.\"\n"
                           "4,Dune,,Sci-Fi,\n");
  auto rows = load_metadata_csv(p);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].content_id, 3);
  EXPECT_EQ(rows[0].title, "Heat, Part \"One\"");
  EXPECT_EQ(rows[0].year, 1995);
  EXPECT_THAT(rows[0].genres, ElementsAre("Action", "Crime"));
  EXPECT_EQ(rows[0].synopsis, "A heist, then a chase.");
  EXPECT_FALSE(rows[1].year.has_value());
  EXPECT_THAT(rows[1].genres, ElementsAre("Sci-Fi"));
}

TEST(LoadMetadataCsv, MissingColumnIsError) {
  TempDir dir;
  EXPECT_THROW(load_metadata_csv(dir.write("m.csv", "content_id,title\n1,x\n")), DataError);
}

TEST(RankCandidates, OrdersByScore) {
  ScoreTableProvider p;
  p.set(0, 1, 0.9);
  p.set(0, 2, 0.1);
  std::vector<std::int64_t> universe{0, 1, 2};
  EXPECT_THAT(rank_candidates(0, p, universe), ElementsAre(1, 2));
}

TEST(RankCandidates, TiesByAscendingId) {
  ScoreTableProvider p;
  for (int c : {5, 2, 9, 1}) p.set(3, c, 0.5);
  std::vector<std::int64_t> universe{9, 3, 5, 1, 2};
  EXPECT_THAT(rank_candidates(3, p, universe), ElementsAre(1, 2, 5, 9));
}

TEST(RankCandidates, DuplicatedAnchorRanksFirst) {
  ExternalEmbeddingTable t(3);
  t.insert(0, {1, 0, 0});
  t.insert(1, {0, 1, 0});
  t.insert(2, {0, 0, 1});
  t.insert(3, {1, 0, 0});
  std::vector<std::int64_t> universe{0, 1, 2, 3};
  // Dot products with the anchor: 1 -> 0, 2 -> 0, 3 -> 1.
  EXPECT_THAT(rank_candidates(0, DotProductProvider(t), universe), ElementsAre(3, 1, 2));
}

TEST(RankCandidates, NonFiniteScoreIsError) {
  ScoreTableProvider p;
  p.set(0, 1, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::int64_t> universe{0, 1};
  EXPECT_THROW(rank_candidates(0, p, universe), NumericError);
}

TEST(RankCandidates, PermutationOfUniverseMinusAnchor) {
  std::vector<std::int64_t> ids(15);
  std::iota(ids.begin(), ids.end(), 100);
  auto p = random_symmetric(ids, 3);
  for (auto anchor : ids) {
    auto ranked = rank_candidates(anchor, p, ids);
    std::set<std::int64_t> got(ranked.begin(), ranked.end());
    std::set<std::int64_t> want(ids.begin(), ids.end());
    want.erase(anchor);
    EXPECT_EQ(got, want);
    EXPECT_EQ(ranked.size(), want.size());
    for (std::size_t i = 1; i < ranked.size(); ++i) EXPECT_GE(p.score(anchor, ranked[i - 1]), p.score(anchor, ranked[i]));
  }
}

TEST(BuildPairSets, FiveContentsOneEach) {
  std::vector<std::int64_t> ids{0, 1, 2, 3, 4};
  auto p = random_symmetric(ids, 8);
  auto pairs = build_pair_sets(ids, p, 1, PairMode::genre);
  EXPECT_NO_THROW(pairs.validate(ids));
  for (auto a : ids) {
    auto ranked = rank_candidates(a, p, ids);
    EXPECT_THAT(pairs.positives.at(a), ElementsAre(ranked.front()));
    EXPECT_THAT(pairs.negatives.at(a), ElementsAre(ranked.back()));
  }
  EXPECT_EQ(pairs.total_positive_links(), 5u);
}

TEST(BuildPairSets, IdenticalMetadataArePositives) {
  std::map<std::int64_t, std::string> sentences;
  const char* genres[] = {"Drama", "Comedy", "Horror", "Western", "Musical", "War", "Noir"};
  for (int c = 0; c < 7; ++c) {
    sentences[c] = render_template(meta(c, {genres[c]}, "T", 2000), PairMode::genre, DomainKind::movie);
  }
  sentences[7] = sentences[4];
  std::vector<std::int64_t> ids{0, 1, 2, 3, 4, 5, 6, 7};
  auto table = term_vectors(sentences);
  auto pairs = build_pair_sets(ids, DotProductProvider(table), 2, PairMode::genre);
  EXPECT_EQ(pairs.positives.at(4).front(), 7);
  EXPECT_EQ(pairs.positives.at(7).front(), 4);
}

TEST(BuildPairSets, MaximalNCoversEveryOtherContent) {
  std::vector<std::int64_t> ids{0, 1, 2, 3, 4, 5, 6};
  auto p = random_symmetric(ids, 5);
  auto pairs = build_pair_sets(ids, p, 3, PairMode::genre);
  for (auto a : ids) {
    std::set<std::int64_t> cover(pairs.positives.at(a).begin(), pairs.positives.at(a).end());
    cover.insert(pairs.negatives.at(a).begin(), pairs.negatives.at(a).end());
    EXPECT_EQ(cover.size(), 6u);
    EXPECT_FALSE(cover.count(a));
  }
  EXPECT_EQ(pairs.total_positive_links(), ids.size() * 3);
}

TEST(BuildPairSets, UniverseTooSmall) {
  std::vector<std::int64_t> ids{0, 1, 2, 3};
  auto p = random_symmetric(ids, 1);
  EXPECT_THROW(build_pair_sets(ids, p, 2, PairMode::genre), DataError);
}

TEST(PairSets, ValidateCatchesViolations) {
  std::vector<std::int64_t> ids{0, 1, 2};
  PairSets ok{PairMode::genre, 1, {{0, {1}}}, {{0, {2}}}};
  EXPECT_NO_THROW(ok.validate(ids));
  PairSets self{PairMode::genre, 1, {{0, {0}}}, {{0, {2}}}};
  EXPECT_THROW(self.validate(ids), DataError);
  PairSets overlap{PairMode::genre, 1, {{0, {1}}}, {{0, {1}}}};
  EXPECT_THROW(overlap.validate(ids), DataError);
  PairSets unknown{PairMode::genre, 1, {{0, {1}}}, {{0, {7}}}};
  EXPECT_THROW(unknown.validate(ids), DataError);
}

TEST(PairSets, FileRoundTrip) {
  TempDir dir;
  std::vector<std::int64_t> ids{10, 11, 12, 13, 14, 15, 16};
  auto pairs = build_pair_sets(ids, random_symmetric(ids, 2), 2, PairMode::title_genre);
  write_pairs(pairs, dir / "pairs.tsv");
  EXPECT_EQ(read_pairs(dir / "pairs.tsv"), pairs);
}

TEST(PairSets, HeaderlessFileInfersN) {
  TempDir dir;
  auto pairs = read_pairs(dir.write("p.tsv", "0\tpos\t1\n0\tneg\t2\n1\tpos\t0\n1\tneg\t2\n"));
  EXPECT_EQ(pairs.n, 1);
  EXPECT_EQ(pairs.mode, PairMode::genre);
  EXPECT_THAT(pairs.negatives.at(1), ElementsAre(2));
}

TEST(PairSets, FiveContentsGiveTenLines) {
  TempDir dir;
  std::vector<std::int64_t> ids{0, 1, 2, 3, 4};
  write_pairs(build_pair_sets(ids, random_symmetric(ids, 6), 1, PairMode::genre), dir / "p.tsv");
  const auto text = kgrec::testing::slurp(dir / "p.tsv");
  std::size_t lines = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (text[start] != '#') ++lines;
    start = end + 1;
  }
  EXPECT_EQ(lines, 10u);
}

TEST(PairSets, RemapToDenseIds) {
  PairSets pairs{PairMode::genre, 1, {{100, {300}}}, {{100, {200}}}};
  auto map = IdMap::from_external({100, 200, 300});
  auto dense = pairs.remap(map);
  EXPECT_THAT(dense.positives.at(0), ElementsAre(2));
  EXPECT_THAT(dense.negatives.at(0), ElementsAre(1));
  EXPECT_THROW(pairs.remap(IdMap::from_external({100, 200})), DataError);
}

TEST(TermVectors, UnitNormAndCaseInsensitive) {
  auto t = term_vectors({{1, "The genre of the film is Drama."}, {2, "the GENRE of the film is drama"}});
  const auto a = t.find(1), b = t.find(2);
  EXPECT_NEAR(dot(a, a), 1.0, 1e-12);
  EXPECT_NEAR(dot(a, b), 1.0, 1e-12);
}

TEST(ScoreTableProvider, LoadAndMissingPair) {
  TempDir dir;
  auto p = ScoreTableProvider::load(dir.write("s.tsv", "1\t2\t0.25\n2\t1\t-3\n"));
  EXPECT_EQ(p.score(1, 2), 0.25);
  EXPECT_EQ(p.score(2, 1), -3.0);
  EXPECT_THROW(p.score(1, 3), DataError);
}
