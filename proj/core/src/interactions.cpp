#include "kgrec/interactions.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "kgrec/error.hpp"
#include "text_io.hpp"

namespace kgrec {

IdMap IdMap::from_external(std::vector<std::int64_t> external_ids) {
  std::sort(external_ids.begin(), external_ids.end());
  external_ids.erase(std::unique(external_ids.begin(), external_ids.end()), external_ids.end());
  IdMap map;
  for (auto id : external_ids) map.append(id);
  return map;
}

std::optional<int> IdMap::find(std::int64_t external) const {
  auto it = to_dense_.find(external);
  if (it == to_dense_.end()) return std::nullopt;
  return it->second;
}

int IdMap::dense(std::int64_t external) const {
  auto it = to_dense_.find(external);
  if (it == to_dense_.end()) throw DataError("unknown id " + std::to_string(external));
  return it->second;
}

int IdMap::append(std::int64_t external) {
  auto [it, inserted] = to_dense_.emplace(external, static_cast<int>(to_external_.size()));
  if (!inserted) throw DataError("duplicate id " + std::to_string(external) + " in id map");
  to_external_.push_back(external);
  return it->second;
}

void write_id_map(const IdMap& map, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (std::size_t i = 0; i < map.size(); ++i) out << map.external(static_cast<int>(i)) << '\t' << i << '\n';
}

IdMap read_id_map(const std::filesystem::path& path) {
  std::vector<std::pair<std::int64_t, std::int64_t>> rows;
  detail::for_each_record(path, '\t', [&](const auto& f, std::size_t line) {
    if (f.size() != 2) throw DataError(detail::location(path, line) + ": expected 2 fields");
    rows.emplace_back(detail::parse_int(f[1], path, line), detail::parse_int(f[0], path, line));
  });
  std::sort(rows.begin(), rows.end());
  IdMap map;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != static_cast<std::int64_t>(i)) {
      throw DataError(path.string() + ": dense ids are not contiguous from 0");
    }
    map.append(rows[i].second);
  }
  return map;
}

InteractionSet::InteractionSet(std::vector<Interaction> records, int num_users, int num_contents)
    : records_(std::move(records)),
      user_index_(static_cast<std::size_t>(std::max(num_users, 0))),
      num_users_(num_users),
      num_contents_(num_contents) {
  std::set<std::pair<int, int>> seen;
  for (const auto& r : records_) {
    if (r.user < 0 || r.user >= num_users_ || r.content < 0 || r.content >= num_contents_) {
      throw DataError("interaction (" + std::to_string(r.user) + ", " + std::to_string(r.content) +
                      ") outside declared id range");
    }
    if (r.label != 0 && r.label != 1) throw DataError("label must be 0 or 1");
    if (!seen.emplace(r.user, r.content).second) {
      throw DataError("duplicate interaction (" + std::to_string(r.user) + ", " + std::to_string(r.content) + ")");
    }
    if (r.label == 1) user_index_[static_cast<std::size_t>(r.user)].push_back(r.content);
  }
  for (auto& list : user_index_) std::sort(list.begin(), list.end());
}

bool InteractionSet::is_positive(int user, int content) const {
  auto p = positives(user);
  return std::binary_search(p.begin(), p.end(), content);
}

std::vector<RawInteraction> read_raw_interactions(const std::filesystem::path& path) {
  std::vector<RawInteraction> rows;
  std::set<std::pair<std::int64_t, std::int64_t>> seen;
  detail::for_each_record(path, '\t', [&](const auto& f, std::size_t line) {
    if (f.size() != 3) {
      throw DataError(detail::location(path, line) + ": expected 'user\\tcontent\\trating'");
    }
    RawInteraction r{detail::parse_int(f[0], path, line), detail::parse_int(f[1], path, line),
                     detail::parse_real(f[2], path, line)};
    if (!std::isfinite(r.rating)) throw DataError(detail::location(path, line) + ": non-finite rating");
    if (!seen.emplace(r.user, r.content).second) {
      throw DataError(detail::location(path, line) + ": duplicate interaction (" + std::to_string(r.user) +
                      ", " + std::to_string(r.content) + ")");
    }
    rows.push_back(r);
  });
  return rows;
}

LoadedInteractions binarize(const std::vector<RawInteraction>& raw, std::optional<double> rating_threshold) {
  std::vector<std::int64_t> users;
  std::vector<std::int64_t> contents;
  for (const auto& r : raw) {
    users.push_back(r.user);
    contents.push_back(r.content);
  }
  LoadedInteractions out;
  out.users = IdMap::from_external(std::move(users));
  out.contents = IdMap::from_external(std::move(contents));
  std::vector<Interaction> records;
  for (const auto& r : raw) {
    if (rating_threshold && r.rating < *rating_threshold) continue;
    records.push_back({out.users.dense(r.user), out.contents.dense(r.content), 1});
  }
  out.set = InteractionSet(std::move(records), static_cast<int>(out.users.size()),
                           static_cast<int>(out.contents.size()));
  return out;
}

LoadedInteractions load_interactions(const std::filesystem::path& path, std::optional<double> rating_threshold) {
  return binarize(read_raw_interactions(path), rating_threshold);
}

void write_interactions(const InteractionSet& set, const std::filesystem::path& path) {
  auto out = detail::open_output(path);
  for (const auto& r : set.records()) out << r.user << '\t' << r.content << '\t' << r.label << '\n';
}

InteractionSet read_interactions(const std::filesystem::path& path, int num_users, int num_contents) {
  std::vector<Interaction> records;
  detail::for_each_record(path, '\t', [&](const auto& f, std::size_t line) {
    if (f.size() != 3) throw DataError(detail::location(path, line) + ": expected 'user\\tcontent\\tlabel'");
    records.push_back({static_cast<int>(detail::parse_int(f[0], path, line)),
                       static_cast<int>(detail::parse_int(f[1], path, line)),
                       static_cast<int>(detail::parse_int(f[2], path, line))});
  });
  try {
    return InteractionSet(std::move(records), num_users, num_contents);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void SplitSpec::validate() const {
  for (double f : {train_frac, eval_frac, test_frac}) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("split fractions must lie in (0,1)");
  }
  if (std::abs(train_frac + eval_frac + test_frac - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

DatasetSplit split_dataset(const InteractionSet& interactions, const SplitSpec& spec) {
  spec.validate();
  if (interactions.empty()) throw DataError("cannot split an empty interaction set");
  const auto n = interactions.size();
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_frac * static_cast<double>(n)));
  const auto n_eval = static_cast<std::size_t>(std::llround(spec.eval_frac * static_cast<double>(n)));
  if (n_train == 0 || n_eval == 0 || n_train + n_eval >= n) {
    throw DataError("split fractions leave a partition with zero of " + std::to_string(n) + " records");
  }
  std::vector<Interaction> shuffled = interactions.records();
  Rng rng(spec.seed);
  shuffle(std::span<Interaction>(shuffled), rng);
  auto part = [&](std::size_t begin, std::size_t end) {
    return InteractionSet(std::vector<Interaction>(shuffled.begin() + static_cast<std::ptrdiff_t>(begin),
                                                   shuffled.begin() + static_cast<std::ptrdiff_t>(end)),
                          interactions.num_users(), interactions.num_contents());
  };
  return {part(0, n_train), part(n_train, n_train + n_eval), part(n_train + n_eval, n)};
}

std::vector<int> sample_excluding(std::span<const int> excluded, std::size_t count, std::span<const int> all_contents,
                                  Rng& rng) {
  auto is_excluded = [&](int c) { return std::binary_search(excluded.begin(), excluded.end(), c); };
  std::size_t available = 0;
  for (int c : all_contents) available += is_excluded(c) ? 0 : 1;
  if (available < count) {
    throw DataError("need " + std::to_string(count) + " negatives but only " + std::to_string(available) +
                    " contents are available");
  }
  std::vector<int> result;
  result.reserve(count);
  if (available >= 2 * count) {
    // Sparse case: rejection against exclusions and earlier draws.
    std::set<int> chosen;
    while (result.size() < count) {
      const int c = all_contents[uniform_index(rng, all_contents.size())];
      if (is_excluded(c) || !chosen.insert(c).second) continue;
      result.push_back(c);
    }
  } else {
    std::vector<int> pool;
    pool.reserve(available);
    for (int c : all_contents) {
      if (!is_excluded(c)) pool.push_back(c);
    }
    for (std::size_t i = 0; i < count; ++i) {
      const auto j = i + static_cast<std::size_t>(uniform_index(rng, pool.size() - i));
      std::swap(pool[i], pool[j]);
      result.push_back(pool[i]);
    }
  }
  return result;
}

std::vector<int> sample_user_negatives(int user, const InteractionSet& interactions,
                                       std::span<const int> all_contents, Rng& rng) {
  const auto positives = interactions.positives(user);
  try {
    return sample_excluding(positives, positives.size(), all_contents, rng);
  } catch (const DataError& e) {
    throw DataError("user " + std::to_string(user) + ": " + e.what());
  }
}

}  // namespace kgrec
