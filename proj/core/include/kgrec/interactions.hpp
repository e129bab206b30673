#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "kgrec/random.hpp"

namespace kgrec {

// Bijection between external integer ids and dense ids 0..size()-1.
class IdMap {
 public:
  IdMap() = default;
  // Dense ids follow ascending external id order.
  static IdMap from_external(std::vector<std::int64_t> external_ids);

  std::size_t size() const { return to_external_.size(); }
  bool contains(std::int64_t external) const { return to_dense_.count(external) != 0; }
  std::optional<int> find(std::int64_t external) const;
  int dense(std::int64_t external) const;  // throws DataError when absent
  std::int64_t external(int dense) const { return to_external_.at(static_cast<std::size_t>(dense)); }
  const std::vector<std::int64_t>& externals() const { return to_external_; }

  // Appends an id at the end of the dense range; returns its dense id.
  int append(std::int64_t external);

  bool operator==(const IdMap& other) const { return to_external_ == other.to_external_; }

 private:
  std::vector<std::int64_t> to_external_;
  std::map<std::int64_t, int> to_dense_;
};

// `external_id \t dense_id` lines, ordered by dense id.
void write_id_map(const IdMap& map, const std::filesystem::path& path);
IdMap read_id_map(const std::filesystem::path& path);

struct Interaction {
  int user = 0;
  int content = 0;
  int label = 1;

  bool operator==(const Interaction&) const = default;
};

// Binarized user-content preferences. user_index[u] lists the label-1
// contents of user u in ascending order.
class InteractionSet {
 public:
  InteractionSet() = default;
  // Throws DataError on duplicate (user, content) pairs, labels outside
  // {0,1} or ids outside the declared ranges.
  InteractionSet(std::vector<Interaction> records, int num_users, int num_contents);

  const std::vector<Interaction>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  int num_users() const { return num_users_; }
  int num_contents() const { return num_contents_; }

  std::span<const int> positives(int user) const { return user_index_.at(static_cast<std::size_t>(user)); }
  bool is_positive(int user, int content) const;
  // Number of label-1 records of the user; this is S^u for negative sampling.
  std::size_t positive_count(int user) const { return positives(user).size(); }

 private:
  std::vector<Interaction> records_;
  std::vector<std::vector<int>> user_index_;
  int num_users_ = 0;
  int num_contents_ = 0;
};

struct RawInteraction {
  std::int64_t user = 0;
  std::int64_t content = 0;
  double rating = 0.0;
};

// Parses `user \t content \t rating` lines; `#` starts a comment line.
std::vector<RawInteraction> read_raw_interactions(const std::filesystem::path& path);

struct LoadedInteractions {
  InteractionSet set;
  IdMap users;
  IdMap contents;
};

// With a threshold, rows rated below it are dropped (they stay candidates
// for sampled negatives); without one every listed row is a positive.
// User and content ids are re-indexed densely in ascending external order.
LoadedInteractions load_interactions(const std::filesystem::path& path,
                                     std::optional<double> rating_threshold = std::nullopt);
LoadedInteractions binarize(const std::vector<RawInteraction>& raw,
                            std::optional<double> rating_threshold);

// Dense-id TSV `user \t content \t label`, the format of prepared splits.
void write_interactions(const InteractionSet& set, const std::filesystem::path& path);
InteractionSet read_interactions(const std::filesystem::path& path, int num_users, int num_contents);

struct SplitSpec {
  double train_frac = 0.6;
  double eval_frac = 0.2;
  double test_frac = 0.2;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
};

struct DatasetSplit {
  InteractionSet train;
  InteractionSet eval;
  InteractionSet test;
};

DatasetSplit split_dataset(const InteractionSet& interactions, const SplitSpec& spec);

// Draws count contents uniformly without replacement from all_contents
// minus the sorted exclusion list. Throws DataError when too few remain.
std::vector<int> sample_excluding(std::span<const int> excluded, std::size_t count, std::span<const int> all_contents,
                                  Rng& rng);

// Draws exactly positive_count(user) contents, uniformly without
// replacement, from all_contents minus the user's positives.
std::vector<int> sample_user_negatives(int user, const InteractionSet& interactions,
                                       std::span<const int> all_contents, Rng& rng);

}  // namespace kgrec
