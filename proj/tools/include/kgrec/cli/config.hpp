#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kgrec/evaluation.hpp"
#include "kgrec/interactions.hpp"
#include "kgrec/kgcn.hpp"
#include "kgrec/pair_sampler.hpp"

namespace kgrec::cli {

using KeyValues = std::map<std::string, std::string>;

inline constexpr const char* kOutputDirEnv = "KGREC_OUTPUT_DIR";

// `key = value` lines, `#` comments. Throws ConfigError naming the line.
KeyValues read_config_file(const std::filesystem::path& path);
void write_config_file(const KeyValues& kv, const std::filesystem::path& path);

// Later layers win: file, then the environment override, then flags.
KeyValues layer_config(const KeyValues& file, const KeyValues& flags);

struct RunConfig {
  // Raw inputs (prepare / sample-pairs).
  std::filesystem::path interactions;
  std::filesystem::path kg;
  std::filesystem::path embeddings;
  std::filesystem::path metadata;
  std::filesystem::path scores;
  std::optional<double> rating_threshold;

  std::filesystem::path output_dir = "kgrec_out";
  std::filesystem::path data_dir;    // prepared artifacts; defaults to output_dir
  std::filesystem::path pairs;       // defaults to data_dir/pairs_<mode>.tsv
  std::filesystem::path checkpoint;  // defaults to output_dir/model.ckpt

  HyperParams hp;
  SplitSpec split;
  EvalSpec eval;
  std::optional<PairMode> cl = PairMode::genre;  // nullopt: baseline without pairs
  bool semantic_text = false;
  DomainKind domain = DomainKind::movie;
  int pair_n = 5;
  bool eval_each_epoch = true;

  std::vector<std::int64_t> users;  // recommend; empty means every user
  int top_k = 10;

  std::filesystem::path data(const std::string& name) const { return data_dir / name; }
  std::filesystem::path out(const std::string& name) const { return output_dir / name; }
  std::filesystem::path pairs_path(std::optional<PairMode> mode) const;
  std::filesystem::path checkpoint_path() const;

  // Field-level invariants only; commands check the paths they read.
  void validate() const;
};

// Throws ConfigError on unknown keys or malformed values.
RunConfig parse_config(const KeyValues& kv);

std::vector<std::string> known_keys();

// Throws ConfigError naming key and path when the file is missing.
void require_file(const std::filesystem::path& path, const std::string& key);

}  // namespace kgrec::cli
