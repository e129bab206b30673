#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "kgrec/checkpoint.hpp"
#include "kgrec/cli/config.hpp"
#include "kgrec/embeddings.hpp"
#include "kgrec/evaluation.hpp"
#include "kgrec/interactions.hpp"
#include "kgrec/knowledge_graph.hpp"

namespace kgrec::cli {

// Artifacts written by prepare, read back by every later command.
struct PreparedData {
  IdMap users;
  IdMap contents;
  IdMap entities;
  IdMap relations;
  DatasetSplit split;
  KnowledgeGraph graph;
};

PreparedData load_prepared(const RunConfig& cfg);

void cmd_prepare(const RunConfig& cfg);
void cmd_sample_pairs(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_evaluate(const RunConfig& cfg);
void cmd_recommend(const RunConfig& cfg);

// One config file per experimental arm (baseline / CL genre / CL
// title+genre, each with and without semantic text). Returns the paths.
std::vector<std::filesystem::path> cmd_matrix(const KeyValues& base, const std::filesystem::path& dir);

// Aligned text tables over the metrics (and training logs) of run dirs.
void cmd_report(const std::vector<std::filesystem::path>& runs, std::ostream& out);

std::vector<MetricRow> read_metrics(const std::filesystem::path& path);

// "recall@10", "cold_ndcg@20[5]", "auc", ...
std::string metric_key(const MetricRow& row);
void write_summary(const std::vector<MetricRow>& rows, const std::filesystem::path& path);

}  // namespace kgrec::cli
