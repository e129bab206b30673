#include "kgrec/cli/app.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "kgrec/cli/commands.hpp"
#include "kgrec/cli/config.hpp"
#include "kgrec/error.hpp"

namespace kgrec::cli {

namespace {

void setup_logging(bool quiet) {
  auto logger = spdlog::get("kgrec");
  if (!logger) {
    logger = spdlog::stderr_logger_st("kgrec");
    logger->set_pattern("kgrec: %v");
    spdlog::set_default_logger(logger);
  }
  logger->set_level(quiet ? spdlog::level::warn : spdlog::level::info);
}

KeyValues parse_sets(const std::vector<std::string>& sets) {
  KeyValues kv;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  return kv;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Knowledge-graph recommender trained with content contrastive pairs"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file;
  std::string output_dir;
  std::vector<std::string> sets;
  bool quiet = false;
  app.add_option("-c,--config", config_file, "Flat key = value config file");
  app.add_option("--set", sets, "Override one config key, key=value (repeatable)")->expected(1)->take_all();
  app.add_option("-o,--output-dir", output_dir, "Output directory (beats $KGREC_OUTPUT_DIR and the config file)");
  app.add_flag("-q,--quiet", quiet, "Only log warnings and errors");

  auto* prepare = app.add_subcommand("prepare", "Split interactions, align the KG and write id maps");
  auto* sample = app.add_subcommand("sample-pairs", "Build contrastive positive/negative content pairs");
  auto* train = app.add_subcommand("train", "Train and write model.ckpt and train_log.tsv");
  auto* evaluate = app.add_subcommand("evaluate", "Write metrics.tsv and summary.json for a checkpoint");
  auto* recommend = app.add_subcommand("recommend", "Write top-K recommendations per user");
  auto* report = app.add_subcommand("report", "Render metrics of one or more run directories as tables");
  auto* matrix = app.add_subcommand("matrix", "Write one config file per experimental arm");

  std::string users;
  std::string top_k;
  recommend->add_option("--users", users, "Comma separated user ids (default: every user)");
  recommend->add_option("-k,--top-k", top_k, "List length");
  std::vector<std::string> run_dirs;
  std::string report_out;
  report->add_option("runs", run_dirs, "Run directories (default: the output directory)");
  report->add_option("--out", report_out, "Also write the tables to this file");
  std::string matrix_dir;
  matrix->add_option("--out", matrix_dir, "Directory for the arm configs")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  setup_logging(quiet);
  try {
    KeyValues flags = parse_sets(sets);
    if (!output_dir.empty()) flags["output_dir"] = output_dir;
    if (!users.empty()) flags["users"] = users;
    if (!top_k.empty()) flags["top_k"] = top_k;
    const auto kv = layer_config(config_file.empty() ? KeyValues{} : read_config_file(config_file), flags);
    const auto cfg = parse_config(kv);
    cfg.validate();

    if (*prepare) {
      cmd_prepare(cfg);
    } else if (*sample) {
      cmd_sample_pairs(cfg);
    } else if (*train) {
      cmd_train(cfg);
    } else if (*evaluate) {
      cmd_evaluate(cfg);
    } else if (*recommend) {
      cmd_recommend(cfg);
    } else if (*report) {
      std::vector<std::filesystem::path> dirs(run_dirs.begin(), run_dirs.end());
      if (dirs.empty()) dirs.push_back(cfg.output_dir);
      cmd_report(dirs, std::cout);
      if (!report_out.empty()) {
        std::ofstream out(report_out);
        if (!out) throw DataError("cannot write " + report_out);
        cmd_report(dirs, out);
      }
    } else if (*matrix) {
      for (const auto& p : cmd_matrix(kv, matrix_dir)) std::cout << p.string() << '\n';
    }
    return 0;
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return 2;
  } catch (const DataError& e) {
    spdlog::error("data error: {}", e.what());
    return 3;
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("data error: {}", e.what());
    return 3;
  } catch (const NumericError& e) {
    spdlog::error("numeric failure: {}", e.what());
    return 4;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
}

}  // namespace kgrec::cli
