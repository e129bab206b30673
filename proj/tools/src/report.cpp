#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>

#include "kgrec/cli/commands.hpp"
#include "kgrec/error.hpp"
#include "kgrec/train.hpp"

namespace kgrec::cli {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) return out;
    start = tab + 1;
  }
}

template <typename T>
T field(const std::string& text, const fs::path& path, std::size_t line) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": bad number '" + text + "'");
  }
  return v;
}

class Table {
 public:
  explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
  void add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }
  bool empty() const { return rows_.empty(); }

  void render(std::ostream& out, const std::string& title) const {
    std::vector<std::size_t> width(header_.size(), 0);
    auto measure = [&](const std::vector<std::string>& row) {
      for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    };
    measure(header_);
    for (const auto& r : rows_) measure(r);
    auto line = [&](const std::vector<std::string>& row) {
      std::string s;
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i > 0) s += "  ";
        s += i == 0 ? fmt::format("{:<{}}", row[i], width[i]) : fmt::format("{:>{}}", row[i], width[i]);
      }
      while (!s.empty() && s.back() == ' ') s.pop_back();
      out << s << '\n';
    };
    std::size_t total = 0;
    for (auto w : width) total += w + 2;
    out << title << '\n';
    line(header_);
    out << std::string(total - 2, '-') << '\n';
    for (const auto& r : rows_) line(r);
    out << '\n';
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string num(std::optional<double> v) {
  if (!v) return "-";
  if (std::isnan(*v)) return "nan";
  return fmt::format("{:.4f}", *v);
}

struct Run {
  std::string label;
  std::vector<MetricRow> rows;
  std::vector<EpochReport> log;

  std::optional<double> get(const std::string& metric, int k = 0, const std::string& stratum = "all") const {
    for (const auto& r : rows) {
      if (r.metric == metric && r.k == k && r.stratum == stratum) return r.value;
    }
    return std::nullopt;
  }
  std::optional<int> k_of(const std::string& metric) const {
    for (const auto& r : rows) {
      if (r.metric == metric) return r.k;
    }
    return std::nullopt;
  }
};

std::string run_label(const fs::path& dir) {
  auto p = dir.lexically_normal();
  if (p.filename().empty()) p = p.parent_path();
  return p.filename().empty() ? p.string() : p.filename().string();
}

}  // namespace

std::vector<MetricRow> read_metrics(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<MetricRow> rows;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (number == 1 || line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 5) throw DataError(path.string() + ":" + std::to_string(number) + ": expected 5 fields");
    rows.push_back({f[0], field<int>(f[1], path, number), f[2], field<double>(f[3], path, number),
                    field<std::size_t>(f[4], path, number)});
  }
  return rows;
}

void cmd_report(const std::vector<fs::path>& dirs, std::ostream& out) {
  std::vector<Run> runs;
  for (const auto& dir : dirs) {
    Run run;
    run.label = run_label(dir);
    const bool has_metrics = fs::is_regular_file(dir / "metrics.tsv");
    const bool has_log = fs::is_regular_file(dir / "train_log.tsv");
    if (!has_metrics && !has_log) throw DataError(dir.string() + " has neither metrics.tsv nor train_log.tsv");
    if (has_metrics) run.rows = read_metrics(dir / "metrics.tsv");
    if (has_log) run.log = read_training_log(dir / "train_log.tsv");
    runs.push_back(std::move(run));
  }

  Table ctr({"run", "AUC", "F1"});
  for (const auto& r : runs) {
    if (r.get("auc")) ctr.add({r.label, num(r.get("auc")), num(r.get("f1"))});
  }
  if (!ctr.empty()) ctr.render(out, "CTR prediction");

  std::set<int> ks;
  for (const auto& r : runs) {
    for (const auto& row : r.rows) {
      if (row.metric == "recall") ks.insert(row.k);
    }
  }
  if (!ks.empty()) {
    std::vector<std::string> header{"run"};
    for (int k : ks) header.push_back("Recall@" + std::to_string(k));
    for (int k : ks) header.push_back("NDCG@" + std::to_string(k));
    Table topk(header);
    for (const auto& r : runs) {
      if (r.rows.empty()) continue;
      std::vector<std::string> row{r.label};
      for (int k : ks) row.push_back(num(r.get("recall", k)));
      for (int k : ks) row.push_back(num(r.get("ndcg", k)));
      topk.add(row);
    }
    topk.render(out, "Top-K recommendation");
  }

  Table div({"run", "Inter", "Intra", "K", "Alignment", "Uniformity"});
  for (const auto& r : runs) {
    const auto k = r.k_of("intra_diversity");
    if (!k) continue;
    div.add({r.label, num(r.get("inter_diversity", *k)), num(r.get("intra_diversity", *k)), std::to_string(*k),
             num(r.get("alignment")), num(r.get("uniformity"))});
  }
  if (!div.empty()) div.render(out, "Diversity and representation quality (lower alignment/uniformity is better)");

  Table cold({"run", "percentile", "users", "NDCG", "Recall", "K"});
  for (const auto& r : runs) {
    for (const auto& row : r.rows) {
      if (row.metric != "cold_ndcg") continue;
      cold.add({r.label, row.stratum, std::to_string(row.users), num(row.value),
                num(r.get("cold_recall", row.k, row.stratum)), std::to_string(row.k)});
    }
  }
  if (!cold.empty()) cold.render(out, "Cold start: users at or below each training-count percentile");

  Table train({"run", "epochs", "base", "contrastive", "l2", "total", "eval AUC", "eval F1"});
  for (const auto& r : runs) {
    if (r.log.empty()) continue;
    const auto& last = r.log.back();
    train.add({r.label, std::to_string(last.epoch), num(last.loss.base), num(last.loss.contrastive),
               num(last.loss.l2), num(last.loss.total), num(last.auc), num(last.f1)});
  }
  if (!train.empty()) train.render(out, "Training (final epoch)");
}

}  // namespace kgrec::cli
