#include "kgrec/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>

#include "kgrec/error.hpp"

namespace kgrec::cli {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError(key + ": cannot parse '" + std::string(text) + "' as a number");
  }
  return value;
}

int parse_int(const std::string& key, std::string_view text) { return parse_number<int>(key, text); }

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto item = trim(std::string_view(text).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (!item.empty()) out.push_back(parse_number<T>(key, item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<PairMode> parse_cl(const std::string& text) {
  if (text == "none") return std::nullopt;
  try {
    return parse_pair_mode(text);
  } catch (const std::exception&) {
    throw ConfigError("cl: expected none, genre or title+genre, got '" + text + "'");
  }
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"interactions", [](RunConfig& c, auto&, auto& v) { c.interactions = v; }},
      {"kg", [](RunConfig& c, auto&, auto& v) { c.kg = v; }},
      {"embeddings", [](RunConfig& c, auto&, auto& v) { c.embeddings = v; }},
      {"metadata", [](RunConfig& c, auto&, auto& v) { c.metadata = v; }},
      {"scores", [](RunConfig& c, auto&, auto& v) { c.scores = v; }},
      {"rating_threshold",
       [](RunConfig& c, auto& k, auto& v) {
         if (v.empty() || v == "none") {
           c.rating_threshold.reset();
         } else {
           c.rating_threshold = parse_number<double>(k, v);
         }
       }},
      {"output_dir", [](RunConfig& c, auto&, auto& v) { c.output_dir = v; }},
      {"data_dir", [](RunConfig& c, auto&, auto& v) { c.data_dir = v; }},
      {"pairs", [](RunConfig& c, auto&, auto& v) { c.pairs = v; }},
      {"checkpoint", [](RunConfig& c, auto&, auto& v) { c.checkpoint = v; }},
      {"neighbor_size", [](RunConfig& c, auto& k, auto& v) { c.hp.neighbor_size = parse_int(k, v); }},
      {"layers", [](RunConfig& c, auto& k, auto& v) { c.hp.layers = parse_int(k, v); }},
      {"dim", [](RunConfig& c, auto& k, auto& v) { c.hp.dim = parse_int(k, v); }},
      {"aggregator",
       [](RunConfig& c, auto& k, auto& v) {
         try {
           c.hp.aggregator = parse_aggregator(v);
         } catch (const std::exception&) {
           throw ConfigError(k + ": expected sum or concat, got '" + v + "'");
         }
       }},
      {"gamma", [](RunConfig& c, auto& k, auto& v) { c.hp.gamma = parse_number<double>(k, v); }},
      {"l2", [](RunConfig& c, auto& k, auto& v) { c.hp.l2 = parse_number<double>(k, v); }},
      {"lr", [](RunConfig& c, auto& k, auto& v) { c.hp.lr = parse_number<double>(k, v); }},
      {"batch_size", [](RunConfig& c, auto& k, auto& v) { c.hp.batch_size = parse_int(k, v); }},
      {"epochs", [](RunConfig& c, auto& k, auto& v) { c.hp.epochs = parse_int(k, v); }},
      {"seed",
       [](RunConfig& c, auto& k, auto& v) {
         c.hp.seed = parse_number<std::uint64_t>(k, v);
         c.split.seed = c.hp.seed;
       }},
      {"train_frac", [](RunConfig& c, auto& k, auto& v) { c.split.train_frac = parse_number<double>(k, v); }},
      {"eval_frac", [](RunConfig& c, auto& k, auto& v) { c.split.eval_frac = parse_number<double>(k, v); }},
      {"test_frac", [](RunConfig& c, auto& k, auto& v) { c.split.test_frac = parse_number<double>(k, v); }},
      {"ks", [](RunConfig& c, auto& k, auto& v) { c.eval.ks = parse_list<int>(k, v); }},
      {"diversity_k", [](RunConfig& c, auto& k, auto& v) { c.eval.diversity_k = parse_int(k, v); }},
      {"strata", [](RunConfig& c, auto& k, auto& v) { c.eval.strata.cuts = parse_list<double>(k, v); }},
      {"ctr", [](RunConfig& c, auto& k, auto& v) { c.eval.ctr = parse_bool(k, v); }},
      {"cl", [](RunConfig& c, auto&, auto& v) { c.cl = parse_cl(v); }},
      {"semantic_text", [](RunConfig& c, auto& k, auto& v) { c.semantic_text = parse_bool(k, v); }},
      {"domain",
       [](RunConfig& c, auto& k, auto& v) {
         try {
           c.domain = parse_domain_kind(v);
         } catch (const std::exception&) {
           throw ConfigError(k + ": expected movie or book, got '" + v + "'");
         }
       }},
      {"pair_n", [](RunConfig& c, auto& k, auto& v) { c.pair_n = parse_int(k, v); }},
      {"eval_each_epoch", [](RunConfig& c, auto& k, auto& v) { c.eval_each_epoch = parse_bool(k, v); }},
      {"users", [](RunConfig& c, auto& k, auto& v) { c.users = parse_list<std::int64_t>(k, v); }},
      {"top_k", [](RunConfig& c, auto& k, auto& v) { c.top_k = parse_int(k, v); }},
  };
  return table;
}

}  // namespace

KeyValues read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  KeyValues kv;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": expected key = value");
    }
    kv[trim(std::string_view(text).substr(0, eq))] = trim(std::string_view(text).substr(eq + 1));
  }
  return kv;
}

void write_config_file(const KeyValues& kv, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
}

KeyValues layer_config(const KeyValues& file, const KeyValues& flags) {
  KeyValues kv = file;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) kv["output_dir"] = env;
  for (const auto& [k, v] : flags) kv[k] = v;
  return kv;
}

std::vector<std::string> known_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

RunConfig parse_config(const KeyValues& kv) {
  RunConfig c;
  const auto& table = setters();
  for (const auto& [k, v] : kv) {
    auto it = table.find(k);
    if (it == table.end()) throw ConfigError("unknown config key '" + k + "'");
    it->second(c, k, v);
  }
  if (c.data_dir.empty()) c.data_dir = c.output_dir;
  return c;
}

fs::path RunConfig::pairs_path(std::optional<PairMode> mode) const {
  if (!pairs.empty()) return pairs;
  const auto m = mode.value_or(PairMode::genre);
  return data_dir / (m == PairMode::genre ? "pairs_genre.tsv" : "pairs_title_genre.tsv");
}

fs::path RunConfig::checkpoint_path() const { return checkpoint.empty() ? output_dir / "model.ckpt" : checkpoint; }

void RunConfig::validate() const {
  hp.validate();
  split.validate();
  eval.validate();
  if (!cl && hp.gamma != 1.0) {
    throw ConfigError("cl = none is the baseline and needs gamma = 1 (got " + std::to_string(hp.gamma) + ")");
  }
  if (pair_n < 1) throw ConfigError("pair_n must be positive");
  if (top_k < 1) throw ConfigError("top_k must be positive");
  if (output_dir.empty()) throw ConfigError("output_dir is empty");
}

void require_file(const fs::path& path, const std::string& key) {
  if (path.empty()) throw ConfigError(key + " is not set");
  if (!fs::is_regular_file(path)) throw ConfigError(key + ": " + path.string() + " does not exist");
}

}  // namespace kgrec::cli
