#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "kgrec/error.hpp"

namespace kgrec::detail {

inline std::string location(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

// Calls fn(fields, line_number) for every non-empty, non-comment line.
inline void for_each_record(const std::filesystem::path& path, char sep,
                            const std::function<void(const std::vector<std::string_view>&, std::size_t)>& fn) {
  auto in = open_input(path);
  std::string line;
  std::vector<std::string_view> fields;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    fields.clear();
    std::string_view rest(line);
    if (sep == ' ') {
      std::size_t i = 0;
      while (i < rest.size()) {
        while (i < rest.size() && (rest[i] == ' ' || rest[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < rest.size() && rest[j] != ' ' && rest[j] != '\t') ++j;
        if (j > i) fields.push_back(rest.substr(i, j - i));
        i = j;
      }
      if (fields.empty()) continue;
    } else {
      std::size_t start = 0;
      while (true) {
        const auto pos = rest.find(sep, start);
        fields.push_back(rest.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
      }
    }
    fn(fields, number);
  }
}

inline std::int64_t parse_int(std::string_view text, const std::filesystem::path& path, std::size_t line) {
  std::int64_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError(location(path, line) + ": expected integer, got '" + std::string(text) + "'");
  }
  return value;
}

inline double parse_real(std::string_view text, const std::filesystem::path& path, std::size_t line) {
  double value = 0.0;
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError(location(path, line) + ": expected number, got '" + std::string(text) + "'");
  }
  return value;
}

// Shortest representation that parses back to the same double.
inline std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace kgrec::detail
