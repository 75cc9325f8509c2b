#include "gepc/kvfile.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "gepc/error.hpp"

namespace gepc {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

int parse_int(std::string_view s) {
  const std::string t = trim(s);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw Error(ErrorCode::kConfig, "not an integer: '" + t + "'");
  }
  return v;
}

double parse_double(std::string_view s) {
  const std::string t = trim(s);
  if (t.empty()) throw Error(ErrorCode::kConfig, "empty number");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE) {
    throw Error(ErrorCode::kConfig, "not a number: '" + t + "'");
  }
  return v;
}

std::vector<int> parse_int_list(std::string_view s) {
  std::vector<int> out;
  for (const auto& tok : split(s, ',')) {
    if (!tok.empty()) out.push_back(parse_int(tok));
  }
  return out;
}

std::vector<double> parse_double_list(std::string_view s) {
  std::vector<double> out;
  for (const auto& tok : split(s, ',')) {
    if (!tok.empty()) out.push_back(parse_double(tok));
  }
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

KvFile KvFile::parse(std::string_view text, std::string source) {
  KvFile kv;
  kv.source_ = std::move(source);
  std::string section;
  int section_index = -1;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw Error(ErrorCode::kConfig,
                    kv.source_ + ":" + std::to_string(line_no) + ": malformed section header");
      }
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      ++section_index;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfig,
                  kv.source_ + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    Entry e;
    e.section = section;
    e.section_index = section_index;
    e.key = trim(std::string_view(line).substr(0, eq));
    e.value = trim(std::string_view(line).substr(eq + 1));
    e.line = line_no;
    if (e.key.empty()) {
      throw Error(ErrorCode::kConfig, kv.source_ + ":" + std::to_string(line_no) + ": empty key");
    }
    kv.entries_.push_back(std::move(e));
  }
  return kv;
}

KvFile KvFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::optional<std::string> KvFile::get(std::string_view key) const {
  const Entry* found = nullptr;
  for (const auto& e : entries_) {
    if (e.key != key) continue;
    if (found) fail(e, "duplicate key '" + e.key + "' (first on line " + std::to_string(found->line) + ")");
    found = &e;
  }
  if (!found) return std::nullopt;
  return found->value;
}

std::string KvFile::require(std::string_view key) const {
  auto v = get(key);
  if (!v) throw Error(ErrorCode::kConfig, source_ + ": missing key '" + std::string(key) + "'");
  return *v;
}

std::string KvFile::get_or(std::string_view key, std::string fallback) const {
  auto v = get(key);
  return v ? *v : std::move(fallback);
}

int KvFile::get_int(std::string_view key, int fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    return parse_int(*v);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, source_ + ": " + std::string(key) + ": " + e.what());
  }
}

double KvFile::get_double(std::string_view key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  try {
    return parse_double(*v);
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, source_ + ": " + std::string(key) + ": " + e.what());
  }
}

bool KvFile::get_bool(std::string_view key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw Error(ErrorCode::kConfig, source_ + ": " + std::string(key) + ": not a boolean");
}

void KvFile::set(std::string key, std::string value) {
  for (auto& e : entries_) {
    if (e.key == key) {
      e.value = std::move(value);
      return;
    }
  }
  entries_.push_back(Entry{"", -1, std::move(key), std::move(value), 0});
}

void KvFile::fail(const Entry& e, const std::string& what) const {
  throw Error(ErrorCode::kConfig, source_ + ":" + std::to_string(e.line) + ": " + what);
}

}  // namespace gepc
