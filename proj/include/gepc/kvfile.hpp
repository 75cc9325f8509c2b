#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gepc {

/// Line-based `key = value` text with `#` comments and one optional
/// `[section]` level. Used for configs, manifests and parameter files.
class KvFile {
 public:
  struct Entry {
    std::string section;
    int section_index = -1;  // occurrence count of [section] headers, -1 before any
    std::string key;
    std::string value;
    int line = 0;
  };

  static KvFile parse(std::string_view text, std::string source = "<text>");
  static KvFile load(const std::filesystem::path& path);

  const std::vector<Entry>& entries() const { return entries_; }
  const std::string& source() const { return source_; }

  /// Value of a key that must appear at most once in the file.
  std::optional<std::string> get(std::string_view key) const;
  std::string require(std::string_view key) const;
  std::string get_or(std::string_view key, std::string fallback) const;
  int get_int(std::string_view key, int fallback) const;
  double get_double(std::string_view key, double fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  bool has(std::string_view key) const { return get(key).has_value(); }

  /// Sets or appends a top-level key (used for CLI overrides).
  void set(std::string key, std::string value);

  [[noreturn]] void fail(const Entry& e, const std::string& what) const;

 private:
  std::string source_;
  std::vector<Entry> entries_;
};

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
int parse_int(std::string_view s);
double parse_double(std::string_view s);
std::vector<int> parse_int_list(std::string_view s);
std::vector<double> parse_double_list(std::string_view s);
/// %.17g rendering: round-trips every double.
std::string format_double(double v);

}  // namespace gepc
