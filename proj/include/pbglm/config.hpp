#pragma once

// Strict INI-style configuration: [sections] of key = value lines. Every key a
// caller does not read is reported as an error by check_consumed().

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pbglm {

class IniSection {
 public:
  IniSection() = default;
  IniSection(std::string name, std::vector<std::pair<std::string, std::string>> entries);

  const std::string& name() const { return name_; }
  bool has(const std::string& key) const;

  std::optional<std::string> get(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated list, entries trimmed, empty entries dropped.
  std::vector<std::string> get_list(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key) const;

  // Throws ConfigError naming every key that was never read.
  void check_consumed() const;

  // Entries in file order, for digests.
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::string name_;
  std::vector<std::pair<std::string, std::string>> entries_;
  mutable std::map<std::string, bool> consumed_;
};

class IniFile {
 public:
  static IniFile load(const std::filesystem::path& path);
  static IniFile parse(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& section) const;
  // Missing sections yield an empty section.
  const IniSection& section(const std::string& name) const;
  std::vector<std::string> section_names() const;

  // Throws ConfigError for sections outside `allowed` (prefix match when an
  // allowed entry ends with '*'), and for unread keys in every section.
  void check_strict(const std::vector<std::string>& allowed) const;

  // Canonical "section.key=value" lines, sorted.
  std::string canonical() const;

  const std::filesystem::path& origin() const { return origin_; }

 private:
  std::filesystem::path origin_;
  std::vector<IniSection> sections_;
  IniSection empty_;
};

std::string trim(const std::string& text);

// Hex SHA-256 of `text`.
std::string sha256_hex(const std::string& text);

}  // namespace pbglm
