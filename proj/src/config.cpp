#include "pbglm/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/evp.h>

#include "pbglm/errors.hpp"

namespace pbglm {

namespace {

std::string where(const IniSection& s, const std::string& key) {
  return "[" + s.name() + "] " + key;
}

}  // namespace

std::string trim(const std::string& text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

IniSection::IniSection(std::string name,
                       std::vector<std::pair<std::string, std::string>> entries)
    : name_(std::move(name)), entries_(std::move(entries)) {
  for (const auto& [k, v] : entries_) consumed_[k] = false;
}

bool IniSection::has(const std::string& key) const { return consumed_.count(key) > 0; }

std::optional<std::string> IniSection::get(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) {
      consumed_[k] = true;
      return v;
    }
  }
  return std::nullopt;
}

std::string IniSection::get_string(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

std::string IniSection::require_string(const std::string& key) const {
  auto v = get(key);
  if (!v || v->empty()) throw ConfigError("missing required key " + where(*this, key));
  return *v;
}

double IniSection::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  double out = 0.0;
  const auto* first = v->data();
  const auto* last = v->data() + v->size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError(where(*this, key) + ": expected a number, got '" + *v + "'");
  }
  return out;
}

std::uint64_t IniSection::get_u64(const std::string& key, std::uint64_t fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  const auto* first = v->data();
  const auto* last = v->data() + v->size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError(where(*this, key) + ": expected a non-negative integer, got '" + *v + "'");
  }
  return out;
}

bool IniSection::get_bool(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::string s = *v;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  throw ConfigError(where(*this, key) + ": expected a boolean, got '" + *v + "'");
}

std::vector<std::string> IniSection::get_list(const std::string& key) const {
  std::vector<std::string> out;
  auto v = get(key);
  if (!v) return out;
  std::stringstream ss(*v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> IniSection::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : get_list(key)) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (ec != std::errc() || ptr != item.data() + item.size()) {
      throw ConfigError(where(*this, key) + ": expected numbers, got '" + item + "'");
    }
    out.push_back(value);
  }
  return out;
}

void IniSection::check_consumed() const {
  std::string unknown;
  for (const auto& [k, used] : consumed_) {
    if (!used) unknown += (unknown.empty() ? "" : ", ") + k;
  }
  if (!unknown.empty()) {
    throw ConfigError("unknown key(s) in [" + name_ + "]: " + unknown);
  }
}

IniFile IniFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  IniFile out = parse(buf.str(), path.string());
  out.origin_ = path;
  return out;
}

IniFile IniFile::parse(const std::string& text, const std::string& origin) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(origin + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  IniFile out;
  out.origin_ = origin;
  for (const auto& [name, child] : tree) {
    if (child.empty()) {
      throw ConfigError(origin + ": key '" + name + "' appears outside any section");
    }
    std::vector<std::pair<std::string, std::string>> entries;
    for (const auto& [key, value] : child) {
      if (!value.empty()) {
        throw ConfigError(origin + ": malformed entry '" + key + "' in [" + name + "]");
      }
      entries.emplace_back(trim(key), trim(value.data()));
    }
    out.sections_.emplace_back(name, std::move(entries));
  }
  return out;
}

bool IniFile::has(const std::string& section) const {
  return std::any_of(sections_.begin(), sections_.end(),
                     [&](const IniSection& s) { return s.name() == section; });
}

const IniSection& IniFile::section(const std::string& name) const {
  for (const auto& s : sections_) {
    if (s.name() == name) return s;
  }
  return empty_;
}

std::vector<std::string> IniFile::section_names() const {
  std::vector<std::string> out;
  for (const auto& s : sections_) out.push_back(s.name());
  return out;
}

void IniFile::check_strict(const std::vector<std::string>& allowed) const {
  for (const auto& s : sections_) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const std::string& a) {
      if (!a.empty() && a.back() == '*') return s.name().rfind(a.substr(0, a.size() - 1), 0) == 0;
      return s.name() == a;
    });
    if (!ok) throw ConfigError(origin_.string() + ": unknown section [" + s.name() + "]");
    s.check_consumed();
  }
}

std::string IniFile::canonical() const {
  std::vector<std::string> lines;
  for (const auto& s : sections_) {
    for (const auto& [k, v] : s.entries()) lines.push_back(s.name() + "." + k + "=" + v);
  }
  std::sort(lines.begin(), lines.end());
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

std::string sha256_hex(const std::string& text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw NumericError("SHA-256 digest failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

}  // namespace pbglm
