#include "pbglm/feature_spec.hpp"

#include <fstream>

#include "pbglm/config.hpp"
#include "pbglm/csv.hpp"
#include "pbglm/errors.hpp"

namespace pbglm {

namespace {

std::vector<std::string> normalized(const std::vector<std::string>& values) {
  std::vector<std::string> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(normalize_name(v));
  return out;
}

std::map<std::string, std::map<std::string, std::string>> load_county_table(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open county table " + path.string());
  CsvReader reader(in);
  std::vector<std::string> header;
  if (!reader.next(header)) throw FormatError("county table " + path.string() + " is empty");
  for (auto& h : header) h = trim(h);
  if (header.empty() || header[0] != "county") {
    throw FormatError("county table " + path.string() + " must start with a 'county' column");
  }
  std::map<std::string, std::map<std::string, std::string>> table;
  std::vector<std::string> row;
  while (reader.next(row)) {
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != header.size()) {
      throw FormatError("county table line " + std::to_string(reader.line()) + ": expected " +
                        std::to_string(header.size()) + " fields");
    }
    auto& entry = table[normalize_name(row[0])];
    for (std::size_t i = 1; i < header.size(); ++i) entry[header[i]] = trim(row[i]);
  }
  return table;
}

}  // namespace

std::vector<std::string> FeatureSpec::names() const {
  std::vector<std::string> out;
  for (const auto& f : features) out.push_back(f.name);
  return out;
}

FeatureSpec load_feature_spec(const std::filesystem::path& path) {
  const IniFile ini = IniFile::load(path);
  FeatureSpec spec;

  const auto order = ini.section("features").get_list("order");
  if (order.empty()) throw ConfigError(path.string() + ": [features] order must list features");
  for (const auto& name : order) {
    const std::string section_name = "feature." + name;
    if (!ini.has(section_name)) {
      throw ConfigError(path.string() + ": feature '" + name + "' has no [" + section_name + "]");
    }
    const auto& sec = ini.section(section_name);
    FeatureDef def;
    def.name = name;
    def.column = sec.require_string("column");
    const auto kind = sec.get_string("kind", "numeric");
    if (kind == "indicator") {
      def.kind = FeatureKind::indicator;
      def.match_values = normalized(sec.get_list("values"));
      if (def.match_values.empty()) {
        throw ConfigError(path.string() + ": indicator '" + name + "' needs values");
      }
    } else if (kind == "numeric") {
      def.kind = FeatureKind::numeric;
      def.center = sec.get_double("center", 0.0);
      def.divisor = sec.get_double("divisor", 1.0);
      def.required = sec.get_bool("required", true);
      if (def.divisor == 0.0) throw ConfigError(path.string() + ": '" + name + "' divisor is zero");
    } else {
      throw ConfigError(path.string() + ": feature '" + name + "' has unknown kind '" + kind + "'");
    }
    const auto source = sec.get_string("source", "voter");
    if (source == "county") {
      def.source = FeatureSource::county;
    } else if (source != "voter") {
      throw ConfigError(path.string() + ": feature '" + name + "' has unknown source '" + source + "'");
    }
    spec.features.push_back(std::move(def));
  }

  if (ini.has("filter")) {
    const auto& sec = ini.section("filter");
    spec.filter = RowFilter{sec.require_string("column"), normalized(sec.get_list("values"))};
  }
  if (ini.has("tags")) {
    const auto& sec = ini.section("tags");
    spec.tags = TagRule{sec.require_string("column"), normalized(sec.get_list("dem_values")),
                        normalized(sec.get_list("rep_values"))};
  }
  if (ini.has("county_table")) {
    std::filesystem::path table = ini.section("county_table").require_string("path");
    if (table.is_relative()) table = path.parent_path() / table;
    spec.county_table = load_county_table(table);
  }
  for (const auto& f : spec.features) {
    if (f.source == FeatureSource::county && spec.county_table.empty()) {
      throw ConfigError(path.string() + ": feature '" + f.name +
                        "' reads the county table but none is configured");
    }
  }

  ini.check_strict({"features", "feature.*", "filter", "tags", "county_table"});
  return spec;
}

}  // namespace pbglm
