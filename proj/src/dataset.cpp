#include "pbglm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <cereal/archives/portable_binary.hpp>
#include <cereal/types/string.hpp>
#include <cereal/types/vector.hpp>

#include "pbglm/config.hpp"
#include "pbglm/csv.hpp"
#include "pbglm/errors.hpp"

namespace pbglm {

namespace {

std::size_t column_index(const std::vector<std::string>& header, const std::string& name,
                         const std::filesystem::path& path) {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) {
    throw FormatError(path.string() + ": missing column '" + name + "'");
  }
  return static_cast<std::size_t>(it - header.begin());
}

std::vector<std::string> read_header(CsvReader& reader, const std::filesystem::path& path) {
  std::vector<std::string> header;
  if (!reader.next(header)) throw FormatError(path.string() + ": missing header row");
  for (auto& h : header) h = trim(h);
  return header;
}

bool parse_double(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size() && std::isfinite(out);
}

bool contains(const std::vector<std::string>& values, const std::string& v) {
  return std::find(values.begin(), values.end(), v) != values.end();
}

std::string key_text(const PrecinctKey& key) { return key.county + " / " + key.precinct; }

struct KeyHash {
  std::size_t operator()(const PrecinctKey& k) const {
    return std::hash<std::string>{}(k.county) * 31u ^ std::hash<std::string>{}(k.precinct);
  }
};

}  // namespace

std::size_t Dataset::total_voters() const {
  std::size_t n = 0;
  for (const auto& p : precincts) n += p.n_voters();
  return n;
}

std::size_t Dataset::total_votes() const {
  std::size_t n = 0;
  for (const auto& p : precincts) n += p.T;
  return n;
}

void validate_dataset(const Dataset& dataset) {
  if (dataset.precincts.empty()) throw InputError("dataset has no precincts");
  for (const auto& p : dataset.precincts) {
    if (p.dim() != dataset.dim()) {
      throw ShapeError("precinct " + key_text(p.key) + " has " + std::to_string(p.dim()) +
                       " covariates, dataset declares " + std::to_string(dataset.dim()));
    }
    if (p.D > p.T) throw ValidationError("precinct " + key_text(p.key) + " has D > T");
  }
}

Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices) {
  Dataset out;
  out.feature_names = dataset.feature_names;
  out.scaling = dataset.scaling;
  out.precincts.reserve(indices.size());
  for (auto i : indices) out.precincts.push_back(dataset.precincts.at(i));
  return out;
}

std::vector<PrecinctResult> load_precinct_results(const std::filesystem::path& path,
                                                  const CandidateNames& names) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open precinct results " + path.string());
  CsvReader reader(in);
  const auto header = read_header(reader, path);
  const auto c_county = column_index(header, "county", path);
  const auto c_precinct = column_index(header, "precinct", path);
  const auto c_candidate = column_index(header, "candidate", path);
  const auto c_votes = column_index(header, "votes", path);
  const std::string dem = normalize_name(names.dem);
  const std::string rep = normalize_name(names.rep);

  std::vector<PrecinctResult> out;
  std::unordered_map<PrecinctKey, std::size_t, KeyHash> index;
  std::vector<std::size_t> negative_lines;
  std::vector<std::string> row;
  while (reader.next(row)) {
    if (row.size() == 1 && trim(row[0]).empty()) continue;
    if (row.size() != header.size()) {
      throw FormatError(path.string() + ":" + std::to_string(reader.line()) + ": expected " +
                        std::to_string(header.size()) + " fields, got " +
                        std::to_string(row.size()));
    }
    const std::string votes_text = trim(row[c_votes]);
    long long votes = 0;
    auto [ptr, ec] =
        std::from_chars(votes_text.data(), votes_text.data() + votes_text.size(), votes);
    if (votes_text.empty() || ec != std::errc() || ptr != votes_text.data() + votes_text.size()) {
      throw FormatError(path.string() + ":" + std::to_string(reader.line()) +
                        ": votes is not an integer: '" + votes_text + "'");
    }
    if (votes < 0) {
      negative_lines.push_back(reader.line());
      continue;
    }
    PrecinctKey key{normalize_name(row[c_county]), normalize_name(row[c_precinct])};
    auto [it, inserted] = index.try_emplace(key, out.size());
    if (inserted) out.push_back(PrecinctResult{key, 0, 0, 0});
    auto& res = out[it->second];
    const std::string candidate = normalize_name(row[c_candidate]);
    const auto v = static_cast<std::uint64_t>(votes);
    if (candidate == dem) {
      res.dem_votes += v;
    } else if (candidate == rep) {
      res.rep_votes += v;
    } else {
      res.other_votes += v;
    }
  }
  if (!negative_lines.empty()) {
    std::string lines;
    for (auto l : negative_lines) lines += (lines.empty() ? "" : ", ") + std::to_string(l);
    throw ValidationError(path.string() + ": negative vote counts on line(s) " + lines);
  }
  return out;
}

VoterFile load_voter_file(const std::filesystem::path& path, const FeatureSpec& spec) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open voter file " + path.string());
  CsvReader reader(in);
  const auto header = read_header(reader, path);
  const auto c_county = column_index(header, "county", path);
  const auto c_precinct = column_index(header, "precinct", path);
  const auto c_id = column_index(header, "voter_id", path);

  std::vector<std::size_t> feature_cols(spec.features.size(), 0);
  for (std::size_t f = 0; f < spec.features.size(); ++f) {
    if (spec.features[f].source == FeatureSource::voter) {
      feature_cols[f] = column_index(header, spec.features[f].column, path);
    }
  }
  const std::size_t c_filter =
      spec.filter ? column_index(header, spec.filter->column, path) : std::size_t{0};
  const std::size_t c_tags = spec.tags ? column_index(header, spec.tags->column, path) : std::size_t{0};

  VoterFile out;
  out.feature_names = spec.names();
  for (const auto& f : spec.features) out.scaling.push_back({f.name, f.center, f.divisor});
  out.has_tags = spec.tags.has_value();

  std::vector<std::string> row;
  std::size_t row_index = 0;
  while (reader.next(row)) {
    if (row.size() == 1 && trim(row[0]).empty()) continue;
    ++row_index;
    if (row.size() != header.size()) {
      throw FormatError(path.string() + ": row " + std::to_string(row_index) + " (line " +
                        std::to_string(reader.line()) + ") has " + std::to_string(row.size()) +
                        " fields, expected " + std::to_string(header.size()));
    }
    ++out.rows_read;
    if (spec.filter && !contains(spec.filter->values, normalize_name(row[c_filter]))) {
      ++out.rows_filtered;
      continue;
    }

    VoterRecord rec;
    rec.key = {normalize_name(row[c_county]), normalize_name(row[c_precinct])};
    rec.voter_id = trim(row[c_id]);
    rec.covariates.resize(spec.features.size(), 0.0);
    for (std::size_t f = 0; f < spec.features.size(); ++f) {
      const auto& def = spec.features[f];
      std::string raw;
      bool present = true;
      if (def.source == FeatureSource::voter) {
        raw = row[feature_cols[f]];
      } else {
        const auto county = spec.county_table.find(rec.key.county);
        const auto cell = county == spec.county_table.end() ? decltype(county->second.end()){}
                                                            : county->second.find(def.column);
        present = county != spec.county_table.end() && cell != county->second.end();
        if (present) raw = cell->second;
      }
      if (def.kind == FeatureKind::indicator) {
        rec.covariates[f] = present && contains(def.match_values, normalize_name(raw)) ? 1.0 : 0.0;
        continue;
      }
      double value = 0.0;
      if (present && parse_double(raw, value)) {
        rec.covariates[f] = (value - def.center) / def.divisor;
      } else if (def.required) {
        throw ValidationError(path.string() + ": row " + std::to_string(row_index) +
                              ": feature '" + def.name + "' (column '" + def.column +
                              "') is not numeric: '" + raw + "'");
      }
    }
    if (spec.tags) {
      const std::string tag = normalize_name(row[c_tags]);
      if (contains(spec.tags->dem_values, tag)) {
        rec.tag = PrimaryTag::dem_primary;
      } else if (contains(spec.tags->rep_values, tag)) {
        rec.tag = PrimaryTag::rep_primary;
      }
    }
    out.records.push_back(std::move(rec));
  }
  return out;
}

std::uint64_t binarized_count(std::uint64_t dem, std::uint64_t rep, std::uint64_t total) {
  const std::uint64_t major = dem + rep;
  if (major == 0) throw DomainError("binarization needs at least one major-party vote");
  const unsigned __int128 num = static_cast<unsigned __int128>(total) * dem;
  auto q = static_cast<std::uint64_t>(num / major);
  const auto rem = static_cast<std::uint64_t>(num % major);
  const unsigned __int128 twice = static_cast<unsigned __int128>(rem) * 2;
  if (twice > major || (twice == major && (q & 1U))) ++q;
  return q;
}

JoinResult binarize_and_join(const std::vector<PrecinctResult>& results, const VoterFile& voters) {
  JoinResult out;
  auto& report = out.report;
  out.dataset.feature_names = voters.feature_names;
  out.dataset.scaling = voters.scaling;
  report.results_precincts = results.size();
  report.voter_rows = voters.records.size();

  // Voter rows grouped by precinct, file order within each group.
  std::unordered_map<PrecinctKey, std::vector<std::size_t>, KeyHash> groups;
  std::vector<PrecinctKey> group_order;
  for (std::size_t i = 0; i < voters.records.size(); ++i) {
    auto [it, inserted] = groups.try_emplace(voters.records[i].key);
    if (inserted) group_order.push_back(voters.records[i].key);
    it->second.push_back(i);
  }

  std::unordered_set<PrecinctKey, KeyHash> in_results;
  const auto d = static_cast<Eigen::Index>(voters.feature_names.size());
  for (const auto& res : results) {
    in_results.insert(res.key);
    const std::uint64_t total = res.dem_votes + res.rep_votes + res.other_votes;
    const auto g = groups.find(res.key);
    const std::size_t n_rows = g == groups.end() ? 0 : g->second.size();
    if (n_rows == 0) {
      report.dropped.push_back({res.key, "no_voter_rows", 0, total});
      continue;
    }
    if (res.dem_votes + res.rep_votes == 0) {
      report.dropped.push_back({res.key, "no_major_party_votes", n_rows, total});
      report.dropped_voters += n_rows;
      continue;
    }

    Precinct p;
    p.key = res.key;
    p.T = total;
    p.D = binarized_count(res.dem_votes, res.rep_votes, total);
    p.X.resize(static_cast<Eigen::Index>(n_rows), d);
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < n_rows; ++r) {
      const auto& rec = voters.records[g->second[r]];
      if (!seen.insert(rec.voter_id).second) {
        throw ValidationError("duplicate voter id '" + rec.voter_id + "' in precinct " +
                              key_text(res.key));
      }
      if (static_cast<Eigen::Index>(rec.covariates.size()) != d) {
        throw ShapeError("voter '" + rec.voter_id + "' has the wrong covariate count");
      }
      for (Eigen::Index c = 0; c < d; ++c) {
        p.X(static_cast<Eigen::Index>(r), c) = rec.covariates[static_cast<std::size_t>(c)];
      }
      p.voter_ids.push_back(rec.voter_id);
      if (voters.has_tags) p.tags.push_back(rec.tag);
    }
    report.mismatch_ratios.emplace_back(p.key, p.mismatch_ratio());
    report.retained_voters += n_rows;
    out.dataset.precincts.push_back(std::move(p));
  }
  for (const auto& key : group_order) {
    if (in_results.count(key) == 0) {
      const auto n_rows = groups[key].size();
      report.dropped.push_back({key, "no_results", n_rows, 0});
      report.dropped_voters += n_rows;
    }
  }
  report.retained_precincts = out.dataset.precincts.size();
  return out;
}

SplitIndices split_indices(const Dataset& dataset, SplitMode mode, double train_frac,
                           std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw SplitError("train fraction must lie strictly between 0 and 1");
  }
  const std::size_t n = dataset.precincts.size();
  std::mt19937_64 rng(seed);
  SplitIndices out;

  if (mode == SplitMode::precinct) {
    if (n < 2) throw SplitError("precinct split needs at least two precincts");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
    n_train = std::clamp<std::size_t>(n_train, 1, n - 1);
    out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  } else {
    std::vector<std::string> counties;
    std::map<std::string, std::vector<std::size_t>> members;
    std::map<std::string, std::uint64_t> votes;
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = dataset.precincts[i].key.county;
      if (members.find(c) == members.end()) counties.push_back(c);
      members[c].push_back(i);
      votes[c] += dataset.precincts[i].T;
      total += dataset.precincts[i].T;
    }
    if (counties.size() < 2) throw SplitError("county split needs at least two counties");
    std::shuffle(counties.begin(), counties.end(), rng);
    const double target = train_frac * static_cast<double>(total);
    std::uint64_t acc = 0;
    std::size_t n_train = 0;
    while (n_train < counties.size() && static_cast<double>(acc) < target) {
      acc += votes[counties[n_train]];
      ++n_train;
    }
    n_train = std::clamp<std::size_t>(n_train, 1, counties.size() - 1);
    for (std::size_t c = 0; c < counties.size(); ++c) {
      auto& side = c < n_train ? out.train : out.test;
      const auto& m = members[counties[c]];
      side.insert(side.end(), m.begin(), m.end());
    }
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, SplitMode mode, double train_frac,
                                  std::uint64_t seed) {
  const auto idx = split_indices(dataset, mode, train_frac, seed);
  return {subset(dataset, idx.train), subset(dataset, idx.test)};
}

// Cached-dataset serialization.

namespace {

constexpr std::uint32_t kDatasetMagic = 0x50424744;  // "PBGD"
constexpr std::uint32_t kDatasetVersion = 1;

template <class Archive>
void archive_precinct(Archive& ar, Precinct& p) {
  std::int64_t rows = p.X.rows();
  std::int64_t cols = p.X.cols();
  std::uint64_t d = p.D;
  std::uint64_t t = p.T;
  ar(p.key.county, p.key.precinct, rows, cols, d, t);
  p.D = d;
  p.T = t;
  if (p.X.rows() != rows || p.X.cols() != cols) p.X.resize(rows, cols);
  std::vector<double> values(p.X.data(), p.X.data() + p.X.size());
  ar(values);
  if (static_cast<std::int64_t>(values.size()) != rows * cols) {
    throw FormatError("dataset cache is corrupt");
  }
  std::copy(values.begin(), values.end(), p.X.data());
  std::vector<std::uint8_t> tags(p.tags.size());
  for (std::size_t i = 0; i < tags.size(); ++i) tags[i] = static_cast<std::uint8_t>(p.tags[i]);
  ar(p.voter_ids, tags);
  p.tags.resize(tags.size());
  for (std::size_t i = 0; i < tags.size(); ++i) p.tags[i] = static_cast<PrimaryTag>(tags[i]);
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write dataset cache " + path.string());
  cereal::PortableBinaryOutputArchive ar(out);
  std::vector<std::string> scale_names;
  std::vector<double> centers;
  std::vector<double> divisors;
  for (const auto& s : dataset.scaling) {
    scale_names.push_back(s.name);
    centers.push_back(s.center);
    divisors.push_back(s.divisor);
  }
  std::uint64_t count = dataset.precincts.size();
  ar(kDatasetMagic, kDatasetVersion, dataset.feature_names, scale_names, centers, divisors, count);
  for (const auto& p : dataset.precincts) {
    Precinct copy = p;
    archive_precinct(ar, copy);
  }
  if (!out) throw FileError("failed writing dataset cache " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open dataset cache " + path.string());
  Dataset dataset;
  try {
    cereal::PortableBinaryInputArchive ar(in);
    std::uint32_t magic = 0;
    std::uint32_t version = 0;
    ar(magic, version);
    if (magic != kDatasetMagic || version != kDatasetVersion) {
      throw FormatError(path.string() + " is not a dataset cache");
    }
    std::vector<std::string> scale_names;
    std::vector<double> centers;
    std::vector<double> divisors;
    std::uint64_t count = 0;
    ar(dataset.feature_names, scale_names, centers, divisors, count);
    for (std::size_t i = 0; i < scale_names.size(); ++i) {
      dataset.scaling.push_back({scale_names[i], centers.at(i), divisors.at(i)});
    }
    dataset.precincts.resize(count);
    for (auto& p : dataset.precincts) archive_precinct(ar, p);
  } catch (const cereal::Exception& e) {
    throw FormatError(path.string() + ": corrupt dataset cache (" + e.what() + ")");
  }
  return dataset;
}

}  // namespace pbglm
