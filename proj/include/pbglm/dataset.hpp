#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pbglm/feature_spec.hpp"
#include "pbglm/precinct.hpp"

namespace pbglm {

// Affine transform applied to a raw column: feature = (raw - center) / divisor.
struct FeatureScaling {
  std::string name;
  double center = 0.0;
  double divisor = 1.0;
};

struct Dataset {
  std::vector<Precinct> precincts;  // load order; the trainer visits them in this order
  std::vector<std::string> feature_names;
  std::vector<FeatureScaling> scaling;

  std::size_t dim() const { return feature_names.size(); }
  std::size_t total_voters() const;
  std::size_t total_votes() const;
};

// Throws InputError if the dataset is empty or covariate widths disagree.
void validate_dataset(const Dataset& dataset);

// Precincts at the given indices, in the order given.
Dataset subset(const Dataset& dataset, const std::vector<std::size_t>& indices);

struct CandidateNames {
  std::string dem = "HILLARY CLINTON";
  std::string rep = "DONALD TRUMP";
};

struct PrecinctResult {
  PrecinctKey key;  // normalized
  std::uint64_t dem_votes = 0;
  std::uint64_t rep_votes = 0;
  std::uint64_t other_votes = 0;
};

// Reads `county,precinct,candidate,votes` rows and aggregates them per
// precinct in order of first appearance.
std::vector<PrecinctResult> load_precinct_results(const std::filesystem::path& path,
                                                  const CandidateNames& names = {});

struct VoterRecord {
  PrecinctKey key;  // normalized
  std::string voter_id;
  std::vector<double> covariates;
  PrimaryTag tag = PrimaryTag::none;
};

struct VoterFile {
  std::vector<VoterRecord> records;
  std::vector<std::string> feature_names;
  std::vector<FeatureScaling> scaling;
  std::size_t rows_read = 0;
  std::size_t rows_filtered = 0;
  bool has_tags = false;
};

// Reads `county,precinct,voter_id,<raw columns>` and maps each row through the
// feature spec.
VoterFile load_voter_file(const std::filesystem::path& path, const FeatureSpec& spec);

struct DroppedPrecinct {
  PrecinctKey key;
  std::string reason;  // "no_voter_rows", "no_results", "no_major_party_votes"
  std::size_t voters = 0;
  std::uint64_t votes = 0;
};

struct JoinReport {
  std::size_t results_precincts = 0;
  std::size_t voter_rows = 0;
  std::size_t retained_precincts = 0;
  std::size_t retained_voters = 0;
  std::size_t dropped_voters = 0;
  std::vector<DroppedPrecinct> dropped;
  std::vector<std::pair<PrecinctKey, double>> mismatch_ratios;  // n_voters / T
};

struct JoinResult {
  Dataset dataset;
  JoinReport report;
};

// Binarizes each precinct (T = dem + rep + other, D = T * dem / (dem + rep)
// rounded half to even) and attaches the voter rows. Precincts present in only
// one source, or with no major-party votes, are dropped and reported.
JoinResult binarize_and_join(const std::vector<PrecinctResult>& results, const VoterFile& voters);

// round_half_even(total * dem / (dem + rep)), computed exactly in integers.
std::uint64_t binarized_count(std::uint64_t dem, std::uint64_t rep, std::uint64_t total);

enum class SplitMode { precinct, county };

struct SplitIndices {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;
};

SplitIndices split_indices(const Dataset& dataset, SplitMode mode, double train_frac,
                           std::uint64_t seed);
std::pair<Dataset, Dataset> split(const Dataset& dataset, SplitMode mode, double train_frac,
                                  std::uint64_t seed);

// Binary cache of a joined dataset.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace pbglm
