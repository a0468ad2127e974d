#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pbglm/dataset.hpp"
#include "pbglm/glm.hpp"

namespace pbglm {

struct PrecinctPrediction {
  PrecinctKey key;
  double predicted_share = 0.0;  // mean per-voter probability
  double actual_share = 0.0;     // D / T
  double weight = 0.0;           // T
};

// One prediction per precinct with T >= 1 and at least one voter row.
std::vector<PrecinctPrediction> precinct_predictions(const Dataset& dataset,
                                                     const ModelParams& params);

// Vote-weighted R^2 of predicted against actual precinct shares. Throws
// DomainError on empty input or when every actual share is identical.
double r2_weighted(std::span<const PrecinctPrediction> preds);

inline constexpr double kHistogramBinWidth = 0.05;
inline constexpr std::size_t kHistogramBins = 20;

struct WeakLabelGroup {
  std::string name;
  std::size_t size = 0;
  double mean = 0.0;  // NaN when the group is empty
  std::vector<std::size_t> histogram = std::vector<std::size_t>(kHistogramBins, 0);
};

struct WeakLabelReport {
  std::vector<WeakLabelGroup> groups;

  bool has_empty_group() const;
};

std::size_t histogram_bin(double prob);

// Voters in precincts with D/T >= threshold ("dem_landslide") and
// D/T <= 1 - threshold ("rep_landslide").
WeakLabelReport landslide_report(const Dataset& dataset, const ModelParams& params,
                                 double threshold = 0.9);

// Voters grouped by primary-participation tag ("dem_primary", "rep_primary").
WeakLabelReport primary_voter_report(const Dataset& dataset, const ModelParams& params);

// Writes `county,precinct,voter_id,probability`; returns the row count.
std::size_t export_predictions(const Dataset& dataset, const ModelParams& params,
                               const std::filesystem::path& path);

nlohmann::json to_json(const WeakLabelReport& report);
// Plot-ready TSV: bin_lower, bin_upper, one count column per group.
std::string to_tsv(const WeakLabelReport& report);

}  // namespace pbglm
