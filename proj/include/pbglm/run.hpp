#pragma once

// Config-driven commands behind the command-line tool. Each command writes its
// artifacts into the run's output directory and embeds the config digest.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pbglm/dataset.hpp"
#include "pbglm/glm.hpp"
#include "pbglm/trainer.hpp"

namespace pbglm {

enum class DataSide { all, train, test };

struct RunConfig {
  std::filesystem::path config_path;
  // [data]
  std::filesystem::path results;
  std::filesystem::path voters;
  std::filesystem::path feature_spec;
  std::filesystem::path synthetic;
  CandidateNames candidates;
  // [model] / [fit]
  ModelKind kind = ModelKind::logistic;
  FitConfig fit;
  // [split]; no mode means train and evaluate on everything
  std::optional<SplitMode> split_mode = SplitMode::precinct;
  double train_frac = 0.7;
  // [run]
  std::uint64_t seed = 0;
  // [eval]
  bool landslide = true;
  double landslide_threshold = 0.9;
  bool primary = true;
  DataSide weak_label_side = DataSide::test;
  // [output]
  std::filesystem::path out_dir;

  std::string digest;

  std::filesystem::path cache_path() const { return out_dir / "dataset.bin"; }
};

// Parses the run config strictly. `seed` and `out` override the file.
// Throws ConfigError / FileError (exit code 2) on any problem.
RunConfig load_run_config(const std::filesystem::path& path,
                          std::optional<std::uint64_t> seed = std::nullopt,
                          std::optional<std::filesystem::path> out = std::nullopt);

// Loads the cached dataset if present, otherwise builds it from the synthetic
// spec or the raw CSVs.
Dataset load_run_dataset(const RunConfig& config);

nlohmann::json cmd_ingest(const RunConfig& config);
nlohmann::json cmd_simulate(const RunConfig& config);
FitReport cmd_fit(const RunConfig& config);
nlohmann::json cmd_evaluate(const RunConfig& config, const std::filesystem::path& params_file);
std::size_t cmd_predict(const RunConfig& config, const std::filesystem::path& params_file,
                        DataSide side, const std::filesystem::path& dest);

struct PoibinQuery {
  std::vector<double> probs;
  std::optional<std::size_t> k;
  // Subset of pmf, cdf, moments, lyapunov, loglik; empty means all applicable.
  std::vector<std::string> what;
};

// Text report, values printed with 12 significant digits.
std::string cmd_poibin(const PoibinQuery& query);

// Parses "0.2, 0.7" or whitespace/newline separated values. Throws InputError.
std::vector<double> parse_prob_list(const std::string& text);

// 0 success, 1 numeric or training failure, 2 input or config error.
int exit_code_for(const std::exception& error);

DataSide data_side_from_string(const std::string& text);

}  // namespace pbglm
