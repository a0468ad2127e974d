#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pbglm/glm.hpp"
#include "pbglm/trainer.hpp"

namespace pbglm {

// {"kind": "logistic", "theta": [...]} or
// {"kind": "neural", "hidden_size": h, "w1": [[...]], "b1": [...], "w2": [...], "b2": x}
nlohmann::json params_to_json(const ModelParams& params);
// Throws FormatError on a malformed document.
ModelParams params_from_json(const nlohmann::json& doc);

// Keys approx_nll, exact_nll, epochs_run, clipped_count, skipped_count,
// degenerate_skips, wall_time_s, params, plus the config that produced it.
nlohmann::json fit_report_to_json(const FitReport& report, const FitConfig& config);
nlohmann::json fit_config_to_json(const FitConfig& config);

nlohmann::json read_json(const std::filesystem::path& path);
// Pretty-printed, trailing newline.
void write_json(const nlohmann::json& doc, const std::filesystem::path& path);
void write_text(const std::string& text, const std::filesystem::path& path);

}  // namespace pbglm
