#pragma once

// Incremental gradient ascent on the summed normal-approximation
// log-likelihood: one parameter update per precinct, fixed visiting order,
// per-epoch learning-rate annealing, gradient skipping and norm clipping.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pbglm/dataset.hpp"
#include "pbglm/glm.hpp"

namespace pbglm {

enum class UpdateMode { per_precinct, batch, stochastic };

struct FitConfig {
  double learning_rate = 1e-4;
  // lr_e = learning_rate / e^anneal_exponent for epoch e = 1, 2, ...
  double anneal_exponent = 0.5;
  std::size_t epochs = 20;
  double clip_norm = 50.0;
  double skip_norm = 1e-8;
  double l2_lambda = 0.0;
  std::size_t hidden_size = 10;
  std::uint64_t seed = 0;
  bool track_exact_loss = false;
  // Exact loss over this many seeded-random precincts; 0 means all of them.
  std::size_t exact_loss_subsample = 0;
  UpdateMode update_mode = UpdateMode::per_precinct;

  // Throws ConfigError when an invariant is violated.
  void validate() const;
};

struct FitReport {
  std::vector<double> approx_nll;                 // one per epoch
  std::optional<std::vector<double>> exact_nll;   // one per epoch when tracked
  // Approximate NLL over the same precincts as exact_nll, for like-for-like comparison.
  std::optional<std::vector<double>> approx_nll_subsample;
  ModelParams params;
  std::size_t epochs_run = 0;
  std::size_t clipped_count = 0;
  std::size_t skipped_count = 0;
  std::size_t degenerate_skips = 0;
  std::size_t exact_underflows = 0;
  std::vector<std::size_t> exact_subsample;  // precinct indices used for exact loss
  double wall_time_s = 0.0;
};

ModelParams init_params(ModelKind kind, std::size_t d, const FitConfig& config);

double learning_rate_at(const FitConfig& config, std::size_t epoch);

struct ClipOutcome {
  std::optional<PrecinctGradient> apply;  // empty: skip
  bool clipped = false;
  double norm = 0.0;
};

// Skip when the L2 norm over every block is below skip_norm; rescale every
// block by clip_norm / norm when it exceeds clip_norm. Throws NumericError on
// a non-finite gradient.
ClipOutcome clip_or_skip(const PrecinctGradient& g, const FitConfig& config);

struct LossBreakdown {
  double nll = 0.0;
  std::size_t degenerate = 0;  // precincts without voters, left out of the sum
  std::size_t underflows = 0;  // exact only: counts with probability zero
};

// Negative summed log-likelihood. Approximate: normal approximation. Exact:
// Poisson binomial via the DFT, with the underflow sentinel per precinct.
// Per-precinct terms are computed in parallel and summed in precinct order.
LossBreakdown dataset_loss_detail(const Dataset& dataset, const ModelParams& params, bool exact);
double dataset_loss(const Dataset& dataset, const ModelParams& params, bool exact);

// Called after each epoch with the 1-based epoch number and current parameters.
using EpochCallback = std::function<void(std::size_t, const ModelParams&)>;

FitReport fit(const Dataset& dataset, ModelKind kind, const FitConfig& config,
              const EpochCallback& on_epoch = {});

std::string to_string(UpdateMode mode);
UpdateMode update_mode_from_string(const std::string& text);
std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& text);

}  // namespace pbglm
