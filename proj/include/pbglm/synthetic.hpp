#pragma once

// Ground-truth election generator: draws covariates, draws every voter's choice
// from a known model, and records the precinct totals.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "pbglm/dataset.hpp"
#include "pbglm/glm.hpp"

namespace pbglm {

struct SynthSpec {
  std::size_t precincts = 1000;
  std::size_t voters_min = 200;
  std::size_t voters_max = 200;
  std::size_t dim = 3;
  // Covariates are marginally N(0, 1). This share of the variance is a
  // precinct-level offset common to all voters in the precinct, the rest is
  // individual noise. 0 gives i.i.d. voters everywhere.
  double precinct_correlation = 0.5;
  std::size_t counties = 1;
  ModelKind model = ModelKind::logistic;
  // Logistic truth, intercept first, length dim + 1.
  std::vector<double> theta = {0.2, 1.0, -0.5, 0.3};
  // Neural truth is drawn from the seed: weights uniform on [-scale, scale].
  std::size_t hidden_size = 4;
  double weight_scale = 2.0;
  // Fraction of voters who carry a primary tag; the tag follows the voter's
  // own drawn choice, flipped with probability primary_crossover.
  double primary_rate = 0.0;
  double primary_crossover = 0.12;
};

struct SyntheticElection {
  Dataset dataset;
  ModelParams truth;
};

// Throws InputError on an invalid spec (zero precincts, empty voter range,
// theta of the wrong length, ...).
SyntheticElection generate_synthetic(const SynthSpec& spec, std::uint64_t seed);

// [synthetic] section of an INI file; see SynthSpec for keys.
SynthSpec load_synth_spec(const std::filesystem::path& path);

}  // namespace pbglm
