#include "pbglm/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <random>

#include "pbglm/config.hpp"
#include "pbglm/errors.hpp"

namespace pbglm {

namespace {

void validate_spec(const SynthSpec& spec) {
  if (spec.precincts == 0) throw InputError("synthetic spec needs at least one precinct");
  if (spec.voters_min == 0 || spec.voters_max < spec.voters_min) {
    throw InputError("synthetic spec needs 1 <= voters_min <= voters_max");
  }
  if (spec.dim == 0) throw InputError("synthetic spec needs dim >= 1");
  if (!(spec.precinct_correlation >= 0.0 && spec.precinct_correlation <= 1.0)) {
    throw InputError("precinct_correlation must lie in [0, 1]");
  }
  if (spec.counties == 0 || spec.counties > spec.precincts) {
    throw InputError("synthetic spec needs 1 <= counties <= precincts");
  }
  if (spec.model == ModelKind::logistic && spec.theta.size() != spec.dim + 1) {
    throw InputError("synthetic theta needs dim + 1 = " + std::to_string(spec.dim + 1) +
                     " entries, got " + std::to_string(spec.theta.size()));
  }
  if (spec.model == ModelKind::neural && spec.hidden_size == 0) {
    throw InputError("synthetic neural truth needs hidden_size >= 1");
  }
  if (!(spec.primary_rate >= 0.0 && spec.primary_rate <= 1.0) ||
      !(spec.primary_crossover >= 0.0 && spec.primary_crossover <= 1.0)) {
    throw InputError("primary_rate and primary_crossover must lie in [0, 1]");
  }
}

std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

}  // namespace

SyntheticElection generate_synthetic(const SynthSpec& spec, std::uint64_t seed) {
  validate_spec(spec);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> voters(spec.voters_min, spec.voters_max);

  const auto d = static_cast<Eigen::Index>(spec.dim);
  SyntheticElection out;
  if (spec.model == ModelKind::logistic) {
    out.truth = LogisticParams{Eigen::Map<const Eigen::VectorXd>(
        spec.theta.data(), static_cast<Eigen::Index>(spec.theta.size()))};
  } else {
    const auto h = static_cast<Eigen::Index>(spec.hidden_size);
    std::uniform_real_distribution<double> weight(-spec.weight_scale, spec.weight_scale);
    NeuralParams np;
    np.w1.resize(h, d);
    for (Eigen::Index r = 0; r < h; ++r) {
      for (Eigen::Index c = 0; c < d; ++c) np.w1(r, c) = weight(rng);
    }
    np.b1 = Eigen::VectorXd::Zero(h);
    np.w2.resize(h);
    for (Eigen::Index r = 0; r < h; ++r) np.w2(r) = weight(rng);
    np.b2 = -0.5 * np.w2.sum();  // centers the output near 0.5
    out.truth = np;
  }

  auto& ds = out.dataset;
  for (Eigen::Index c = 0; c < d; ++c) {
    ds.feature_names.push_back(numbered("x", static_cast<std::size_t>(c + 1), 1));
    ds.scaling.push_back({ds.feature_names.back(), 0.0, 1.0});
  }
  const double shared = std::sqrt(spec.precinct_correlation);
  const double own = std::sqrt(1.0 - spec.precinct_correlation);
  const bool tagged = spec.primary_rate > 0.0;

  ds.precincts.reserve(spec.precincts);
  for (std::size_t k = 0; k < spec.precincts; ++k) {
    Precinct p;
    const std::size_t county = k * spec.counties / spec.precincts;
    p.key = {numbered("COUNTY ", county + 1, 3), numbered("P", k + 1, 5)};
    const std::size_t n = voters(rng);
    Eigen::VectorXd offset(d);
    for (Eigen::Index c = 0; c < d; ++c) offset(c) = normal(rng);
    p.X.resize(static_cast<Eigen::Index>(n), d);
    std::size_t successes = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      for (Eigen::Index c = 0; c < d; ++c) {
        p.X(row, c) = shared * offset(c) + own * normal(rng);
      }
      const double prob = spec.model == ModelKind::logistic
                              ? predict_logistic(std::get<LogisticParams>(out.truth),
                                                 p.X.row(row).transpose())
                              : predict_neural(std::get<NeuralParams>(out.truth),
                                               p.X.row(row).transpose());
      const bool vote = unit(rng) < prob;
      successes += vote ? 1 : 0;
      p.voter_ids.push_back(p.key.precinct + "-" + std::to_string(i + 1));
      if (tagged) {
        PrimaryTag tag = PrimaryTag::none;
        if (unit(rng) < spec.primary_rate) {
          const bool flip = unit(rng) < spec.primary_crossover;
          tag = (vote != flip) ? PrimaryTag::dem_primary : PrimaryTag::rep_primary;
        }
        p.tags.push_back(tag);
      }
    }
    p.D = successes;
    p.T = n;
    ds.precincts.push_back(std::move(p));
  }
  return out;
}

SynthSpec load_synth_spec(const std::filesystem::path& path) {
  const IniFile ini = IniFile::load(path);
  const auto& sec = ini.section("synthetic");
  SynthSpec spec;
  spec.precincts = sec.get_u64("precincts", spec.precincts);
  spec.voters_min = sec.get_u64("voters_min", spec.voters_min);
  spec.voters_max = sec.get_u64("voters_max", spec.voters_max);
  spec.dim = sec.get_u64("dim", spec.dim);
  spec.precinct_correlation = sec.get_double("precinct_correlation", spec.precinct_correlation);
  spec.counties = sec.get_u64("counties", spec.counties);
  const auto model = sec.get_string("model", "logistic");
  if (model == "logistic") {
    spec.model = ModelKind::logistic;
  } else if (model == "neural") {
    spec.model = ModelKind::neural;
  } else {
    throw ConfigError(path.string() + ": unknown model '" + model + "'");
  }
  if (sec.has("theta")) spec.theta = sec.get_doubles("theta");
  spec.hidden_size = sec.get_u64("hidden_size", spec.hidden_size);
  spec.weight_scale = sec.get_double("weight_scale", spec.weight_scale);
  spec.primary_rate = sec.get_double("primary_rate", spec.primary_rate);
  spec.primary_crossover = sec.get_double("primary_crossover", spec.primary_crossover);
  ini.check_strict({"synthetic"});
  validate_spec(spec);
  return spec;
}

}  // namespace pbglm
