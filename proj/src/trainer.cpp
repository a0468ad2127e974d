#include "pbglm/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "pbglm/errors.hpp"
#include "pbglm/poibin.hpp"

namespace pbglm {

namespace {

bool degenerate(const Precinct& p) { return p.T == 0 || p.n_voters() == 0; }

std::string where(std::size_t epoch, const Precinct& p) {
  return "epoch " + std::to_string(epoch) + ", precinct " + p.key.county + " / " + p.key.precinct;
}

// Runs fn(i) for i in [0, n) across worker threads. fn must only write to slot i.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(std::max(1U, std::thread::hardware_concurrency()), (n + 15) / 16);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < n; i += workers) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

struct FlatClip {
  bool skip = false;
  bool clipped = false;
  double norm = 0.0;
};

FlatClip clip_flat(Eigen::VectorXd& g, const FitConfig& config) {
  if (!g.allFinite()) throw NumericError("non-finite gradient");
  FlatClip out;
  out.norm = g.norm();
  if (out.norm < config.skip_norm) {
    out.skip = true;
  } else if (out.norm > config.clip_norm) {
    g *= config.clip_norm / out.norm;
    out.clipped = true;
  }
  return out;
}

}  // namespace

void FitConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(anneal_exponent >= 0.0)) throw ConfigError("anneal_exponent must be non-negative");
  if (!(skip_norm > 0.0)) throw ConfigError("skip_norm must be positive");
  if (!(clip_norm > skip_norm)) throw ConfigError("clip_norm must exceed skip_norm");
  if (!(l2_lambda >= 0.0)) throw ConfigError("l2_lambda must be non-negative");
  if (hidden_size < 1) throw ConfigError("hidden_size must be at least 1");
}

ModelParams init_params(ModelKind kind, std::size_t d, const FitConfig& config) {
  if (d < 1) throw InputError("model needs at least one covariate");
  const auto dim = static_cast<Eigen::Index>(d);
  if (kind == ModelKind::logistic) {
    return LogisticParams{Eigen::VectorXd::Zero(dim + 1)};
  }
  const auto h = static_cast<Eigen::Index>(config.hidden_size);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> uniform(-0.1, 0.1);
  NeuralParams np;
  np.w1.resize(h, dim);
  for (Eigen::Index r = 0; r < h; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) np.w1(r, c) = uniform(rng);
  }
  np.b1 = Eigen::VectorXd::Zero(h);
  np.w2.resize(h);
  for (Eigen::Index r = 0; r < h; ++r) np.w2(r) = uniform(rng);
  np.b2 = 0.0;
  return np;
}

double learning_rate_at(const FitConfig& config, std::size_t epoch) {
  const double e = static_cast<double>(std::max<std::size_t>(epoch, 1));
  return config.learning_rate / std::pow(e, config.anneal_exponent);
}

ClipOutcome clip_or_skip(const PrecinctGradient& g, const FitConfig& config) {
  Eigen::VectorXd flat = flatten(g);
  const auto c = clip_flat(flat, config);
  ClipOutcome out;
  out.norm = c.norm;
  out.clipped = c.clipped;
  if (!c.skip) out.apply = unflatten_like(g, flat);
  return out;
}

LossBreakdown dataset_loss_detail(const Dataset& dataset, const ModelParams& params, bool exact) {
  const std::size_t n = dataset.precincts.size();
  std::vector<double> terms(n, 0.0);
  std::vector<std::uint8_t> skipped(n, 0);
  std::vector<std::uint8_t> underflow(n, 0);
  parallel_for(n, [&](std::size_t k) {
    const Precinct& p = dataset.precincts[k];
    if (p.n_voters() == 0) {
      skipped[k] = 1;
      return;
    }
    if (!exact) {
      terms[k] = -precinct_loglik_normal(params, p);
      return;
    }
    if (p.D > p.n_voters()) {
      terms[k] = -kLogLikUnderflow;
      underflow[k] = 1;
      return;
    }
    const auto ll = loglik_exact(precinct_probs(params, p), p.D);
    terms[k] = -ll.value;
    underflow[k] = ll.underflow ? 1 : 0;
  });
  LossBreakdown out;
  for (std::size_t k = 0; k < n; ++k) {
    out.nll += terms[k];
    out.degenerate += skipped[k];
    out.underflows += underflow[k];
  }
  return out;
}

double dataset_loss(const Dataset& dataset, const ModelParams& params, bool exact) {
  return dataset_loss_detail(dataset, params, exact).nll;
}

FitReport fit(const Dataset& dataset, ModelKind kind, const FitConfig& config,
              const EpochCallback& on_epoch) {
  config.validate();
  validate_dataset(dataset);
  const auto start = std::chrono::steady_clock::now();

  FitReport report;
  report.params = init_params(kind, dataset.dim(), config);
  const Eigen::VectorXd mask = penalty_mask(report.params);
  const std::size_t n = dataset.precincts.size();

  Dataset exact_set;
  if (config.track_exact_loss) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (config.exact_loss_subsample > 0 && config.exact_loss_subsample < n) {
      std::mt19937_64 pick(config.seed ^ 0x9e3779b97f4a7c15ULL);
      std::shuffle(idx.begin(), idx.end(), pick);
      idx.resize(config.exact_loss_subsample);
      std::sort(idx.begin(), idx.end());
    }
    report.exact_subsample = idx;
    exact_set = subset(dataset, idx);
    report.exact_nll.emplace();
    report.approx_nll_subsample.emplace();
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffler(config.seed + 1);

  Eigen::VectorXd theta = flatten(report.params);
  auto apply_step = [&](Eigen::VectorXd g, double lr, const std::string& context) {
    if (config.l2_lambda > 0.0) g -= config.l2_lambda * mask.cwiseProduct(theta);
    if (!g.allFinite()) throw NumericError("non-finite gradient at " + context);
    const auto c = clip_flat(g, config);
    if (c.skip) {
      ++report.skipped_count;
      return;
    }
    if (c.clipped) ++report.clipped_count;
    theta += lr * g;
  };

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = learning_rate_at(config, epoch);
    if (config.update_mode == UpdateMode::stochastic) {
      std::shuffle(order.begin(), order.end(), shuffler);
    }

    if (config.update_mode == UpdateMode::batch) {
      const ModelParams current = unflatten_like(report.params, theta);
      Eigen::VectorXd total = Eigen::VectorXd::Zero(theta.size());
      for (std::size_t k : order) {
        const Precinct& p = dataset.precincts[k];
        if (degenerate(p)) {
          ++report.degenerate_skips;
          continue;
        }
        total += flatten(gradient(current, p));
      }
      apply_step(std::move(total), lr, "epoch " + std::to_string(epoch) + " (batch)");
    } else {
      for (std::size_t k : order) {
        const Precinct& p = dataset.precincts[k];
        if (degenerate(p)) {
          ++report.degenerate_skips;
          continue;
        }
        const ModelParams current = unflatten_like(report.params, theta);
        Eigen::VectorXd g = flatten(gradient(current, p));
        if (!g.allFinite()) throw NumericError("non-finite gradient at " + where(epoch, p));
        apply_step(std::move(g), lr, where(epoch, p));
      }
    }

    report.params = unflatten_like(report.params, theta);
    const double approx = dataset_loss(dataset, report.params, false);
    if (!std::isfinite(approx)) {
      throw NumericError("non-finite approximate loss after epoch " + std::to_string(epoch));
    }
    report.approx_nll.push_back(approx);
    if (report.exact_nll) {
      const auto ex = dataset_loss_detail(exact_set, report.params, true);
      report.exact_nll->push_back(ex.nll);
      report.approx_nll_subsample->push_back(dataset_loss(exact_set, report.params, false));
      report.exact_underflows += ex.underflows;
    }
    report.epochs_run = epoch;
    if (on_epoch) on_epoch(epoch, report.params);
  }

  report.params = unflatten_like(report.params, theta);
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string to_string(UpdateMode mode) {
  switch (mode) {
    case UpdateMode::per_precinct: return "per_precinct";
    case UpdateMode::batch: return "batch";
    case UpdateMode::stochastic: return "stochastic";
  }
  return "per_precinct";
}

UpdateMode update_mode_from_string(const std::string& text) {
  if (text == "per_precinct") return UpdateMode::per_precinct;
  if (text == "batch") return UpdateMode::batch;
  if (text == "stochastic") return UpdateMode::stochastic;
  throw ConfigError("unknown update mode '" + text + "'");
}

std::string to_string(ModelKind kind) {
  return kind == ModelKind::logistic ? "logistic" : "neural";
}

ModelKind model_kind_from_string(const std::string& text) {
  if (text == "logistic") return ModelKind::logistic;
  if (text == "neural") return ModelKind::neural;
  throw ConfigError("unknown model kind '" + text + "'");
}

}  // namespace pbglm
