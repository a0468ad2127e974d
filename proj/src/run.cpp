#include "pbglm/run.hpp"

#include <cmath>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pbglm/config.hpp"
#include "pbglm/csv.hpp"
#include "pbglm/errors.hpp"
#include "pbglm/eval.hpp"
#include "pbglm/feature_spec.hpp"
#include "pbglm/model_io.hpp"
#include "pbglm/poibin.hpp"
#include "pbglm/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pbglm {

namespace {

fs::path resolve(const fs::path& base, const std::string& value) {
  fs::path p(value);
  return p.is_relative() ? base / p : p;
}

void require_exists(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw FileError(std::string(what) + " not found: " + p.string());
}

std::string fmt12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json key_json(const PrecinctKey& k) { return {{"county", k.county}, {"precinct", k.precinct}}; }

json nullable(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

std::optional<double> try_r2(const Dataset& ds, const ModelParams& params) {
  if (ds.precincts.empty()) return std::nullopt;
  const auto preds = precinct_predictions(ds, params);
  try {
    return r2_weighted(preds);
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

struct Sides {
  Dataset train;
  Dataset test;
  SplitIndices indices;
};

Sides make_sides(const RunConfig& config, const Dataset& all) {
  Sides s;
  if (!config.split_mode) {
    s.train = all;
    s.indices.train.resize(all.precincts.size());
    for (std::size_t i = 0; i < all.precincts.size(); ++i) s.indices.train[i] = i;
    s.test = subset(all, {});
    return s;
  }
  s.indices = split_indices(all, *config.split_mode, config.train_frac, config.seed);
  s.train = subset(all, s.indices.train);
  s.test = subset(all, s.indices.test);
  return s;
}

const Dataset& pick_side(const Sides& sides, const Dataset& all, DataSide side) {
  switch (side) {
    case DataSide::train: return sides.train;
    case DataSide::test: return sides.test;
    case DataSide::all: return all;
  }
  return all;
}

ModelParams read_params(const fs::path& file, const Dataset& ds) {
  require_exists(file, "parameter file");
  ModelParams params = params_from_json(read_json(file));
  if (input_dim(params) != ds.dim()) {
    throw ShapeError("parameter file " + file.string() + " expects " +
                     std::to_string(input_dim(params)) + " covariates, dataset has " +
                     std::to_string(ds.dim()));
  }
  return params;
}

std::string split_name(const std::optional<SplitMode>& mode) {
  if (!mode) return "none";
  return *mode == SplitMode::precinct ? "precinct" : "county";
}

}  // namespace

DataSide data_side_from_string(const std::string& text) {
  if (text == "all") return DataSide::all;
  if (text == "train") return DataSide::train;
  if (text == "test") return DataSide::test;
  throw ConfigError("unknown data side '" + text + "' (expected all, train or test)");
}

RunConfig load_run_config(const fs::path& path, std::optional<std::uint64_t> seed,
                          std::optional<fs::path> out) {
  const IniFile ini = IniFile::load(path);
  const fs::path base = path.parent_path();
  RunConfig rc;
  rc.config_path = path;

  const auto& data = ini.section("data");
  if (auto v = data.get("results")) rc.results = resolve(base, *v);
  if (auto v = data.get("voters")) rc.voters = resolve(base, *v);
  if (auto v = data.get("feature_spec")) rc.feature_spec = resolve(base, *v);
  if (auto v = data.get("synthetic")) rc.synthetic = resolve(base, *v);
  rc.candidates.dem = data.get_string("dem_candidate", rc.candidates.dem);
  rc.candidates.rep = data.get_string("rep_candidate", rc.candidates.rep);

  rc.kind = model_kind_from_string(ini.section("model").get_string("kind", "logistic"));

  const auto& fit = ini.section("fit");
  rc.fit.learning_rate = fit.get_double("learning_rate", rc.fit.learning_rate);
  rc.fit.anneal_exponent = fit.get_double("anneal_exponent", rc.fit.anneal_exponent);
  rc.fit.epochs = fit.get_u64("epochs", rc.fit.epochs);
  rc.fit.clip_norm = fit.get_double("clip_norm", rc.fit.clip_norm);
  rc.fit.skip_norm = fit.get_double("skip_norm", rc.fit.skip_norm);
  rc.fit.l2_lambda = fit.get_double("l2_lambda", rc.fit.l2_lambda);
  rc.fit.hidden_size = fit.get_u64("hidden_size", rc.fit.hidden_size);
  rc.fit.track_exact_loss = fit.get_bool("track_exact_loss", rc.fit.track_exact_loss);
  rc.fit.exact_loss_subsample = fit.get_u64("exact_loss_subsample", rc.fit.exact_loss_subsample);
  rc.fit.update_mode = update_mode_from_string(fit.get_string("update_mode", "per_precinct"));

  const auto& split = ini.section("split");
  const auto mode = split.get_string("mode", "precinct");
  if (mode == "precinct") {
    rc.split_mode = SplitMode::precinct;
  } else if (mode == "county") {
    rc.split_mode = SplitMode::county;
  } else if (mode == "none") {
    rc.split_mode.reset();
  } else {
    throw ConfigError("[split] mode must be precinct, county or none, got '" + mode + "'");
  }
  rc.train_frac = split.get_double("train_frac", rc.train_frac);

  rc.seed = ini.section("run").get_u64("seed", 0);

  const auto& ev = ini.section("eval");
  rc.landslide = ev.get_bool("landslide", rc.landslide);
  rc.landslide_threshold = ev.get_double("landslide_threshold", rc.landslide_threshold);
  rc.primary = ev.get_bool("primary", rc.primary);
  rc.weak_label_side = data_side_from_string(ev.get_string("weak_label_side", "test"));

  rc.out_dir = resolve(base, ini.section("output").get_string("dir", "out"));

  ini.check_strict({"data", "model", "fit", "split", "run", "eval", "output"});

  if (seed) rc.seed = *seed;
  if (out) rc.out_dir = *out;
  rc.fit.seed = rc.seed;
  rc.fit.validate();
  if (rc.split_mode && !(rc.train_frac > 0.0 && rc.train_frac < 1.0)) {
    throw ConfigError("[split] train_frac must lie strictly between 0 and 1");
  }
  if (!(rc.landslide_threshold > 0.5 && rc.landslide_threshold <= 1.0)) {
    throw ConfigError("[eval] landslide_threshold must lie in (0.5, 1]");
  }

  const bool raw = !rc.results.empty() || !rc.voters.empty() || !rc.feature_spec.empty();
  if (raw) {
    if (rc.results.empty() || rc.voters.empty() || rc.feature_spec.empty()) {
      throw ConfigError("[data] needs results, voters and feature_spec together");
    }
    require_exists(rc.results, "results file");
    require_exists(rc.voters, "voter file");
    require_exists(rc.feature_spec, "feature spec");
  }
  if (!rc.synthetic.empty()) require_exists(rc.synthetic, "synthetic spec");
  if (!raw && rc.synthetic.empty()) {
    throw ConfigError("[data] needs either a synthetic spec or results/voters/feature_spec");
  }

  rc.digest = sha256_hex(ini.canonical() + "run.seed(effective)=" + std::to_string(rc.seed) + "\n");
  return rc;
}

Dataset load_run_dataset(const RunConfig& config) {
  if (fs::exists(config.cache_path())) return load_dataset(config.cache_path());
  if (!config.synthetic.empty()) {
    return generate_synthetic(load_synth_spec(config.synthetic), config.seed).dataset;
  }
  const auto results = load_precinct_results(config.results, config.candidates);
  const auto voters = load_voter_file(config.voters, load_feature_spec(config.feature_spec));
  return binarize_and_join(results, voters).dataset;
}

json cmd_ingest(const RunConfig& config) {
  if (config.results.empty()) {
    throw ConfigError("ingest needs [data] results, voters and feature_spec");
  }
  const auto results = load_precinct_results(config.results, config.candidates);
  const auto spec = load_feature_spec(config.feature_spec);
  const auto voters = load_voter_file(config.voters, spec);
  auto joined = binarize_and_join(results, voters);
  const auto& rep = joined.report;

  json dropped = json::array();
  for (const auto& d : rep.dropped) {
    dropped.push_back({{"county", d.key.county},
                       {"precinct", d.key.precinct},
                       {"reason", d.reason},
                       {"voters", d.voters},
                       {"votes", d.votes}});
  }
  json ratios = json::array();
  double lo = 0.0;
  double hi = 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < rep.mismatch_ratios.size(); ++i) {
    const auto& [key, ratio] = rep.mismatch_ratios[i];
    ratios.push_back({{"county", key.county}, {"precinct", key.precinct}, {"ratio", ratio}});
    lo = i == 0 ? ratio : std::min(lo, ratio);
    hi = i == 0 ? ratio : std::max(hi, ratio);
    sum += ratio;
  }
  json scaling = json::array();
  for (const auto& s : joined.dataset.scaling) {
    scaling.push_back({{"name", s.name}, {"center", s.center}, {"divisor", s.divisor}});
  }
  json report = {
      {"config_digest", config.digest},
      {"results_precincts", rep.results_precincts},
      {"voter_rows_read", voters.rows_read},
      {"voter_rows_filtered", voters.rows_filtered},
      {"voter_records", rep.voter_rows},
      {"retained_precincts", rep.retained_precincts},
      {"retained_voters", rep.retained_voters},
      {"dropped_precincts", rep.dropped.size()},
      {"dropped_voters", rep.dropped_voters},
      {"dropped", dropped},
      {"feature_names", joined.dataset.feature_names},
      {"scaling", scaling},
      {"mismatch_ratio",
       {{"min", lo},
        {"max", hi},
        {"mean", ratios.empty() ? 0.0 : sum / static_cast<double>(ratios.size())},
        {"per_precinct", ratios}}}};

  fs::create_directories(config.out_dir);
  write_json(report, config.out_dir / "ingest_report.json");
  if (joined.dataset.precincts.empty()) {
    throw InputError("no precincts retained after joining results and voter file");
  }
  save_dataset(joined.dataset, config.cache_path());
  return report;
}

json cmd_simulate(const RunConfig& config) {
  if (config.synthetic.empty()) throw ConfigError("simulate needs [data] synthetic");
  const auto spec = load_synth_spec(config.synthetic);
  const auto election = generate_synthetic(spec, config.seed);
  const auto& ds = election.dataset;
  fs::create_directories(config.out_dir);
  save_dataset(ds, config.cache_path());

  json truth = params_to_json(election.truth);
  truth["config_digest"] = config.digest;
  write_json(truth, config.out_dir / "true_params.json");

  // The same election as raw CSVs, so the ingest path can be exercised on it.
  std::ostringstream results;
  results << "county,precinct,candidate,votes\n";
  std::ostringstream voters;
  voters << "county,precinct,voter_id";
  for (const auto& f : ds.feature_names) voters << ',' << f;
  voters << ",primary\n";
  for (const auto& p : ds.precincts) {
    const std::string prefix = csv_escape(p.key.county) + "," + csv_escape(p.key.precinct) + ",";
    results << prefix << csv_escape(config.candidates.dem) << ',' << p.D << '\n';
    results << prefix << csv_escape(config.candidates.rep) << ',' << (p.T - p.D) << '\n';
    for (std::size_t i = 0; i < p.n_voters(); ++i) {
      voters << prefix << csv_escape(p.voter_ids[i]);
      for (Eigen::Index c = 0; c < p.X.cols(); ++c) {
        voters << ',' << fmt17(p.X(static_cast<Eigen::Index>(i), c));
      }
      const PrimaryTag tag = p.tags.empty() ? PrimaryTag::none : p.tags[i];
      voters << ',' << (tag == PrimaryTag::dem_primary ? "D" : tag == PrimaryTag::rep_primary ? "R" : "")
             << '\n';
    }
  }
  write_text(results.str(), config.out_dir / "synthetic_results.csv");
  write_text(voters.str(), config.out_dir / "synthetic_voters.csv");
  std::ostringstream features;
  features << "[features]\norder = ";
  for (std::size_t i = 0; i < ds.feature_names.size(); ++i) {
    features << (i ? ", " : "") << ds.feature_names[i];
  }
  features << "\n\n[tags]\ncolumn = primary\ndem_values = D\nrep_values = R\n";
  for (const auto& f : ds.feature_names) {
    features << "\n[feature." << f << "]\nkind = numeric\ncolumn = " << f << "\n";
  }
  write_text(features.str(), config.out_dir / "synthetic_features.ini");

  json report = {{"config_digest", config.digest},
                 {"precincts", ds.precincts.size()},
                 {"voters", ds.total_voters()},
                 {"votes", ds.total_votes()},
                 {"feature_names", ds.feature_names},
                 {"true_params", params_to_json(election.truth)}};
  write_json(report, config.out_dir / "simulate_report.json");
  return report;
}

FitReport cmd_fit(const RunConfig& config) {
  const Dataset all = load_run_dataset(config);
  validate_dataset(all);
  const Sides sides = make_sides(config, all);

  std::ostringstream r2_tsv;
  r2_tsv << "# config_digest=" << config.digest << "\nepoch\ttrain_r2\ttest_r2\n";
  json r2_curve = json::array();
  const auto on_epoch = [&](std::size_t epoch, const ModelParams& params) {
    const auto train_r2 = try_r2(sides.train, params);
    const auto test_r2 = try_r2(sides.test, params);
    r2_curve.push_back({{"epoch", epoch}, {"train_r2", nullable(train_r2)},
                        {"test_r2", nullable(test_r2)}});
    r2_tsv << epoch << '\t' << (train_r2 ? fmt17(*train_r2) : "nan") << '\t'
           << (test_r2 ? fmt17(*test_r2) : "nan") << '\n';
  };
  const FitReport report = fit(sides.train, config.kind, config.fit, on_epoch);

  fs::create_directories(config.out_dir);
  json doc = fit_report_to_json(report, config.fit);
  doc["config_digest"] = config.digest;
  doc["model_kind"] = to_string(config.kind);
  doc["split"] = {{"mode", split_name(config.split_mode)},
                  {"train_precincts", sides.train.precincts.size()},
                  {"test_precincts", sides.test.precincts.size()}};
  doc["r2_curve"] = r2_curve;
  write_json(doc, config.out_dir / "fit_report.json");

  json params = params_to_json(report.params);
  params["config_digest"] = config.digest;
  params["feature_names"] = all.feature_names;
  write_json(params, config.out_dir / "params.json");

  std::ostringstream loss;
  loss << "# config_digest=" << config.digest << "\nepoch\tapprox_nll\texact_nll\tapprox_nll_subsample\n";
  for (std::size_t e = 0; e < report.epochs_run; ++e) {
    loss << (e + 1) << '\t' << fmt17(report.approx_nll[e]) << '\t'
         << (report.exact_nll ? fmt17((*report.exact_nll)[e]) : "nan") << '\t'
         << (report.approx_nll_subsample ? fmt17((*report.approx_nll_subsample)[e]) : "nan")
         << '\n';
  }
  write_text(loss.str(), config.out_dir / "loss.tsv");
  write_text(r2_tsv.str(), config.out_dir / "r2.tsv");

  json train_keys = json::array();
  json test_keys = json::array();
  for (auto i : sides.indices.train) train_keys.push_back(key_json(all.precincts[i].key));
  for (auto i : sides.indices.test) test_keys.push_back(key_json(all.precincts[i].key));
  write_json({{"config_digest", config.digest},
              {"mode", split_name(config.split_mode)},
              {"train", train_keys},
              {"test", test_keys}},
             config.out_dir / "split.json");
  return report;
}

json cmd_evaluate(const RunConfig& config, const fs::path& params_file) {
  require_exists(params_file, "parameter file");
  const Dataset all = load_run_dataset(config);
  validate_dataset(all);
  const ModelParams params = read_params(params_file, all);
  const Sides sides = make_sides(config, all);

  auto side_json = [&](const Dataset& ds) -> json {
    if (ds.precincts.empty()) return nullptr;
    return {{"precincts", ds.precincts.size()},
            {"weighted_r2", nullable(try_r2(ds, params))},
            {"approx_nll", dataset_loss(ds, params, false)}};
  };
  json doc = {{"config_digest", config.digest},
              {"params_file", params_file.string()},
              {"split", split_name(config.split_mode)},
              {"train", side_json(sides.train)},
              {"test", side_json(sides.test)},
              {"all", side_json(all)}};

  const Dataset& weak = pick_side(sides, all, config.weak_label_side);
  fs::create_directories(config.out_dir);
  if (config.landslide) {
    const auto rep = landslide_report(weak, params, config.landslide_threshold);
    doc["landslide"] = to_json(rep);
    doc["landslide"]["threshold"] = config.landslide_threshold;
    write_text("# config_digest=" + config.digest + "\n" + to_tsv(rep),
               config.out_dir / "landslide_hist.tsv");
  }
  if (config.primary) {
    const auto rep = primary_voter_report(weak, params);
    doc["primary"] = to_json(rep);
    write_text("# config_digest=" + config.digest + "\n" + to_tsv(rep),
               config.out_dir / "primary_hist.tsv");
  }
  write_json(doc, config.out_dir / "evaluation.json");
  return doc;
}

std::size_t cmd_predict(const RunConfig& config, const fs::path& params_file, DataSide side,
                        const fs::path& dest) {
  require_exists(params_file, "parameter file");
  const Dataset all = load_run_dataset(config);
  validate_dataset(all);
  const ModelParams params = read_params(params_file, all);
  const Sides sides = side == DataSide::all ? Sides{} : make_sides(config, all);
  if (!dest.parent_path().empty()) fs::create_directories(dest.parent_path());
  return export_predictions(pick_side(sides, all, side), params, dest);
}

std::vector<double> parse_prob_list(const std::string& text) {
  std::string cleaned = text;
  for (char& ch : cleaned) {
    if (ch == ',' || ch == '[' || ch == ']' || ch == ';' || ch == '\n' || ch == '\t' || ch == '\r') {
      ch = ' ';
    }
  }
  std::istringstream in(cleaned);
  std::vector<double> out;
  std::string token;
  while (in >> token) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v)) {
      throw InputError("malformed probability '" + token + "'");
    }
    if (v < 0.0 || v > 1.0) throw InputError("probability " + token + " is outside [0, 1]");
    out.push_back(v);
  }
  if (out.empty()) throw InputError("probability list is empty");
  return out;
}

std::string cmd_poibin(const PoibinQuery& query) {
  const SuccessProbVector p(query.probs);
  auto wants = [&](const char* name) {
    if (query.what.empty()) return true;
    return std::find(query.what.begin(), query.what.end(), name) != query.what.end();
  };
  for (const auto& w : query.what) {
    if (w != "pmf" && w != "cdf" && w != "moments" && w != "lyapunov" && w != "loglik") {
      throw InputError("unknown poibin quantity '" + w + "'");
    }
  }
  if (query.k && *query.k > p.size()) {
    throw InputError("k = " + std::to_string(*query.k) + " exceeds n = " + std::to_string(p.size()));
  }

  std::ostringstream out;
  out << "n = " << p.size() << '\n';
  const auto mom = moments(p);
  if (query.k) {
    const std::size_t k = *query.k;
    if (wants("pmf")) out << "pmf(" << k << ") = " << fmt12(pmf_dft(p, k)) << '\n';
    if (wants("cdf")) out << "cdf(" << k << ") = " << fmt12(cdf_dft(p, k)) << '\n';
    if (wants("loglik")) {
      const auto ex = loglik_exact(p, k);
      out << "loglik_exact(" << k << ") = " << (ex.underflow ? "underflow" : fmt12(ex.value)) << '\n';
      out << "loglik_normal(" << k << ") = "
          << (mom.variance > 0.0 ? fmt12(loglik_normal(p, static_cast<double>(k)))
                                 : std::string("undefined (zero variance)"))
          << '\n';
    }
  } else if (wants("pmf") || wants("cdf")) {
    const auto pmf = pmf_dft_all(p);
    out << "k\tpmf\tcdf\n";
    double acc = 0.0;
    for (std::size_t k = 0; k < pmf.size(); ++k) {
      acc += pmf[k];
      out << k << '\t' << fmt12(pmf[k]) << '\t' << fmt12(std::min(acc, 1.0)) << '\n';
    }
  }
  if (wants("moments")) {
    out << "mean = " << fmt12(mom.mean) << '\n';
    out << "variance = " << fmt12(mom.variance) << '\n';
  }
  if (wants("lyapunov")) {
    out << "lyapunov = "
        << (mom.variance > 0.0 ? fmt12(lyapunov_ratio(p)) : std::string("undefined (zero variance)"))
        << '\n';
  }
  return out.str();
}

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const InputError*>(&error) != nullptr) return 2;
  if (dynamic_cast<const fs::filesystem_error*>(&error) != nullptr) return 2;
  return 1;
}

}  // namespace pbglm
