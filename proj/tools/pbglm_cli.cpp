// pbglm: fit Poisson binomial GLMs to aggregate count data.
//
//   pbglm ingest   --config run.ini
//   pbglm simulate --config run.ini
//   pbglm fit      --config run.ini [--seed N] [--out DIR]
//   pbglm evaluate --config run.ini [--params FILE]
//   pbglm predict  --config run.ini [--params FILE] [--side all|train|test] [--dest FILE]
//   pbglm poibin   --p 0.2,0.7 [--k 1] [--what pmf,cdf,moments,lyapunov,loglik]

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "pbglm/errors.hpp"
#include "pbglm/run.hpp"

namespace fs = std::filesystem;

namespace {

struct GlobalOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

pbglm::RunConfig run_config(const GlobalOptions& g) {
  if (g.config.empty()) throw pbglm::ConfigError("--config is required for this command");
  std::optional<fs::path> out;
  if (!g.out.empty()) out = fs::path(g.out);
  return pbglm::load_run_config(g.config, g.seed, out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Poisson binomial GLMs for ecological inference"};
  app.require_subcommand(1);
  GlobalOptions global;
  app.add_option("--config", global.config, "Run configuration (INI)");
  app.add_option("--seed", global.seed, "Override the run seed");
  app.add_option("--out", global.out, "Override the output directory");

  auto* ingest = app.add_subcommand("ingest", "Load and join the CSVs, write the dataset cache");
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic election");
  auto* fit = app.add_subcommand("fit", "Split, train, and write the fit report and parameters");
  auto* evaluate = app.add_subcommand("evaluate", "Weighted R^2, losses and weak-label reports");
  auto* predict = app.add_subcommand("predict", "Per-voter probabilities as CSV");
  auto* poibin = app.add_subcommand("poibin", "Poisson binomial PMF, CDF, moments and diagnostics");

  std::string params_file;
  evaluate->add_option("--params", params_file, "Parameter file (default <out>/params.json)");
  predict->add_option("--params", params_file, "Parameter file (default <out>/params.json)");
  std::string side = "all";
  std::string dest;
  predict->add_option("--side", side, "all, train or test");
  predict->add_option("--dest", dest, "Output CSV (default <out>/predictions.csv)");

  std::string prob_text;
  std::string prob_file;
  std::optional<std::size_t> k;
  std::string what;
  poibin->add_option("--p", prob_text, "Comma-separated success probabilities");
  poibin->add_option("--p-file", prob_file, "File of success probabilities");
  poibin->add_option("--k", k, "Count at which to evaluate pmf/cdf/loglik");
  poibin->add_option("--what", what, "Comma-separated subset of pmf,cdf,moments,lyapunov,loglik");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*poibin) {
      pbglm::PoibinQuery q;
      if (!prob_file.empty()) {
        std::ifstream in(prob_file);
        if (!in) throw pbglm::FileError("cannot open " + prob_file);
        std::stringstream buf;
        buf << in.rdbuf();
        prob_text += " " + buf.str();
      }
      q.probs = pbglm::parse_prob_list(prob_text);
      q.k = k;
      std::stringstream items(what);
      std::string item;
      while (std::getline(items, item, ',')) {
        if (!item.empty()) q.what.push_back(item);
      }
      std::cout << pbglm::cmd_poibin(q);
      return 0;
    }

    const pbglm::RunConfig rc = run_config(global);
    const fs::path params = params_file.empty() ? rc.out_dir / "params.json" : fs::path(params_file);
    if (*ingest) {
      const auto report = pbglm::cmd_ingest(rc);
      std::cout << "retained " << report["retained_precincts"] << " precincts, dropped "
                << report["dropped_precincts"] << "; wrote " << (rc.out_dir / "ingest_report.json").string()
                << '\n';
    } else if (*simulate) {
      const auto report = pbglm::cmd_simulate(rc);
      std::cout << "simulated " << report["precincts"] << " precincts, " << report["voters"]
                << " voters into " << rc.out_dir.string() << '\n';
    } else if (*fit) {
      const auto report = pbglm::cmd_fit(rc);
      std::cout << "fit " << report.epochs_run << " epochs";
      if (!report.approx_nll.empty()) std::cout << ", final approx NLL " << report.approx_nll.back();
      std::cout << "; wrote " << (rc.out_dir / "params.json").string() << '\n';
    } else if (*evaluate) {
      const auto doc = pbglm::cmd_evaluate(rc, params);
      std::cout << doc["train"].dump() << '\n' << doc["test"].dump() << '\n';
    } else if (*predict) {
      const fs::path target = dest.empty() ? rc.out_dir / "predictions.csv" : fs::path(dest);
      const auto rows = pbglm::cmd_predict(rc, params, pbglm::data_side_from_string(side), target);
      std::cout << "wrote " << rows << " predictions to " << target.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return pbglm::exit_code_for(e);
  }
  return 0;
}
