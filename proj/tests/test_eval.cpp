#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "catch_amalgamated.hpp"
#include "oracles.hpp"
#include "pbglm/errors.hpp"
#include "pbglm/eval.hpp"
#include "pbglm/synthetic.hpp"

using Catch::Matchers::WithinAbs;
using pbglm::LogisticParams;
using pbglm::PrecinctPrediction;
namespace fs = std::filesystem;

namespace {

PrecinctPrediction pred(double predicted, double actual, double weight) {
  return {{"C", "P"}, predicted, actual, weight};
}

// Direct two-pass evaluation of the weighted R^2 definition.
double r2_oracle(const std::vector<PrecinctPrediction>& preds) {
  double wsum = 0.0;
  double wa = 0.0;
  for (const auto& p : preds) {
    wsum += p.weight;
    wa += p.weight * p.actual_share;
  }
  const double mean = wa / wsum;
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (const auto& p : preds) {
    ss_res += p.weight * (p.actual_share - p.predicted_share) * (p.actual_share - p.predicted_share);
    ss_tot += p.weight * (p.actual_share - mean) * (p.actual_share - mean);
  }
  return 1.0 - ss_res / ss_tot;
}

pbglm::Dataset two_landslides() {
  pbglm::Dataset ds;
  ds.feature_names = {"x"};
  pbglm::Precinct dem;
  dem.key = {"C", "DEM"};
  dem.X = Eigen::MatrixXd::Constant(4, 1, 1.0);
  dem.T = 100;
  dem.D = 95;
  dem.voter_ids = {"a", "b", "c", "d"};
  dem.tags = {pbglm::PrimaryTag::dem_primary, pbglm::PrimaryTag::dem_primary,
              pbglm::PrimaryTag::none, pbglm::PrimaryTag::rep_primary};
  pbglm::Precinct rep = dem;
  rep.key = {"C", "REP"};
  rep.X = Eigen::MatrixXd::Constant(3, 1, -1.0);
  rep.D = 5;
  rep.voter_ids = {"e", "f", "g"};
  rep.tags = {pbglm::PrimaryTag::rep_primary, pbglm::PrimaryTag::none, pbglm::PrimaryTag::none};
  pbglm::Precinct mid = dem;
  mid.key = {"C", "MID"};
  mid.D = 50;
  mid.tags.assign(4, pbglm::PrimaryTag::none);
  ds.precincts = {dem, rep, mid};
  return ds;
}

}  // namespace

TEST_CASE("r2_weighted", "[eval]") {
  const std::vector<PrecinctPrediction> hand = {pred(0.4, 0.5, 100), pred(0.6, 0.55, 200),
                                                pred(0.3, 0.2, 50)};
  CHECK_THAT(pbglm::r2_weighted(hand), WithinAbs(41.0 / 69.0, 1e-12));
  CHECK_THAT(pbglm::r2_weighted(hand), WithinAbs(r2_oracle(hand), 1e-12));

  auto perfect = hand;
  for (auto& p : perfect) p.predicted_share = p.actual_share;
  CHECK(pbglm::r2_weighted(perfect) == 1.0);

  auto constant = hand;
  const double mean = (0.5 * 100 + 0.55 * 200 + 0.2 * 50) / 350.0;
  for (auto& p : constant) p.predicted_share = mean;
  CHECK_THAT(pbglm::r2_weighted(constant), WithinAbs(0.0, 1e-12));

  CHECK_THROWS_AS(pbglm::r2_weighted(std::vector<PrecinctPrediction>{}), pbglm::DomainError);
  const std::vector<PrecinctPrediction> flat = {pred(0.1, 0.4, 1), pred(0.9, 0.4, 3)};
  CHECK_THROWS_AS(pbglm::r2_weighted(flat), pbglm::DomainError);

  SECTION("weight scale invariance and upper bound") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<PrecinctPrediction> preds;
      for (int k = 0; k < 10; ++k) preds.push_back(pred(u(rng), u(rng), 1.0 + 100.0 * u(rng)));
      const double base = pbglm::r2_weighted(preds);
      CHECK(base <= 1.0);
      CHECK_THAT(base, WithinAbs(r2_oracle(preds), 1e-12));
      auto scaled = preds;
      for (auto& p : scaled) p.weight *= 37.5;
      CHECK_THAT(pbglm::r2_weighted(scaled), WithinAbs(base, 1e-12));
    }
  }
}

TEST_CASE("precinct_predictions", "[eval]") {
  const auto ds = two_landslides();
  Eigen::VectorXd theta(2);
  theta << 0.0, 1.0;
  const auto preds = pbglm::precinct_predictions(ds, LogisticParams{theta});
  REQUIRE(preds.size() == 3);
  CHECK_THAT(preds[0].predicted_share, WithinAbs(oracle::logistic(1.0), 1e-15));
  CHECK(preds[0].actual_share == 0.95);
  CHECK(preds[0].weight == 100.0);
}

TEST_CASE("r2 of the generating parameters beats zero parameters", "[eval]") {
  pbglm::SynthSpec spec;
  spec.precincts = 200;
  spec.voters_min = spec.voters_max = 100;
  const auto e = pbglm::generate_synthetic(spec, 5);
  const double truth = pbglm::r2_weighted(pbglm::precinct_predictions(e.dataset, e.truth));
  const double zero = pbglm::r2_weighted(
      pbglm::precinct_predictions(e.dataset, LogisticParams{Eigen::VectorXd::Zero(4)}));
  CHECK(truth >= zero);
  CHECK(zero <= 0.0);
}

TEST_CASE("histogram_bin", "[eval]") {
  CHECK(pbglm::histogram_bin(0.0) == 0);
  CHECK(pbglm::histogram_bin(0.049) == 0);
  CHECK(pbglm::histogram_bin(0.05) == 1);
  CHECK(pbglm::histogram_bin(0.5) == 10);
  CHECK(pbglm::histogram_bin(1.0) == 19);
}

TEST_CASE("landslide_report", "[eval]") {
  const auto ds = two_landslides();
  const auto half = pbglm::landslide_report(ds, LogisticParams{Eigen::VectorXd::Zero(2)});
  REQUIRE(half.groups.size() == 2);
  CHECK(half.groups[0].name == "dem_landslide");
  CHECK(half.groups[0].size == 4);
  CHECK(half.groups[1].size == 3);
  CHECK(half.groups[0].mean == 0.5);
  CHECK(half.groups[1].mean == 0.5);
  CHECK(half.groups[0].histogram[10] == 4);
  CHECK_FALSE(half.has_empty_group());

  Eigen::VectorXd theta(2);
  theta << 0.0, 3.0;
  const auto strong = pbglm::landslide_report(ds, LogisticParams{theta});
  CHECK(strong.groups[0].mean - strong.groups[1].mean >= 0.4);
  for (const auto& g : strong.groups) {
    std::size_t mass = 0;
    for (auto c : g.histogram) mass += c;
    CHECK(mass == g.size);
  }

  const auto none = pbglm::landslide_report(ds, LogisticParams{theta}, 0.99);
  CHECK(none.has_empty_group());
  CHECK(std::isnan(none.groups[0].mean));
  CHECK_THROWS_AS(pbglm::landslide_report(ds, LogisticParams{theta}, 0.5), pbglm::DomainError);
}

TEST_CASE("primary_voter_report", "[eval]") {
  const auto ds = two_landslides();
  const auto half = pbglm::primary_voter_report(ds, LogisticParams{Eigen::VectorXd::Zero(2)});
  REQUIRE(half.groups.size() == 2);
  CHECK(half.groups[0].name == "dem_primary");
  CHECK(half.groups[0].size == 2);
  CHECK(half.groups[1].size == 2);
  CHECK(half.groups[0].mean == 0.5);
  CHECK(half.groups[1].mean == 0.5);

  Eigen::VectorXd theta(2);
  theta << 0.0, 2.0;
  const auto r = pbglm::primary_voter_report(ds, LogisticParams{theta});
  // dem tags sit at x = 1; rep tags at x = 1 and x = -1.
  CHECK_THAT(r.groups[0].mean, WithinAbs(oracle::logistic(2.0), 1e-15));
  CHECK_THAT(r.groups[1].mean, WithinAbs(0.5 * (oracle::logistic(2.0) + oracle::logistic(-2.0)), 1e-15));

  auto untagged = ds;
  for (auto& p : untagged.precincts) p.tags.clear();
  CHECK(pbglm::primary_voter_report(untagged, LogisticParams{theta}).has_empty_group());

  const auto json = pbglm::to_json(r);
  CHECK(json.at("group_sizes").at("dem_primary") == 2);
  CHECK(json.at("histograms").at("rep_primary").size() == pbglm::kHistogramBins);
  CHECK(json.at("bin_width") == pbglm::kHistogramBinWidth);
  const auto tsv = pbglm::to_tsv(r);
  CHECK(tsv.rfind("bin_lower\tbin_upper\tdem_primary\trep_primary\n", 0) == 0);
  CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 21);
}

TEST_CASE("export_predictions", "[eval]") {
  const auto dir = fs::temp_directory_path() / "pbglm_test_eval";
  fs::create_directories(dir);
  const auto ds = two_landslides();
  const auto path = dir / "preds.csv";
  CHECK(pbglm::export_predictions(ds, LogisticParams{Eigen::VectorXd::Zero(2)}, path) == 11);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "county,precinct,voter_id,probability");
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(line.ends_with(",0.500000"));
  }
  CHECK(rows == ds.total_voters());

  pbglm::Dataset empty;
  empty.feature_names = {"x"};
  const auto empty_path = dir / "empty.csv";
  CHECK(pbglm::export_predictions(empty, LogisticParams{Eigen::VectorXd::Zero(2)}, empty_path) == 0);
  std::ifstream e(empty_path);
  std::string header;
  std::getline(e, header);
  CHECK(header == "county,precinct,voter_id,probability");
  CHECK_FALSE(std::getline(e, header));

  CHECK_THROWS_AS(pbglm::export_predictions(ds, LogisticParams{Eigen::VectorXd::Zero(2)},
                                            dir / "no_dir" / "x.csv"),
                  pbglm::FileError);
}
