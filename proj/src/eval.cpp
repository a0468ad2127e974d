#include "pbglm/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "pbglm/csv.hpp"
#include "pbglm/errors.hpp"

namespace pbglm {

namespace {

void add(WeakLabelGroup& g, double prob, double& sum) {
  ++g.size;
  sum += prob;
  ++g.histogram[histogram_bin(prob)];
}

void finish(WeakLabelGroup& g, double sum) {
  g.mean = g.size == 0 ? std::numeric_limits<double>::quiet_NaN()
                       : sum / static_cast<double>(g.size);
}

}  // namespace

std::vector<PrecinctPrediction> precinct_predictions(const Dataset& dataset,
                                                     const ModelParams& params) {
  std::vector<PrecinctPrediction> out;
  out.reserve(dataset.precincts.size());
  for (const auto& p : dataset.precincts) {
    if (p.T == 0 || p.n_voters() == 0) continue;
    const Eigen::VectorXd probs = voter_probs(params, p);
    out.push_back({p.key, probs.mean(),
                   static_cast<double>(p.D) / static_cast<double>(p.T),
                   static_cast<double>(p.T)});
  }
  return out;
}

double r2_weighted(std::span<const PrecinctPrediction> preds) {
  if (preds.empty()) throw DomainError("weighted R^2 needs at least one precinct");
  double wsum = 0.0;
  double wmean = 0.0;
  for (const auto& p : preds) {
    wsum += p.weight;
    wmean += p.weight * p.actual_share;
  }
  wmean /= wsum;
  double resid = 0.0;
  double total = 0.0;
  bool varied = false;
  for (const auto& p : preds) {
    resid += p.weight * (p.actual_share - p.predicted_share) * (p.actual_share - p.predicted_share);
    total += p.weight * (p.actual_share - wmean) * (p.actual_share - wmean);
    varied = varied || p.actual_share != preds.front().actual_share;
  }
  if (!varied || !(total > 0.0)) {
    throw DomainError("weighted R^2 is undefined when every actual share is identical");
  }
  return 1.0 - resid / total;
}

bool WeakLabelReport::has_empty_group() const {
  for (const auto& g : groups) {
    if (g.size == 0) return true;
  }
  return false;
}

std::size_t histogram_bin(double prob) {
  const auto bin = static_cast<std::size_t>(std::floor(prob / kHistogramBinWidth));
  return std::min(bin, kHistogramBins - 1);
}

WeakLabelReport landslide_report(const Dataset& dataset, const ModelParams& params,
                                 double threshold) {
  if (!(threshold > 0.5 && threshold <= 1.0)) {
    throw DomainError("landslide threshold must lie in (0.5, 1]");
  }
  WeakLabelReport report;
  report.groups = {WeakLabelGroup{"dem_landslide"}, WeakLabelGroup{"rep_landslide"}};
  double sums[2] = {0.0, 0.0};
  for (const auto& p : dataset.precincts) {
    if (p.T == 0 || p.n_voters() == 0) continue;
    const double share = static_cast<double>(p.D) / static_cast<double>(p.T);
    int group = -1;
    if (share >= threshold) {
      group = 0;
    } else if (share <= 1.0 - threshold) {
      group = 1;
    }
    if (group < 0) continue;
    const Eigen::VectorXd probs = voter_probs(params, p);
    for (Eigen::Index i = 0; i < probs.size(); ++i) add(report.groups[group], probs(i), sums[group]);
  }
  finish(report.groups[0], sums[0]);
  finish(report.groups[1], sums[1]);
  return report;
}

WeakLabelReport primary_voter_report(const Dataset& dataset, const ModelParams& params) {
  WeakLabelReport report;
  report.groups = {WeakLabelGroup{"dem_primary"}, WeakLabelGroup{"rep_primary"}};
  double sums[2] = {0.0, 0.0};
  for (const auto& p : dataset.precincts) {
    if (p.tags.empty() || p.n_voters() == 0) continue;
    const Eigen::VectorXd probs = voter_probs(params, p);
    for (std::size_t i = 0; i < p.tags.size(); ++i) {
      const auto idx = static_cast<Eigen::Index>(i);
      if (p.tags[i] == PrimaryTag::dem_primary) add(report.groups[0], probs(idx), sums[0]);
      if (p.tags[i] == PrimaryTag::rep_primary) add(report.groups[1], probs(idx), sums[1]);
    }
  }
  finish(report.groups[0], sums[0]);
  finish(report.groups[1], sums[1]);
  return report;
}

std::size_t export_predictions(const Dataset& dataset, const ModelParams& params,
                               const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot write predictions to " + path.string());
  out << "county,precinct,voter_id,probability\n";
  std::size_t rows = 0;
  char buf[32];
  for (const auto& p : dataset.precincts) {
    if (p.n_voters() == 0) continue;
    const Eigen::VectorXd probs = voter_probs(params, p);
    const std::string prefix = csv_escape(p.key.county) + "," + csv_escape(p.key.precinct) + ",";
    for (std::size_t i = 0; i < p.n_voters(); ++i) {
      std::snprintf(buf, sizeof buf, "%.6f", probs(static_cast<Eigen::Index>(i)));
      const std::string id = i < p.voter_ids.size() ? p.voter_ids[i] : std::to_string(i + 1);
      out << prefix << csv_escape(id) << ',' << buf << '\n';
      ++rows;
    }
  }
  out.flush();
  if (!out) throw FileError("failed writing predictions to " + path.string());
  return rows;
}

nlohmann::json to_json(const WeakLabelReport& report) {
  nlohmann::json means = nlohmann::json::object();
  nlohmann::json hists = nlohmann::json::object();
  nlohmann::json sizes = nlohmann::json::object();
  for (const auto& g : report.groups) {
    means[g.name] = std::isnan(g.mean) ? nlohmann::json(nullptr) : nlohmann::json(g.mean);
    hists[g.name] = g.histogram;
    sizes[g.name] = g.size;
  }
  return {{"group_means", means},
          {"histograms", hists},
          {"group_sizes", sizes},
          {"bin_width", kHistogramBinWidth},
          {"empty_group", report.has_empty_group()}};
}

std::string to_tsv(const WeakLabelReport& report) {
  std::ostringstream out;
  out << "bin_lower\tbin_upper";
  for (const auto& g : report.groups) out << '\t' << g.name;
  out << '\n';
  char buf[64];
  for (std::size_t b = 0; b < kHistogramBins; ++b) {
    std::snprintf(buf, sizeof buf, "%.2f\t%.2f", static_cast<double>(b) * kHistogramBinWidth,
                  static_cast<double>(b + 1) * kHistogramBinWidth);
    out << buf;
    for (const auto& g : report.groups) out << '\t' << g.histogram[b];
    out << '\n';
  }
  return out.str();
}

}  // namespace pbglm
