#include "pbglm/model_io.hpp"

#include <fstream>

#include "pbglm/errors.hpp"

namespace pbglm {

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd from_vec(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json params_to_json(const ModelParams& params) {
  if (const auto* lp = std::get_if<LogisticParams>(&params)) {
    return {{"kind", "logistic"}, {"theta", to_vec(lp->theta)}};
  }
  const auto& np = std::get<NeuralParams>(params);
  std::vector<std::vector<double>> w1;
  for (Eigen::Index r = 0; r < np.w1.rows(); ++r) {
    w1.push_back(to_vec(np.w1.row(r).transpose()));
  }
  return {{"kind", "neural"},
          {"hidden_size", np.hidden_size()},
          {"w1", w1},
          {"b1", to_vec(np.b1)},
          {"w2", to_vec(np.w2)},
          {"b2", np.b2}};
}

ModelParams params_from_json(const nlohmann::json& doc) {
  try {
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "logistic") {
      auto theta = doc.at("theta").get<std::vector<double>>();
      if (theta.size() < 2) throw FormatError("logistic theta needs at least two entries");
      return LogisticParams{from_vec(theta)};
    }
    if (kind != "neural") throw FormatError("unknown parameter kind '" + kind + "'");
    const auto w1 = doc.at("w1").get<std::vector<std::vector<double>>>();
    NeuralParams np;
    np.b1 = from_vec(doc.at("b1").get<std::vector<double>>());
    np.w2 = from_vec(doc.at("w2").get<std::vector<double>>());
    np.b2 = doc.at("b2").get<double>();
    const auto h = static_cast<Eigen::Index>(w1.size());
    const auto d = h == 0 ? 0 : static_cast<Eigen::Index>(w1.front().size());
    if (h == 0 || d == 0 || np.b1.size() != h || np.w2.size() != h) {
      throw FormatError("neural parameter blocks have inconsistent shapes");
    }
    np.w1.resize(h, d);
    for (Eigen::Index r = 0; r < h; ++r) {
      if (static_cast<Eigen::Index>(w1[r].size()) != d) {
        throw FormatError("neural w1 rows have unequal lengths");
      }
      for (Eigen::Index c = 0; c < d; ++c) np.w1(r, c) = w1[r][c];
    }
    return np;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed parameter document: ") + e.what());
  }
}

nlohmann::json fit_config_to_json(const FitConfig& config) {
  return {{"learning_rate", config.learning_rate},
          {"anneal_exponent", config.anneal_exponent},
          {"epochs", config.epochs},
          {"clip_norm", config.clip_norm},
          {"skip_norm", config.skip_norm},
          {"l2_lambda", config.l2_lambda},
          {"hidden_size", config.hidden_size},
          {"seed", config.seed},
          {"track_exact_loss", config.track_exact_loss},
          {"exact_loss_subsample", config.exact_loss_subsample},
          {"update_mode", to_string(config.update_mode)}};
}

nlohmann::json fit_report_to_json(const FitReport& report, const FitConfig& config) {
  nlohmann::json doc = {{"approx_nll", report.approx_nll},
                        {"exact_nll", nullptr},
                        {"epochs_run", report.epochs_run},
                        {"clipped_count", report.clipped_count},
                        {"skipped_count", report.skipped_count},
                        {"degenerate_skips", report.degenerate_skips},
                        {"exact_underflows", report.exact_underflows},
                        {"wall_time_s", report.wall_time_s},
                        {"params", params_to_json(report.params)},
                        {"fit_config", fit_config_to_json(config)}};
  if (report.exact_nll) {
    doc["exact_nll"] = *report.exact_nll;
    doc["approx_nll_subsample"] = *report.approx_nll_subsample;
    doc["exact_subsample_size"] = report.exact_subsample.size();
  }
  return doc;
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json(const nlohmann::json& doc, const std::filesystem::path& path) {
  write_text(doc.dump(2) + "\n", path);
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FileError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw FileError("failed writing " + path.string());
}

}  // namespace pbglm
