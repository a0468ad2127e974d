#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace pbglm {

struct PrecinctKey {
  std::string county;
  std::string precinct;

  auto operator<=>(const PrecinctKey&) const = default;
};

enum class PrimaryTag : std::uint8_t { none = 0, dem_primary = 1, rep_primary = 2 };

// One aggregation unit: the covariates of every voter-file row assigned to it
// and the binarized outcome, D modeled-candidate votes out of T.
struct Precinct {
  PrecinctKey key;
  Eigen::MatrixXd X;  // voters x d, voter-file order
  std::vector<std::string> voter_ids;
  std::vector<PrimaryTag> tags;  // empty when the source carries no tags
  std::size_t D = 0;
  std::size_t T = 0;

  std::size_t n_voters() const { return static_cast<std::size_t>(X.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(X.cols()); }

  // Voter-file rows per recorded vote. 1.0 when the two agree.
  double mismatch_ratio() const {
    return T == 0 ? 0.0 : static_cast<double>(n_voters()) / static_cast<double>(T);
  }
};

}  // namespace pbglm
