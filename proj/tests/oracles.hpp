#pragma once

// Test-only reference computations, written independently of the library code
// paths they check.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "pbglm/glm.hpp"
#include "pbglm/precinct.hpp"

namespace oracle {

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double binomial_pmf(std::size_t n, std::size_t k, double q) {
  const double log_choose = std::lgamma(static_cast<double>(n) + 1.0) -
                            std::lgamma(static_cast<double>(k) + 1.0) -
                            std::lgamma(static_cast<double>(n - k) + 1.0);
  return std::exp(log_choose + static_cast<double>(k) * std::log(q) +
                  static_cast<double>(n - k) * std::log1p(-q));
}

// Plain-loop two-layer forward pass.
inline double neural_prob(const pbglm::NeuralParams& np, const std::vector<double>& x) {
  const auto h = static_cast<std::size_t>(np.w1.rows());
  double out = np.b2;
  for (std::size_t r = 0; r < h; ++r) {
    double z = np.b1(static_cast<Eigen::Index>(r));
    for (std::size_t c = 0; c < x.size(); ++c) {
      z += np.w1(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * x[c];
    }
    out += np.w2(static_cast<Eigen::Index>(r)) * logistic(z);
  }
  return logistic(out);
}

inline double logistic_prob(const Eigen::VectorXd& theta, const std::vector<double>& x) {
  double z = theta(0);
  for (std::size_t c = 0; c < x.size(); ++c) z += theta(static_cast<Eigen::Index>(c + 1)) * x[c];
  return logistic(z);
}

inline std::vector<double> row(const pbglm::Precinct& p, std::size_t i) {
  std::vector<double> x(p.dim());
  for (std::size_t c = 0; c < x.size(); ++c) {
    x[c] = p.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
  }
  return x;
}

// -log(sd) - (D - mu)^2 / (2 var), summed directly from the probabilities.
inline double gaussian_loglik(const std::vector<double>& probs, double count) {
  double mu = 0.0;
  double var = 0.0;
  for (double p : probs) {
    mu += p;
    var += p * (1.0 - p);
  }
  return -std::log(std::sqrt(var)) - (count - mu) * (count - mu) / (2.0 * var);
}

inline double model_loglik(const pbglm::ModelParams& params, const pbglm::Precinct& p) {
  std::vector<double> probs;
  for (std::size_t i = 0; i < p.n_voters(); ++i) {
    if (const auto* lp = std::get_if<pbglm::LogisticParams>(&params)) {
      probs.push_back(logistic_prob(lp->theta, row(p, i)));
    } else {
      probs.push_back(neural_prob(std::get<pbglm::NeuralParams>(params), row(p, i)));
    }
  }
  return gaussian_loglik(probs, static_cast<double>(p.D));
}

// Central differences of model_loglik over the flat parameter layout.
inline Eigen::VectorXd finite_difference(const pbglm::ModelParams& params,
                                         const pbglm::Precinct& p, double step = 1e-5) {
  const Eigen::VectorXd base = pbglm::flatten(params);
  Eigen::VectorXd grad(base.size());
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    Eigen::VectorXd up = base;
    Eigen::VectorXd down = base;
    up(i) += step;
    down(i) -= step;
    grad(i) = (model_loglik(pbglm::unflatten_like(params, up), p) -
               model_loglik(pbglm::unflatten_like(params, down), p)) /
              (2.0 * step);
  }
  return grad;
}

inline pbglm::Precinct random_precinct(std::mt19937_64& rng, std::size_t n, std::size_t d,
                                       double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  pbglm::Precinct p;
  p.key = {"C", "P"};
  p.X.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < p.X.rows(); ++r) {
    for (Eigen::Index c = 0; c < p.X.cols(); ++c) p.X(r, c) = normal(rng);
  }
  std::uniform_int_distribution<std::size_t> count(0, n);
  p.D = count(rng);
  p.T = n;
  for (std::size_t i = 0; i < n; ++i) p.voter_ids.push_back("v" + std::to_string(i));
  return p;
}

inline pbglm::NeuralParams random_neural(std::mt19937_64& rng, std::size_t h, std::size_t d,
                                         double scale = 0.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  pbglm::NeuralParams np;
  np.w1.resize(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(d));
  for (Eigen::Index r = 0; r < np.w1.rows(); ++r) {
    for (Eigen::Index c = 0; c < np.w1.cols(); ++c) np.w1(r, c) = u(rng);
  }
  np.b1.resize(static_cast<Eigen::Index>(h));
  np.w2.resize(static_cast<Eigen::Index>(h));
  for (Eigen::Index r = 0; r < np.b1.size(); ++r) {
    np.b1(r) = u(rng);
    np.w2(r) = u(rng);
  }
  np.b2 = u(rng);
  return np;
}

inline Eigen::VectorXd random_theta(std::mt19937_64& rng, std::size_t d, double scale = 0.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::VectorXd theta(static_cast<Eigen::Index>(d + 1));
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = u(rng);
  return theta;
}

// Componentwise check: |a - b| <= rel * max(|a|, |b|) or |a - b| <= abs_tol.
inline bool close(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double rel, double abs_tol) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double diff = std::abs(a(i) - b(i));
    const double mag = std::max(std::abs(a(i)), std::abs(b(i)));
    if (diff > rel * mag && diff > abs_tol) return false;
  }
  return true;
}

}  // namespace oracle
