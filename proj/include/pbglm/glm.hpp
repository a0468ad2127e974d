#pragma once

// Link functions from voter covariates to success probabilities, and the
// analytic gradients of the per-precinct normal-approximation log-likelihood.
//
// Sign convention: every gradient here is the gradient of the log-likelihood,
// i.e. an ascent direction. The trainer negates nothing; it adds.

#include <cstddef>
#include <variant>

#include <Eigen/Dense>

#include "pbglm/poibin.hpp"
#include "pbglm/precinct.hpp"

namespace pbglm {

enum class ModelKind { logistic, neural };

// theta(0) is the intercept; theta(1..d) multiply the covariates.
struct LogisticParams {
  Eigen::VectorXd theta;
};

// p = sigmoid(w2 . sigmoid(w1 x + b1) + b2), one output unit.
struct NeuralParams {
  Eigen::MatrixXd w1;  // h x d
  Eigen::VectorXd b1;  // h
  Eigen::VectorXd w2;  // h
  double b2 = 0.0;

  std::size_t hidden_size() const { return static_cast<std::size_t>(w1.rows()); }
};

using ModelParams = std::variant<LogisticParams, NeuralParams>;

// Same shape as the parameters it differentiates.
using PrecinctGradient = ModelParams;

// Probabilities are clamped to this band before forming the variance so that
// saturated sigmoids cannot produce an exactly zero variance.
inline constexpr double kProbFloor = 1e-12;

double sigmoid(double z);

ModelKind kind_of(const ModelParams& params);

// Covariate dimension d the parameters expect (excluding the intercept).
std::size_t input_dim(const ModelParams& params);

double predict_logistic(const LogisticParams& params, const Eigen::Ref<const Eigen::VectorXd>& x);

struct NeuralForward {
  Eigen::VectorXd hidden;
  double prob = 0.5;
};

NeuralForward forward_neural(const NeuralParams& params, const Eigen::Ref<const Eigen::VectorXd>& x);
double predict_neural(const NeuralParams& params, const Eigen::Ref<const Eigen::VectorXd>& x);

// Per-voter probabilities in voter-file order. Throws ShapeError on a
// covariate dimension mismatch.
Eigen::VectorXd voter_probs(const ModelParams& params, const Precinct& precinct);
SuccessProbVector precinct_probs(const ModelParams& params, const Precinct& precinct);

// Normal-approximation log-likelihood of the precinct's count, probabilities
// clamped to [kProbFloor, 1 - kProbFloor] for the variance. Throws
// DegenerateError for a precinct without voters.
double precinct_loglik_normal(const ModelParams& params, const Precinct& precinct);

// d loglik / d p_j for one voter, given the precinct's count, mean and variance.
double dloss_dp(double p_j, double count, double mu, double var);

PrecinctGradient grad_logistic(const LogisticParams& params, const Precinct& precinct);
PrecinctGradient grad_neural(const NeuralParams& params, const Precinct& precinct);
PrecinctGradient gradient(const ModelParams& params, const Precinct& precinct);

// Flat views used by the optimizer. Layout: logistic theta; neural w1 (row-major),
// b1, w2, b2.
Eigen::VectorXd flatten(const ModelParams& params);
ModelParams unflatten_like(const ModelParams& shape, const Eigen::VectorXd& flat);

// 1 for entries subject to weight decay, 0 for the intercept and biases.
Eigen::VectorXd penalty_mask(const ModelParams& params);

}  // namespace pbglm
