#include "pbglm/glm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pbglm/errors.hpp"

namespace pbglm {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void check_dim(std::size_t expected, std::size_t got) {
  if (expected != got) {
    throw ShapeError("covariate dimension mismatch: model expects " +
                     std::to_string(expected) + ", data has " + std::to_string(got));
  }
}

void check_neural_shape(const NeuralParams& params) {
  const auto h = params.w1.rows();
  if (params.b1.size() != h || params.w2.size() != h) {
    throw ShapeError("neural parameter blocks have inconsistent hidden sizes");
  }
}

struct PrecinctStats {
  double mu = 0.0;
  double var = 0.0;
};

PrecinctStats stats_of(const Eigen::VectorXd& probs) {
  PrecinctStats s;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double p = probs(i);
    const double pc = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
    s.mu += p;
    s.var += pc * (1.0 - pc);
  }
  return s;
}

void require_voters(const Precinct& precinct) {
  if (precinct.n_voters() == 0) {
    throw DegenerateError("precinct " + precinct.key.county + "/" +
                          precinct.key.precinct + " has no voters");
  }
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

ModelKind kind_of(const ModelParams& params) {
  return std::holds_alternative<LogisticParams>(params) ? ModelKind::logistic
                                                        : ModelKind::neural;
}

std::size_t input_dim(const ModelParams& params) {
  return std::visit(
      overloaded{
          [](const LogisticParams& lp) -> std::size_t {
            return lp.theta.size() == 0 ? 0 : static_cast<std::size_t>(lp.theta.size() - 1);
          },
          [](const NeuralParams& np) -> std::size_t {
            return static_cast<std::size_t>(np.w1.cols());
          }},
      params);
}

double predict_logistic(const LogisticParams& params,
                        const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (params.theta.size() == 0) throw ShapeError("logistic parameters are empty");
  check_dim(static_cast<std::size_t>(params.theta.size() - 1), static_cast<std::size_t>(x.size()));
  return sigmoid(params.theta(0) + params.theta.tail(x.size()).dot(x));
}

NeuralForward forward_neural(const NeuralParams& params,
                             const Eigen::Ref<const Eigen::VectorXd>& x) {
  check_neural_shape(params);
  check_dim(static_cast<std::size_t>(params.w1.cols()), static_cast<std::size_t>(x.size()));
  NeuralForward out;
  out.hidden = (params.w1 * x + params.b1).unaryExpr([](double z) { return sigmoid(z); });
  out.prob = sigmoid(params.w2.dot(out.hidden) + params.b2);
  return out;
}

double predict_neural(const NeuralParams& params, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return forward_neural(params, x).prob;
}

Eigen::VectorXd voter_probs(const ModelParams& params, const Precinct& precinct) {
  check_dim(input_dim(params), precinct.dim());
  const auto n = static_cast<Eigen::Index>(precinct.n_voters());
  Eigen::VectorXd probs(n);
  std::visit(overloaded{[&](const LogisticParams& lp) {
                          for (Eigen::Index i = 0; i < n; ++i) {
                            probs(i) = predict_logistic(lp, precinct.X.row(i).transpose());
                          }
                        },
                        [&](const NeuralParams& np) {
                          for (Eigen::Index i = 0; i < n; ++i) {
                            probs(i) = predict_neural(np, precinct.X.row(i).transpose());
                          }
                        }},
             params);
  return probs;
}

SuccessProbVector precinct_probs(const ModelParams& params, const Precinct& precinct) {
  const Eigen::VectorXd probs = voter_probs(params, precinct);
  return SuccessProbVector(std::vector<double>(probs.data(), probs.data() + probs.size()));
}

double precinct_loglik_normal(const ModelParams& params, const Precinct& precinct) {
  require_voters(precinct);
  const auto s = stats_of(voter_probs(params, precinct));
  const double resid = static_cast<double>(precinct.D) - s.mu;
  return -0.5 * std::log(s.var) - resid * resid / (2.0 * s.var);
}

double dloss_dp(double p_j, double count, double mu, double var) {
  const double resid = count - mu;
  return (-1.0 + 2.0 * p_j) / (2.0 * var) +
         (1.0 - 2.0 * p_j) / (2.0 * var * var) * resid * resid + resid / var;
}

PrecinctGradient grad_logistic(const LogisticParams& params, const Precinct& precinct) {
  require_voters(precinct);
  const Eigen::VectorXd probs = voter_probs(params, precinct);
  const auto s = stats_of(probs);
  const auto d = static_cast<Eigen::Index>(precinct.dim());

  // mean_grad = sum p(1-p) x, var_grad_part = sum (2p-1)(1-p)p x, intercept included.
  Eigen::VectorXd mean_grad = Eigen::VectorXd::Zero(d + 1);
  Eigen::VectorXd var_part = Eigen::VectorXd::Zero(d + 1);
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double p = probs(i);
    const double w = p * (1.0 - p);
    const double v = (2.0 * p - 1.0) * w;
    mean_grad(0) += w;
    var_part(0) += v;
    mean_grad.tail(d) += w * precinct.X.row(i).transpose();
    var_part.tail(d) += v * precinct.X.row(i).transpose();
  }

  const double resid = static_cast<double>(precinct.D) - s.mu;
  const double var = s.var;
  LogisticParams g;
  g.theta = (resid / var) * mean_grad -
            0.5 * (resid * resid / (var * var) - 1.0 / var) * var_part;
  return g;
}

PrecinctGradient grad_neural(const NeuralParams& params, const Precinct& precinct) {
  require_voters(precinct);
  check_neural_shape(params);
  check_dim(static_cast<std::size_t>(params.w1.cols()), precinct.dim());
  const auto n = static_cast<Eigen::Index>(precinct.n_voters());
  const auto h = params.w1.rows();

  std::vector<NeuralForward> fwd;
  fwd.reserve(static_cast<std::size_t>(n));
  Eigen::VectorXd probs(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    fwd.push_back(forward_neural(params, precinct.X.row(j).transpose()));
    probs(j) = fwd.back().prob;
  }
  const auto s = stats_of(probs);
  const double count = static_cast<double>(precinct.D);

  NeuralParams g;
  g.w1 = Eigen::MatrixXd::Zero(h, params.w1.cols());
  g.b1 = Eigen::VectorXd::Zero(h);
  g.w2 = Eigen::VectorXd::Zero(h);
  g.b2 = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double p = probs(j);
    // delta = dl/dp_j * p_j (1 - p_j): gradient at the output pre-activation.
    const double delta = dloss_dp(p, count, s.mu, s.var) * p * (1.0 - p);
    const Eigen::VectorXd& hid = fwd[static_cast<std::size_t>(j)].hidden;
    g.b2 += delta;
    g.w2 += delta * hid;
    const Eigen::VectorXd back =
        (delta * params.w2).cwiseProduct(hid.cwiseProduct(Eigen::VectorXd::Ones(h) - hid));
    g.b1 += back;
    g.w1 += back * precinct.X.row(j);
  }
  return g;
}

PrecinctGradient gradient(const ModelParams& params, const Precinct& precinct) {
  return std::visit(
      overloaded{[&](const LogisticParams& lp) { return grad_logistic(lp, precinct); },
                 [&](const NeuralParams& np) { return grad_neural(np, precinct); }},
      params);
}

Eigen::VectorXd flatten(const ModelParams& params) {
  return std::visit(
      overloaded{[](const LogisticParams& lp) -> Eigen::VectorXd { return lp.theta; },
                 [](const NeuralParams& np) -> Eigen::VectorXd {
                   const auto h = np.w1.rows();
                   const auto d = np.w1.cols();
                   Eigen::VectorXd flat(h * d + 2 * h + 1);
                   Eigen::Index at = 0;
                   for (Eigen::Index r = 0; r < h; ++r) {
                     for (Eigen::Index c = 0; c < d; ++c) flat(at++) = np.w1(r, c);
                   }
                   flat.segment(at, h) = np.b1;
                   at += h;
                   flat.segment(at, h) = np.w2;
                   at += h;
                   flat(at) = np.b2;
                   return flat;
                 }},
      params);
}

ModelParams unflatten_like(const ModelParams& shape, const Eigen::VectorXd& flat) {
  const auto expected = flatten(shape).size();
  if (flat.size() != expected) {
    throw ShapeError("flat parameter vector has " + std::to_string(flat.size()) +
                     " entries, expected " + std::to_string(expected));
  }
  return std::visit(
      overloaded{[&](const LogisticParams&) -> ModelParams { return LogisticParams{flat}; },
                 [&](const NeuralParams& np) -> ModelParams {
                   const auto h = np.w1.rows();
                   const auto d = np.w1.cols();
                   NeuralParams out;
                   out.w1.resize(h, d);
                   Eigen::Index at = 0;
                   for (Eigen::Index r = 0; r < h; ++r) {
                     for (Eigen::Index c = 0; c < d; ++c) out.w1(r, c) = flat(at++);
                   }
                   out.b1 = flat.segment(at, h);
                   at += h;
                   out.w2 = flat.segment(at, h);
                   at += h;
                   out.b2 = flat(at);
                   return out;
                 }},
      shape);
}

Eigen::VectorXd penalty_mask(const ModelParams& params) {
  return std::visit(
      overloaded{[](const LogisticParams& lp) -> Eigen::VectorXd {
                   Eigen::VectorXd m = Eigen::VectorXd::Ones(lp.theta.size());
                   if (m.size() > 0) m(0) = 0.0;
                   return m;
                 },
                 [](const NeuralParams& np) -> Eigen::VectorXd {
                   const auto h = np.w1.rows();
                   const auto d = np.w1.cols();
                   Eigen::VectorXd m = Eigen::VectorXd::Zero(h * d + 2 * h + 1);
                   m.head(h * d).setOnes();
                   m.segment(h * d + h, h).setOnes();
                   return m;
                 }},
      params);
}

}  // namespace pbglm
