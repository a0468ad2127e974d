#pragma once

// Poisson binomial distribution: the law of a sum of independent Bernoulli
// variables with unequal success probabilities.

#include <cstddef>
#include <span>
#include <vector>

namespace pbglm {

// Per-individual success probabilities for one aggregation unit.
// Non-empty, every entry in [0, 1].
class SuccessProbVector {
 public:
  explicit SuccessProbVector(std::vector<double> probs);

  std::span<const double> values() const { return probs_; }
  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }

 private:
  std::vector<double> probs_;
};

struct PoibinMoments {
  double mean = 0.0;
  double variance = 0.0;
};

// Largest n accepted by pmf_enumerate. C(20, 10) subsets is the practical limit.
inline constexpr std::size_t kEnumerationCap = 20;

// Value reported by loglik_exact when the probability of the count is zero.
inline constexpr double kLogLikUnderflow = -1e30;

// Brute-force PMF: sums the product over every k-subset. Test oracle only.
// Throws DomainError if k > n and CapacityError if n > cap.
double pmf_enumerate(const SuccessProbVector& p, std::size_t k,
                     std::size_t cap = kEnumerationCap);

// PMF from the characteristic function evaluated at the n+1 roots of unity
// and inverted with a discrete Fourier transform. O(n) per count once the
// characteristic values are known, O(n^2) overall. Clamped to [0, 1].
double pmf_dft(const SuccessProbVector& p, std::size_t k);

// Whole PMF, entries k = 0..n.
std::vector<double> pmf_dft_all(const SuccessProbVector& p);

// P(S <= k), from pmf_dft_all, clamped to [0, 1].
double cdf_dft(const SuccessProbVector& p, std::size_t k);

struct ExactLogLik {
  double value = 0.0;
  // Set when the count has probability zero; value is then kLogLikUnderflow.
  bool underflow = false;
};

// log P(S = count). The DFT is applied to an exponentially tilted copy of the
// distribution whose mean sits at `count`, so counts deep in the tails keep
// full relative precision instead of drowning in DFT roundoff.
ExactLogLik loglik_exact(const SuccessProbVector& p, std::size_t count);

PoibinMoments moments(const SuccessProbVector& p);

// Gaussian log-density of `count` under N(mean, variance) from moments(p),
// without the -0.5*log(2*pi) constant. Throws DegenerateError on zero variance.
double loglik_normal(const SuccessProbVector& p, double count);

// Fourth-moment Lyapunov ratio
//   sum p(1-p)(3p^2-3p+1) / (sum p(1-p))^2.
// Small values mean the normal approximation can be trusted.
double lyapunov_ratio(const SuccessProbVector& p);

// N(mean, variance) density at x.
double normal_density(double x, double mean, double variance);

}  // namespace pbglm
