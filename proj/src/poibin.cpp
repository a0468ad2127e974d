#include "pbglm/poibin.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string>

#include "pbglm/errors.hpp"

namespace pbglm {

namespace {

using cplx = std::complex<double>;

void check_count(const SuccessProbVector& p, std::size_t k) {
  if (k > p.size()) {
    throw DomainError("count " + std::to_string(k) + " outside [0, " +
                      std::to_string(p.size()) + "]");
  }
}

// Twiddle table exp(-2 pi i m / N) for m = 0..N-1.
std::vector<cplx> twiddles(std::size_t N) {
  std::vector<cplx> tw(N);
  const double omega = 2.0 * std::numbers::pi / static_cast<double>(N);
  for (std::size_t m = 0; m < N; ++m) {
    const double angle = omega * static_cast<double>(m);
    tw[m] = cplx(std::cos(angle), -std::sin(angle));
  }
  return tw;
}

// c_l = prod_j (1 - p_j + p_j e^{i omega l}), l = 0..n. Every factor has modulus
// at most one, so the running product can only underflow, and an underflowed
// c_l contributes below DFT roundoff anyway.
std::vector<cplx> characteristic_values(std::span<const double> p,
                                        const std::vector<cplx>& tw) {
  const std::size_t N = tw.size();
  std::vector<cplx> c(N);
  c[0] = cplx(1.0, 0.0);
  for (std::size_t l = 1; l <= N / 2; ++l) {
    const cplx z = std::conj(tw[l]);  // e^{+i omega l}
    cplx prod(1.0, 0.0);
    for (double pj : p) {
      prod *= cplx(1.0 - pj + pj * z.real(), pj * z.imag());
    }
    c[l] = prod;
    c[N - l] = std::conj(prod);
  }
  return c;
}

double invert_at(const std::vector<cplx>& c, const std::vector<cplx>& tw,
                 std::size_t k) {
  const std::size_t N = c.size();
  double acc = 0.0;
  for (std::size_t l = 0; l < N; ++l) {
    const cplx& w = tw[(l * k) % N];
    acc += c[l].real() * w.real() - c[l].imag() * w.imag();
  }
  return std::clamp(acc / static_cast<double>(N), 0.0, 1.0);
}

double sigmoid_local(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 - q + q e^s) without overflow for large |s|.
double log_tilt_factor(double q, double s) {
  if (s > 0.0) {
    return s + std::log(q + (1.0 - q) * std::exp(-s));
  }
  return std::log((1.0 - q) + q * std::exp(s));
}

// Log-tilt s such that sum_j sigmoid(logit(q_j) + s) = target, 0 < target < m.
double solve_tilt(const std::vector<double>& logits, double target) {
  auto mean_at = [&](double s) {
    double m = 0.0;
    for (double a : logits) m += sigmoid_local(a + s);
    return m;
  };
  double lo = -1.0;
  double hi = 1.0;
  while (mean_at(lo) > target) lo *= 2.0;
  while (mean_at(hi) < target) hi *= 2.0;
  double s = 0.0;
  if (s < lo || s > hi) s = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    double mean = 0.0;
    double slope = 0.0;
    for (double a : logits) {
      const double t = sigmoid_local(a + s);
      mean += t;
      slope += t * (1.0 - t);
    }
    const double resid = mean - target;
    if (resid > 0.0) {
      hi = s;
    } else {
      lo = s;
    }
    if (std::abs(resid) <= 1e-13 * std::max(1.0, target)) break;
    double next = s - resid / slope;
    if (!(next > lo && next < hi) || slope <= 0.0) next = 0.5 * (lo + hi);
    if (next == s) break;
    s = next;
  }
  return s;
}

}  // namespace

SuccessProbVector::SuccessProbVector(std::vector<double> probs)
    : probs_(std::move(probs)) {
  if (probs_.empty()) {
    throw DomainError("success probability vector must be non-empty");
  }
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    const double v = probs_[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError("success probability at index " + std::to_string(i) +
                        " is outside [0, 1]");
    }
  }
}

double pmf_enumerate(const SuccessProbVector& p, std::size_t k, std::size_t cap) {
  check_count(p, k);
  const std::size_t n = p.size();
  if (n > cap || n >= 64) {
    throw CapacityError("enumeration limited to n <= " + std::to_string(cap) +
                        ", got " + std::to_string(n));
  }
  double total = 0.0;
  const std::uint64_t limit = std::uint64_t{1} << n;
  for (std::uint64_t mask = 0; mask < limit; ++mask) {
    if (static_cast<std::size_t>(std::popcount(mask)) != k) continue;
    double prod = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      prod *= ((mask >> i) & 1U) ? p[i] : (1.0 - p[i]);
    }
    total += prod;
  }
  return total;
}

double pmf_dft(const SuccessProbVector& p, std::size_t k) {
  check_count(p, k);
  const auto tw = twiddles(p.size() + 1);
  const auto c = characteristic_values(p.values(), tw);
  return invert_at(c, tw, k);
}

std::vector<double> pmf_dft_all(const SuccessProbVector& p) {
  const auto tw = twiddles(p.size() + 1);
  const auto c = characteristic_values(p.values(), tw);
  std::vector<double> out(tw.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = invert_at(c, tw, k);
  return out;
}

double cdf_dft(const SuccessProbVector& p, std::size_t k) {
  check_count(p, k);
  const auto pmf = pmf_dft_all(p);
  double acc = 0.0;
  for (std::size_t i = 0; i <= k; ++i) acc += pmf[i];
  return std::clamp(acc, 0.0, 1.0);
}

ExactLogLik loglik_exact(const SuccessProbVector& p, std::size_t count) {
  check_count(p, count);

  // Entries equal to 0 or 1 are deterministic; only the interior ones vary.
  std::size_t ones = 0;
  std::vector<double> interior;
  interior.reserve(p.size());
  for (double v : p.values()) {
    if (v == 1.0) {
      ++ones;
    } else if (v > 0.0) {
      interior.push_back(v);
    }
  }
  if (count < ones || count - ones > interior.size()) {
    return {kLogLikUnderflow, true};
  }
  const std::size_t target = count - ones;
  const std::size_t m = interior.size();

  if (target == 0 || target == m) {
    double acc = 0.0;
    for (double q : interior) acc += (target == 0) ? std::log1p(-q) : std::log(q);
    return {acc, false};
  }

  std::vector<double> logits(m);
  for (std::size_t i = 0; i < m; ++i) {
    logits[i] = std::log(interior[i]) - std::log1p(-interior[i]);
  }
  const double s = solve_tilt(logits, static_cast<double>(target));

  std::vector<double> tilted(m);
  double log_norm = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    tilted[i] = std::clamp(sigmoid_local(logits[i] + s), 0.0, 1.0);
    log_norm += log_tilt_factor(interior[i], s);
  }
  const double centered = pmf_dft(SuccessProbVector(std::move(tilted)), target);
  if (centered <= 0.0) {
    return {kLogLikUnderflow, true};
  }
  return {std::log(centered) + log_norm - s * static_cast<double>(target), false};
}

PoibinMoments moments(const SuccessProbVector& p) {
  PoibinMoments out;
  for (double v : p.values()) {
    out.mean += v;
    out.variance += v * (1.0 - v);
  }
  return out;
}

double loglik_normal(const SuccessProbVector& p, double count) {
  const auto mom = moments(p);
  if (!(mom.variance > 0.0)) {
    throw DegenerateError("normal approximation needs positive variance");
  }
  const double resid = count - mom.mean;
  return -0.5 * std::log(mom.variance) - resid * resid / (2.0 * mom.variance);
}

double lyapunov_ratio(const SuccessProbVector& p) {
  double num = 0.0;
  double var = 0.0;
  for (double v : p.values()) {
    const double w = v * (1.0 - v);
    num += w * (3.0 * v * v - 3.0 * v + 1.0);
    var += w;
  }
  if (!(var > 0.0)) {
    throw DegenerateError("Lyapunov ratio needs positive variance");
  }
  return num / (var * var);
}

double normal_density(double x, double mean, double variance) {
  const double z = x - mean;
  return std::exp(-z * z / (2.0 * variance)) /
         std::sqrt(2.0 * std::numbers::pi * variance);
}

}  // namespace pbglm
