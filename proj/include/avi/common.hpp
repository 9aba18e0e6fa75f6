#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace avi {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Unconstrained variational parameters for one ERP site.
using ParamVector = Eigen::VectorXd;

// Thrown when parameters are malformed (wrong length, non-finite, out of
// the family's natural domain).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when the trace structure is inconsistent: an address reused with a
// different ERP family, or a trace referencing an address the store does
// not know.
class StructureError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Thrown when a linear solve or a gradient computation produced a
// non-finite result despite regularization.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kLog2Pi = 1.8378770664093454836;

inline bool all_finite(const Vec& v) { return v.allFinite(); }

inline double log_sum_exp(const Vec& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

// log(1 + e^x) without overflow.
inline double log1p_exp(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Digamma via recurrence into the asymptotic region; ~1e-12 accurate for
// x > 0, which is all the gradient code needs.
inline double digamma(double x) {
  if (!(x > 0)) throw ParameterError("digamma: requires x > 0");
  double result = 0.0;
  while (x < 6.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  result += std::log(x) - 0.5 * inv -
            inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 / 240)));
  return result;
}

// ---------------------------------------------------------------------------
// Random streams.
//
// Every rollout gets its own engine derived from (seed, tag, a, b) so that
// batches are reproducible independent of execution order. splitmix64 is
// used as the mixing function.
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Rng make_stream(uint64_t seed, uint64_t tag, uint64_t a = 0, uint64_t b = 0) {
  uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ splitmix64(tag));
  s = splitmix64(s ^ splitmix64(a));
  s = splitmix64(s ^ splitmix64(b));
  return Rng(s);
}

// Uniform on (0,1); never returns 0 or 1 exactly.
inline double uniform01(Rng& rng) {
  const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
  return u;
}

// Standard normal via Box-Muller. One value per call; no engine-external
// state, so streams stay reproducible.
inline double standard_normal(Rng& rng) {
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Gamma(shape, 1) via Marsaglia-Tsang, with the shape<1 boost
// G(k) = G(k+1) * U^(1/k).
inline double standard_gamma(Rng& rng, double shape) {
  if (!(shape > 0)) throw ParameterError("standard_gamma: shape must be > 0");
  if (shape < 1.0) {
    const double u = uniform01(rng);
    return standard_gamma(rng, shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = standard_normal(rng);
    double v = 1.0 + c * x;
    if (v <= 0) continue;
    v = v * v * v;
    const double u = uniform01(rng);
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

}  // namespace avi
