#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <variant>

#include "avi/common.hpp"

namespace avi {

// ---------------------------------------------------------------------------
// ERP families.
//
// Each family supports sampling, log-density and log-density gradients with
// respect to an *unconstrained* parameter vector:
//
//   Normal       (mean, log sigma)
//   Bernoulli    (logit)
//   Categorical  (logits, one per outcome; one redundant degree of freedom)
//   Beta         (log a, log b)
//   Gamma        (log shape, log rate)
//   Dirichlet    (log concentration, one per component)
//   Uniform      fixed support [lo, hi]; variational family is a Beta
//                affinely scaled to [lo, hi], parameters (log a, log b).
//                A parameter-dependent support would break the score
//                identity, so the support is part of the family, not of
//                the parameters.
//
// "Natural" parameters are the conventional ones a model program passes
// (Normal: mean/std, Bernoulli: p, Categorical: probabilities, Beta: a/b,
// Gamma: shape/rate, Dirichlet: concentrations, Uniform: none).
// ---------------------------------------------------------------------------

enum class ErpKind {
  Normal,
  Bernoulli,
  Categorical,
  Beta,
  Gamma,
  Dirichlet,
  UniformFixedSupport,
};

inline const char* erp_kind_name(ErpKind k) {
  switch (k) {
    case ErpKind::Normal: return "normal";
    case ErpKind::Bernoulli: return "bernoulli";
    case ErpKind::Categorical: return "categorical";
    case ErpKind::Beta: return "beta";
    case ErpKind::Gamma: return "gamma";
    case ErpKind::Dirichlet: return "dirichlet";
    case ErpKind::UniformFixedSupport: return "uniform";
  }
  return "?";
}

struct ErpFamily {
  ErpKind kind = ErpKind::Normal;
  int dim = 1;             // outcomes (Categorical) or components (Dirichlet)
  double support_lo = 0.0; // UniformFixedSupport only
  double support_hi = 1.0;

  static ErpFamily normal() { return {ErpKind::Normal, 1}; }
  static ErpFamily bernoulli() { return {ErpKind::Bernoulli, 1}; }
  static ErpFamily categorical(int k) {
    if (k < 1) throw ParameterError("categorical: need at least 1 outcome");
    return {ErpKind::Categorical, k};
  }
  static ErpFamily beta() { return {ErpKind::Beta, 1}; }
  static ErpFamily gamma() { return {ErpKind::Gamma, 1}; }
  static ErpFamily dirichlet(int k) {
    if (k < 1) throw ParameterError("dirichlet: need at least 1 component");
    return {ErpKind::Dirichlet, k};
  }
  static ErpFamily uniform(double lo, double hi) {
    if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
      throw ParameterError("uniform: requires finite hi > lo");
    return {ErpKind::UniformFixedSupport, 1, lo, hi};
  }

  // Count of unconstrained variational parameters.
  int arity() const {
    switch (kind) {
      case ErpKind::Normal: return 2;
      case ErpKind::Bernoulli: return 1;
      case ErpKind::Categorical: return dim;
      case ErpKind::Beta: return 2;
      case ErpKind::Gamma: return 2;
      case ErpKind::Dirichlet: return dim;
      case ErpKind::UniformFixedSupport: return 2;
    }
    return 0;
  }

  bool operator==(const ErpFamily& o) const {
    if (kind != o.kind || dim != o.dim) return false;
    if (kind == ErpKind::UniformFixedSupport)
      return support_lo == o.support_lo && support_hi == o.support_hi;
    return true;
  }
  bool operator!=(const ErpFamily& o) const { return !(*this == o); }

  std::string name() const {
    std::string s = erp_kind_name(kind);
    if (kind == ErpKind::Categorical || kind == ErpKind::Dirichlet)
      s += ":" + std::to_string(dim);
    if (kind == ErpKind::UniformFixedSupport) {
      char buf[80];
      std::snprintf(buf, sizeof buf, ":%.17g:%.17g", support_lo, support_hi);
      s += buf;
    }
    return s;
  }
};

// Value drawn from an ERP: a real scalar, a category index, or a simplex
// vector (Dirichlet).
class ErpValue {
 public:
  ErpValue() : v_(0.0) {}

  static ErpValue real(double x) { return ErpValue(x); }
  static ErpValue index(int i) {
    ErpValue v;
    v.v_ = i;
    return v;
  }
  static ErpValue simplex(Vec x) {
    if (x.minCoeff() < 0 || std::abs(x.sum() - 1.0) > 1e-12)
      throw ParameterError("simplex value: entries must be >= 0 and sum to 1");
    ErpValue v;
    v.v_ = std::move(x);
    return v;
  }

  bool is_real() const { return std::holds_alternative<double>(v_); }
  bool is_index() const { return std::holds_alternative<int>(v_); }
  bool is_simplex() const { return std::holds_alternative<Vec>(v_); }

  double as_real() const {
    if (!is_real()) throw ParameterError("ErpValue: not a real scalar");
    return std::get<double>(v_);
  }
  int as_index() const {
    if (!is_index()) throw ParameterError("ErpValue: not a category index");
    return std::get<int>(v_);
  }
  const Vec& as_simplex() const {
    if (!is_simplex()) throw ParameterError("ErpValue: not a simplex vector");
    return std::get<Vec>(v_);
  }

  bool operator==(const ErpValue& o) const { return v_ == o.v_; }

 private:
  explicit ErpValue(double x) : v_(x) {}
  std::variant<double, int, Vec> v_;
};

namespace detail {

inline void check_params(const ErpFamily& f, const ParamVector& p, const char* who) {
  if (p.size() != f.arity())
    throw ParameterError(std::string(who) + ": parameter length " +
                         std::to_string(p.size()) + " != arity " +
                         std::to_string(f.arity()) + " for " + f.name());
  if (!all_finite(p))
    throw ParameterError(std::string(who) + ": non-finite parameters for " + f.name());
}

inline double beta_log_pdf(double x, double a, double b) {
  if (!(x > 0.0 && x < 1.0)) return kNegInf;
  return (a - 1) * std::log(x) + (b - 1) * std::log1p(-x) -
         (std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b));
}

// d/d(log a), d/d(log b) of beta_log_pdf.
inline Vec beta_grad(double x, double a, double b) {
  const double dab = digamma(a + b);
  Vec g(2);
  g[0] = a * (std::log(x) - digamma(a) + dab);
  g[1] = b * (std::log1p(-x) - digamma(b) + dab);
  return g;
}

inline double clamp_unit(double x) {
  return std::clamp(x, 1e-12, 1.0 - 1e-12);
}

}  // namespace detail

// Sample from the family under unconstrained parameters.
inline ErpValue sample(const ErpFamily& f, const ParamVector& p, Rng& rng) {
  detail::check_params(f, p, "sample");
  switch (f.kind) {
    case ErpKind::Normal:
      return ErpValue::real(p[0] + std::exp(p[1]) * standard_normal(rng));
    case ErpKind::Bernoulli:
      return ErpValue::index(uniform01(rng) < sigmoid(p[0]) ? 1 : 0);
    case ErpKind::Categorical: {
      const double lse = log_sum_exp(p);
      const double u = uniform01(rng);
      double acc = 0.0;
      for (int i = 0; i < f.dim; ++i) {
        acc += std::exp(p[i] - lse);
        if (u < acc) return ErpValue::index(i);
      }
      return ErpValue::index(f.dim - 1);
    }
    case ErpKind::Beta: {
      const double g1 = standard_gamma(rng, std::exp(p[0]));
      const double g2 = standard_gamma(rng, std::exp(p[1]));
      return ErpValue::real(detail::clamp_unit(g1 / (g1 + g2)));
    }
    case ErpKind::Gamma:
      return ErpValue::real(
          std::max(1e-300, standard_gamma(rng, std::exp(p[0])) / std::exp(p[1])));
    case ErpKind::Dirichlet: {
      Vec x(f.dim);
      for (int i = 0; i < f.dim; ++i)
        // floor guards against gamma underflow at tiny concentrations
        x[i] = std::max(1e-12, standard_gamma(rng, std::exp(p[i])));
      x /= x.sum();
      return ErpValue::simplex(std::move(x));
    }
    case ErpKind::UniformFixedSupport: {
      const double g1 = standard_gamma(rng, std::exp(p[0]));
      const double g2 = standard_gamma(rng, std::exp(p[1]));
      const double y = detail::clamp_unit(g1 / (g1 + g2));
      return ErpValue::real(f.support_lo + (f.support_hi - f.support_lo) * y);
    }
  }
  throw ParameterError("sample: unknown family");
}

// Log-density under unconstrained parameters. Values outside the support
// yield -inf, not an error.
inline double log_pdf(const ErpFamily& f, const ParamVector& p, const ErpValue& value) {
  detail::check_params(f, p, "log_pdf");
  switch (f.kind) {
    case ErpKind::Normal: {
      const double z = (value.as_real() - p[0]) / std::exp(p[1]);
      return -0.5 * kLog2Pi - p[1] - 0.5 * z * z;
    }
    case ErpKind::Bernoulli: {
      const int x = value.as_index();
      if (x != 0 && x != 1) return kNegInf;
      return x * p[0] - log1p_exp(p[0]);
    }
    case ErpKind::Categorical: {
      const int x = value.as_index();
      if (x < 0 || x >= f.dim) return kNegInf;
      return p[x] - log_sum_exp(p);
    }
    case ErpKind::Beta:
      return detail::beta_log_pdf(value.as_real(), std::exp(p[0]), std::exp(p[1]));
    case ErpKind::Gamma: {
      const double x = value.as_real();
      if (!(x > 0)) return kNegInf;
      const double k = std::exp(p[0]), r = std::exp(p[1]);
      return k * std::log(r) - std::lgamma(k) + (k - 1) * std::log(x) - r * x;
    }
    case ErpKind::Dirichlet: {
      const Vec& x = value.as_simplex();
      if (x.size() != f.dim) return kNegInf;
      const Vec alpha = p.array().exp();
      double s = std::lgamma(alpha.sum());
      for (int i = 0; i < f.dim; ++i) {
        if (!(x[i] > 0)) return kNegInf;
        s += (alpha[i] - 1) * std::log(x[i]) - std::lgamma(alpha[i]);
      }
      return s;
    }
    case ErpKind::UniformFixedSupport: {
      const double w = f.support_hi - f.support_lo;
      const double y = (value.as_real() - f.support_lo) / w;
      return detail::beta_log_pdf(y, std::exp(p[0]), std::exp(p[1])) - std::log(w);
    }
  }
  throw ParameterError("log_pdf: unknown family");
}

// Gradient of log_pdf with respect to the unconstrained parameters.
// Values outside the support are an error here: the score is undefined.
inline ParamVector grad_log_pdf(const ErpFamily& f, const ParamVector& p,
                                const ErpValue& value) {
  detail::check_params(f, p, "grad_log_pdf");
  if (log_pdf(f, p, value) == kNegInf)
    throw ParameterError("grad_log_pdf: value outside support of " + f.name());
  switch (f.kind) {
    case ErpKind::Normal: {
      const double sigma = std::exp(p[1]);
      const double z = (value.as_real() - p[0]) / sigma;
      Vec g(2);
      g[0] = z / sigma;
      g[1] = z * z - 1.0;
      return g;
    }
    case ErpKind::Bernoulli: {
      Vec g(1);
      g[0] = value.as_index() - sigmoid(p[0]);
      return g;
    }
    case ErpKind::Categorical: {
      const double lse = log_sum_exp(p);
      Vec g = -(p.array() - lse).exp();
      g[value.as_index()] += 1.0;
      return g;
    }
    case ErpKind::Beta:
      return detail::beta_grad(value.as_real(), std::exp(p[0]), std::exp(p[1]));
    case ErpKind::Gamma: {
      const double k = std::exp(p[0]), r = std::exp(p[1]);
      const double x = value.as_real();
      Vec g(2);
      g[0] = k * (std::log(r) - digamma(k) + std::log(x));
      g[1] = k - r * x;
      return g;
    }
    case ErpKind::Dirichlet: {
      const Vec& x = value.as_simplex();
      const Vec alpha = p.array().exp();
      const double d0 = digamma(alpha.sum());
      Vec g(f.dim);
      for (int i = 0; i < f.dim; ++i)
        g[i] = alpha[i] * (std::log(x[i]) + d0 - digamma(alpha[i]));
      return g;
    }
    case ErpKind::UniformFixedSupport: {
      const double w = f.support_hi - f.support_lo;
      const double y = (value.as_real() - f.support_lo) / w;
      return detail::beta_grad(y, std::exp(p[0]), std::exp(p[1]));
    }
  }
  throw ParameterError("grad_log_pdf: unknown family");
}

namespace detail {

inline void check_naturals(const ErpFamily& f, const Vec& n, int want, const char* who) {
  if (n.size() != want)
    throw ParameterError(std::string(who) + ": expected " + std::to_string(want) +
                         " natural parameters for " + f.name() + ", got " +
                         std::to_string(n.size()));
  if (!all_finite(n))
    throw ParameterError(std::string(who) + ": non-finite natural parameters");
}

inline int natural_arity(const ErpFamily& f) {
  switch (f.kind) {
    case ErpKind::Normal: return 2;      // mean, std
    case ErpKind::Bernoulli: return 1;   // p
    case ErpKind::Categorical: return f.dim;
    case ErpKind::Beta: return 2;        // a, b
    case ErpKind::Gamma: return 2;       // shape, rate
    case ErpKind::Dirichlet: return f.dim;
    case ErpKind::UniformFixedSupport: return 0;  // support lives in the family
  }
  return 0;
}

}  // namespace detail

// Map natural parameters to the unconstrained parameterization so that the
// initialized variational ERP reproduces the target distribution exactly.
inline ParamVector init_from_target(const ErpFamily& f, const Vec& naturals) {
  detail::check_naturals(f, naturals, detail::natural_arity(f), "init_from_target");
  switch (f.kind) {
    case ErpKind::Normal: {
      if (!(naturals[1] > 0))
        throw ParameterError("init_from_target: normal std must be > 0");
      Vec p(2);
      p[0] = naturals[0];
      p[1] = std::log(naturals[1]);
      return p;
    }
    case ErpKind::Bernoulli: {
      const double q = naturals[0];
      if (!(q > 0.0 && q < 1.0))
        throw ParameterError("init_from_target: bernoulli p must be in (0,1)");
      Vec p(1);
      p[0] = std::log(q) - std::log1p(-q);
      return p;
    }
    case ErpKind::Categorical: {
      if (naturals.minCoeff() <= 0 || std::abs(naturals.sum() - 1.0) > 1e-9)
        throw ParameterError(
            "init_from_target: categorical probabilities must be positive and sum to 1");
      return naturals.array().log();
    }
    case ErpKind::Beta:
    case ErpKind::Gamma:
    case ErpKind::Dirichlet:
      if (naturals.minCoeff() <= 0)
        throw ParameterError("init_from_target: natural parameters must be > 0 for " +
                             f.name());
      return naturals.array().log();
    case ErpKind::UniformFixedSupport:
      // Beta(1,1) scaled to [lo,hi] is the uniform target.
      return Vec::Zero(2);
  }
  throw ParameterError("init_from_target: unknown family");
}

// Log-density in the natural parameterization, tolerant of boundary values
// (e.g. a Bernoulli observation with p = 0). Used for the target side of a
// trace; for interior naturals it agrees with
// log_pdf(f, init_from_target(naturals), value).
inline double natural_log_pdf(const ErpFamily& f, const Vec& naturals,
                              const ErpValue& value) {
  detail::check_naturals(f, naturals, detail::natural_arity(f), "natural_log_pdf");
  switch (f.kind) {
    case ErpKind::Bernoulli: {
      const int x = value.as_index();
      if (x != 0 && x != 1) return kNegInf;
      const double q = naturals[0];
      if (q < 0 || q > 1) throw ParameterError("natural_log_pdf: bernoulli p outside [0,1]");
      return x ? std::log(q) : std::log1p(-q);
    }
    case ErpKind::Categorical: {
      const int x = value.as_index();
      if (x < 0 || x >= f.dim) return kNegInf;
      const double s = naturals.sum();
      if (naturals.minCoeff() < 0 || std::abs(s - 1.0) > 1e-9)
        throw ParameterError("natural_log_pdf: categorical probabilities invalid");
      return std::log(naturals[x]);
    }
    case ErpKind::UniformFixedSupport: {
      const double x = value.as_real();
      if (x < f.support_lo || x > f.support_hi) return kNegInf;
      return -std::log(f.support_hi - f.support_lo);
    }
    default:
      return log_pdf(f, init_from_target(f, naturals), value);
  }
}

// Sample in the natural parameterization (target-program semantics).
inline ErpValue natural_sample(const ErpFamily& f, const Vec& naturals, Rng& rng) {
  detail::check_naturals(f, naturals, detail::natural_arity(f), "natural_sample");
  switch (f.kind) {
    case ErpKind::Bernoulli: {
      const double q = naturals[0];
      if (q < 0 || q > 1) throw ParameterError("natural_sample: bernoulli p outside [0,1]");
      return ErpValue::index(uniform01(rng) < q ? 1 : 0);
    }
    case ErpKind::Categorical: {
      if (naturals.minCoeff() < 0 || std::abs(naturals.sum() - 1.0) > 1e-9)
        throw ParameterError("natural_sample: categorical probabilities invalid");
      const double u = uniform01(rng);
      double acc = 0.0;
      for (int i = 0; i < f.dim; ++i) {
        acc += naturals[i];
        if (u < acc) return ErpValue::index(i);
      }
      return ErpValue::index(f.dim - 1);
    }
    case ErpKind::UniformFixedSupport:
      return ErpValue::real(f.support_lo +
                            (f.support_hi - f.support_lo) * uniform01(rng));
    default:
      return sample(f, init_from_target(f, naturals), rng);
  }
}

}  // namespace avi
