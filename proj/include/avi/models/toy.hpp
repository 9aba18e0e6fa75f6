#pragma once

#include <cmath>

#include "avi/trace.hpp"

namespace avi::models {

inline Vec vec1(double a) {
  Vec v(1);
  v[0] = a;
  return v;
}

inline Vec vec2(double a, double b) {
  Vec v(2);
  v[0] = a;
  v[1] = b;
  return v;
}

// ---------------------------------------------------------------------------
// Branching toy model (CLI name "fig1"):
//
//   m ~ normal(0, 1)
//   if m > 1:  x ~ normal(f(m), 1)     at "x_gauss"
//   else:      x ~ uniform(0, 1)       at "x_unif"
//   observe y ~ normal(x, 0.5)
//
// The deterministic nonlinearity f feeds a natural parameter only; under the
// mean-field transform its output is ignored by the sampler, so perturbing
// it changes rewards but never the sampled distribution. The branch keeps
// control-flow dependence alive: a trace holds {m, x_gauss} xor {m, x_unif}.
// ---------------------------------------------------------------------------

inline double branching_nonlinearity(double m) {
  return 2.0 * std::cos(3.0 * m) + 0.5 * m * m;
}

inline Program branching_program(double y_obs = 1.5,
                                 double (*nonlinearity)(double) = branching_nonlinearity) {
  return [y_obs, nonlinearity](ProgramContext& ctx) {
    const double m =
        ctx.sample_erp("m", ErpFamily::normal(), vec2(0.0, 1.0)).as_real();
    double x;
    if (m > 1.0) {
      const double mu = nonlinearity(m);
      x = ctx.sample_erp("x_gauss", ErpFamily::normal(), vec2(mu, 1.0)).as_real();
    } else {
      x = ctx.sample_erp("x_unif", ErpFamily::uniform(0.0, 1.0), Vec(0)).as_real();
    }
    ctx.observe(ErpFamily::normal(), vec2(x, 0.5), ErpValue::real(y_obs));
  };
}

// ---------------------------------------------------------------------------
// Small enumerable coin models.
// ---------------------------------------------------------------------------

// x ~ bernoulli(p); y with p(y|x=1), p(y|x=0) folded in as a factor.
inline Program one_coin_program(double p = 0.5, double lik1 = 0.8, double lik0 = 0.2) {
  return [=](ProgramContext& ctx) {
    const int x = ctx.sample_erp("x", ErpFamily::bernoulli(), vec1(p)).as_index();
    ctx.factor(std::log(x ? lik1 : lik0));
  };
}

// a ~ bernoulli(0.45); b ~ bernoulli(a ? 0.8 : 0.3); likelihood table on
// (a,b). The parameter of b depends on the history, which the mean-field
// transform severs.
inline Program two_coin_program() {
  return [](ProgramContext& ctx) {
    const int a = ctx.sample_erp("a", ErpFamily::bernoulli(), vec1(0.45)).as_index();
    const int b =
        ctx.sample_erp("b", ErpFamily::bernoulli(), vec1(a ? 0.8 : 0.3)).as_index();
    constexpr double lik[2][2] = {{0.05, 0.5}, {0.2, 0.9}};
    ctx.factor(std::log(lik[a][b]));
  };
}

// ---------------------------------------------------------------------------
// Conjugate Gaussian pair: x ~ normal(mu0, sigma0); y ~ normal(x, sigma).
// ---------------------------------------------------------------------------

struct GaussianPairModel {
  double prior_mean = 0.0;
  double prior_std = 1.0;
  double lik_std = 1.0;
  double y = 1.0;
};

inline Program gaussian_pair_program(const GaussianPairModel& m = {}) {
  return [m](ProgramContext& ctx) {
    const double x =
        ctx.sample_erp("x", ErpFamily::normal(), vec2(m.prior_mean, m.prior_std))
            .as_real();
    ctx.observe(ErpFamily::normal(), vec2(x, m.lik_std), ErpValue::real(m.y));
  };
}

struct GaussianPosterior {
  double mean = 0;
  double std = 1;
};

// Closed-form conjugate posterior of the pair model.
inline GaussianPosterior gaussian_pair_oracle(double prior_mean, double prior_std,
                                              double lik_std, double y) {
  if (!(prior_std > 0) || !(lik_std > 0))
    throw ParameterError("gaussian_pair_oracle: stds must be > 0");
  const double prec = 1.0 / (prior_std * prior_std) + 1.0 / (lik_std * lik_std);
  const double var = 1.0 / prec;
  const double mean =
      var * (prior_mean / (prior_std * prior_std) + y / (lik_std * lik_std));
  return GaussianPosterior{mean, std::sqrt(var)};
}

}  // namespace avi::models
