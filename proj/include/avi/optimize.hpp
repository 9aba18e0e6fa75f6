#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "avi/gradient.hpp"

namespace avi {

enum class Algorithm { Sgd, Enac, Sogd };
enum class Outer { Steepest, ConjugateGradient };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Sgd: return "sgd";
    case Algorithm::Enac: return "enac";
    case Algorithm::Sogd: return "sogd";
  }
  return "?";
}

inline const char* outer_name(Outer o) {
  return o == Outer::Steepest ? "steepest" : "cg";
}

struct OptimizerConfig {
  Algorithm algorithm = Algorithm::Sgd;
  Outer outer = Outer::Steepest;
  double stepsize = 0.05;
  int rollouts = 10;          // traces per gradient estimate
  int iterations = 500;
  int elbo_eval_samples = 100;
  uint64_t seed = 0;
  double ridge = 1e-3;
  int restart_period = 20;    // conjugate-gradient forced restart

  void validate() const {
    if (!(stepsize > 0)) throw ParameterError("config: stepsize must be > 0");
    if (rollouts < 1) throw ParameterError("config: rollouts must be >= 1");
    if (iterations < 0) throw ParameterError("config: iterations must be >= 0");
    if (elbo_eval_samples < 1) throw ParameterError("config: elbo_eval_samples must be >= 1");
    if (!(ridge > 0)) throw ParameterError("config: ridge must be > 0");
    if (restart_period < 1) throw ParameterError("config: restart_period must be >= 1");
  }
};

struct IterationRecord {
  int iteration = 0;
  long long cumulative_samples = 0;  // guided traces spent on gradients so far
  double elbo_mean = 0;
  double elbo_stderr = 0;
  double direction_norm = 0;  // pre-normalization norm of the applied direction
  double wallclock_s = 0;
};

// Polak-Ribiere-plus update: beta = max(0, g_new . (g_new - g_old) / |g_old|^2),
// direction = g_new + beta * d_old. restart (and a vanishing g_old) force
// beta = 0.
inline Vec cg_update(const Vec& g_new, const Vec& g_old, const Vec& d_old,
                     bool restart) {
  if (g_new.size() != g_old.size() || g_new.size() != d_old.size())
    throw ParameterError("cg_update: length mismatch");
  if (restart) return g_new;
  const double denom = g_old.squaredNorm();
  if (denom <= 0) return g_new;
  const double beta = std::max(0.0, g_new.dot(g_new - g_old) / denom);
  return g_new + beta * d_old;
}

namespace detail {

inline constexpr uint64_t kRolloutTag = 0x726f6c6c;  // gradient rollouts
inline constexpr uint64_t kElboTag = 0x656c626f;     // evaluation stream

inline Vec grow(const Vec& v, int d) {
  if (v.size() == d) return v;
  Vec out = Vec::Zero(d);
  out.head(v.size()) = v;
  return out;
}

}  // namespace detail

// One run of stochastic optimization. Per iteration: draw `rollouts` guided
// traces on per-rollout streams, compute the configured ascent direction,
// normalize it to unit length, take a fixed-size step, and record the lower
// bound on an independent evaluation stream keyed by (seed, iteration) only,
// so all algorithms see common evaluation randomness and the sample budget
// schedule is identical across algorithms.
//
// A numerical failure in the direction computation aborts the run, returning
// the history collected so far.
inline std::vector<IterationRecord> run_optimization(const Program& program,
                                                     ParamStore& store,
                                                     const OptimizerConfig& config) {
  config.validate();
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();

  std::vector<IterationRecord> history;
  history.reserve(config.iterations + 1);

  auto elapsed = [&] {
    return std::chrono::duration<double>(clock::now() - t0).count();
  };
  auto record_elbo = [&](int iter, long long samples, double dir_norm) {
    Rng eval_rng = make_stream(config.seed, detail::kElboTag, uint64_t(iter));
    const ElboEstimate est =
        elbo_estimate(program, store, config.elbo_eval_samples, eval_rng);
    history.push_back(IterationRecord{iter, samples, est.mean, est.stderr, dir_norm,
                                      elapsed()});
  };

  record_elbo(0, 0, 0.0);

  Vec g_old, d_old;
  for (int iter = 1; iter <= config.iterations; ++iter) {
    std::vector<Trace> traces;
    traces.reserve(config.rollouts);
    for (int j = 0; j < config.rollouts; ++j) {
      Rng rng = make_stream(config.seed, detail::kRolloutTag, uint64_t(iter), uint64_t(j));
      traces.push_back(run_guided(program, store, rng));
    }

    Vec g;
    try {
      switch (config.algorithm) {
        case Algorithm::Sgd:
          g = score_gradient(traces, store, 0.0).direction;
          break;
        case Algorithm::Enac:
          g = enac_direction(traces, store, config.ridge).w;
          break;
        case Algorithm::Sogd:
          g = sogd_direction(traces, store, config.ridge);
          break;
      }
      if (!all_finite(g)) throw NumericalError("non-finite gradient direction");
    } catch (const NumericalError&) {
      // Aborted iteration: history up to the previous step is the result.
      return history;
    }

    Vec dir = g;
    if (config.outer == Outer::ConjugateGradient) {
      const bool restart = g_old.size() == 0 || (iter - 1) % config.restart_period == 0;
      if (!restart) {
        g_old = detail::grow(g_old, store.dim());
        d_old = detail::grow(d_old, store.dim());
      }
      dir = restart ? g : cg_update(g, g_old, d_old, false);
      g_old = g;
      d_old = dir;
    }

    const double norm = dir.norm();
    try {
      store.apply_step(normalize(dir), config.stepsize);
    } catch (const NumericalError&) {
      return history;
    }
    record_elbo(iter, (long long)(iter) * config.rollouts, norm);
  }
  return history;
}

}  // namespace avi
