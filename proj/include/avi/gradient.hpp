#pragma once

#include <span>
#include <vector>

#include "avi/meanfield.hpp"

namespace avi {

// ---------------------------------------------------------------------------
// Score-function gradient estimators over a batch of guided traces.
//
// All directions follow the ascent convention: positive steps increase the
// lower bound.
// ---------------------------------------------------------------------------

struct GradientEstimate {
  Vec direction;               // flattened, ascent direction
  Vec baseline;                // per-component baseline that was applied
  int n_traces = 0;
  std::vector<double> gains;   // per-trace gain(., 0), diagnostics
};

struct FisherMatrix {
  Mat matrix;     // (1/N) sum of score outer products + ridge * I
  double ridge = 0;
};

struct EnacResult {
  Vec w;          // natural-gradient ascent direction
  double b = 0;   // fitted baseline
  bool degenerate = false;  // all scores were zero
};

// Flattened score of one trace: each entry's score lands in its address's
// segment; addresses absent from the trace contribute zeros.
inline Vec per_trace_score(const Trace& trace, const ParamStore& store) {
  Vec psi = Vec::Zero(store.dim());
  for (const auto& e : trace.entries)
    psi.segment(store.offset_of(e.address), e.score.size()) += e.score;
  return psi;
}

namespace detail {

// N x d matrix of per-trace scores plus the vector of gains at K = 0.
inline std::pair<Mat, Vec> score_matrix(std::span<const Trace> traces,
                                        const ParamStore& store) {
  const int n = int(traces.size());
  const int d = store.dim();
  Mat psi(n, d);
  Vec f(n);
  for (int j = 0; j < n; ++j) {
    psi.row(j) = per_trace_score(traces[j], store).transpose();
    f[j] = gain(traces[j], 0.0);
  }
  return {std::move(psi), std::move(f)};
}

}  // namespace detail

// Monte-Carlo gradient: direction_i = (1/N) sum_j psi_i(x^j) (gain_j + b_i).
// The baseline shifts the gain per component; any constant leaves the
// expectation unchanged.
inline GradientEstimate score_gradient(std::span<const Trace> traces,
                                       const ParamStore& store, const Vec& baseline) {
  if (traces.empty()) throw ParameterError("score_gradient: empty batch");
  const int d = store.dim();
  if (baseline.size() != d)
    throw ParameterError("score_gradient: baseline length != store dimension");
  Vec sum_psi_f = Vec::Zero(d);
  Vec sum_psi = Vec::Zero(d);
  GradientEstimate est;
  est.n_traces = int(traces.size());
  est.gains.reserve(traces.size());
  for (const auto& t : traces) {
    const Vec psi = per_trace_score(t, store);
    const double f = gain(t, 0.0);
    est.gains.push_back(f);
    sum_psi_f += psi * f;
    sum_psi += psi;
  }
  est.baseline = baseline;
  est.direction =
      (sum_psi_f + baseline.cwiseProduct(sum_psi)) / double(est.n_traces);
  return est;
}

inline GradientEstimate score_gradient(std::span<const Trace> traces,
                                       const ParamStore& store, double K = 0.0) {
  return score_gradient(traces, store, Vec::Constant(store.dim(), K));
}

// Per-component variance-minimizing constant:
//   b_i = - sum_j psi_i(x^j)^2 f_j / sum_j psi_i(x^j)^2,
// zero where the scores vanish.
inline Vec optimal_baseline(std::span<const Trace> traces, const ParamStore& store) {
  if (traces.size() < 2) throw ParameterError("optimal_baseline: need >= 2 traces");
  const int d = store.dim();
  Vec num = Vec::Zero(d);
  Vec den = Vec::Zero(d);
  for (const auto& t : traces) {
    const Vec psi2 = per_trace_score(t, store).array().square();
    num += psi2 * gain(t, 0.0);
    den += psi2;
  }
  Vec b(d);
  for (int i = 0; i < d; ++i) b[i] = den[i] > 0 ? -num[i] / den[i] : 0.0;
  return b;
}

// Empirical Fisher information with a ridge: (1/N) sum psi psi^T + lambda I.
inline FisherMatrix fisher_estimate(std::span<const Trace> traces,
                                    const ParamStore& store, double ridge) {
  if (traces.empty()) throw ParameterError("fisher_estimate: empty batch");
  if (ridge < 0) throw ParameterError("fisher_estimate: ridge must be >= 0");
  auto [psi, f] = detail::score_matrix(traces, store);
  const int d = store.dim();
  FisherMatrix fm;
  fm.ridge = ridge;
  fm.matrix = (psi.transpose() * psi) / double(traces.size());
  fm.matrix += ridge * Mat::Identity(d, d);
  return fm;
}

// Episodic natural actor-critic direction: ridge regression of per-trace
// gains on per-trace scores with an unpenalized intercept,
//   gain_j ~ psi(x^j)^T w + b.
// The slope w is the natural-gradient ascent direction; the intercept is
// the fitted baseline. Solved in the dual so that N << d batches yield the
// minimum-norm ridge solution.
inline EnacResult enac_direction(std::span<const Trace> traces, const ParamStore& store,
                                 double ridge) {
  if (traces.size() < 2) throw ParameterError("enac_direction: need >= 2 traces");
  if (!(ridge > 0)) throw ParameterError("enac_direction: ridge must be > 0");
  auto [psi, f] = detail::score_matrix(traces, store);
  const int n = int(traces.size());

  EnacResult res;
  if (psi.cwiseAbs().maxCoeff() == 0.0) {
    res.w = Vec::Zero(store.dim());
    res.b = f.mean();
    res.degenerate = true;
    return res;
  }

  // Unpenalized intercept == regress on centered data, then recover b.
  const Eigen::RowVectorXd psi_mean = psi.colwise().mean();
  const Mat psi_c = psi.rowwise() - psi_mean;
  const double f_mean = f.mean();
  const Vec f_c = f.array() - f_mean;

  const int d = store.dim();
  if (d <= n) {
    // primal: (psi_c^T psi_c + ridge I) w = psi_c^T f_c
    Mat normal_eq = psi_c.transpose() * psi_c;
    normal_eq += ridge * Mat::Identity(d, d);
    Eigen::LDLT<Mat> ldlt(normal_eq);
    if (ldlt.info() != Eigen::Success)
      throw NumericalError("enac_direction: primal solve failed");
    res.w = ldlt.solve(psi_c.transpose() * f_c);
  } else {
    // dual: w = psi_c^T (psi_c psi_c^T + ridge I)^-1 f_c, the minimum-norm
    // ridge solution when there are fewer roll-outs than parameters
    Mat gram = psi_c * psi_c.transpose();
    gram += ridge * Mat::Identity(n, n);
    Eigen::LDLT<Mat> ldlt(gram);
    if (ldlt.info() != Eigen::Success)
      throw NumericalError("enac_direction: dual solve failed");
    res.w = psi_c.transpose() * ldlt.solve(f_c);
  }
  res.b = f_mean - psi_mean.dot(res.w);
  if (!all_finite(res.w) || !std::isfinite(res.b))
    throw NumericalError("enac_direction: non-finite solution");
  return res;
}

// Fisher-preconditioned gradient: F^-1 g with g the score gradient under the
// optimal baseline and F the ridged empirical Fisher. For large parameter
// counts the solve goes through the Woodbury identity on the N x N Gram
// matrix instead of materializing F.
inline Vec sogd_direction(std::span<const Trace> traces, const ParamStore& store,
                          double ridge) {
  if (traces.empty()) throw ParameterError("sogd_direction: empty batch");
  const Vec g = traces.size() >= 2
                    ? score_gradient(traces, store, optimal_baseline(traces, store)).direction
                    : score_gradient(traces, store, 0.0).direction;
  const int d = store.dim();
  const int n = int(traces.size());

  Vec dir;
  if (d <= 256) {
    const FisherMatrix fm = fisher_estimate(traces, store, ridge);
    Eigen::LDLT<Mat> ldlt(fm.matrix);
    if (ldlt.info() != Eigen::Success)
      throw NumericalError("sogd_direction: Fisher solve failed");
    dir = ldlt.solve(g);
  } else {
    if (!(ridge > 0))
      throw NumericalError("sogd_direction: ridge must be > 0 when d > N");
    auto [psi, f] = detail::score_matrix(traces, store);
    Mat gram = psi * psi.transpose();
    gram += double(n) * ridge * Mat::Identity(n, n);
    Eigen::LDLT<Mat> ldlt(gram);
    if (ldlt.info() != Eigen::Success)
      throw NumericalError("sogd_direction: Gram solve failed");
    dir = (g - psi.transpose() * ldlt.solve(psi * g)) / ridge;
  }
  if (!all_finite(dir))
    throw NumericalError("sogd_direction: non-finite direction");
  return dir;
}

// direction / ||direction||, or zero if the norm underflows.
inline Vec normalize(const Vec& direction) {
  const double norm = direction.norm();
  if (norm <= 1e-12) return Vec::Zero(direction.size());
  return direction / norm;
}

}  // namespace avi
