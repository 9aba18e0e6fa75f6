#pragma once

#include <utility>
#include <vector>

#include "avi/gradient.hpp"

namespace avi::models {

// ---------------------------------------------------------------------------
// Exact oracle for programs whose ERPs are all finite-discrete
// (Bernoulli/Categorical). Depth-first search over choice sequences
// enumerates every trace the program can produce, including across control
// flow, yielding
//
//   log p(y)           = logsum_x [ log p(x) + log p(y|x) ]
//   L(theta)           = sum_x q(x) (log p(x,y) - log q(x))
//   grad L(theta)      = sum_x q(x) grad log q(x) (log p(x,y) - log q(x))
//
// with q the guided distribution under a parameter store.
// ---------------------------------------------------------------------------

struct Enumeration {
  double log_evidence = 0;
  double exact_elbo = 0;
  Vec exact_gradient;                   // flattened store layout
  std::vector<double> posterior_weights;  // per enumerated trace
  std::vector<Trace> traces;              // guided semantics, DFS order
};

namespace detail {

// Signals that the replay ran past its prescribed choices; carries the
// branching factor of the next ERP.
struct BranchPoint {
  int support;
};

// Replays a prescribed choice sequence with guided recording semantics.
class ReplayContext final : public avi::detail::TraceContextBase {
 public:
  ReplayContext(ParamStore& store, const std::vector<int>& choices)
      : store_(store), choices_(choices) {}

  ErpValue sample_erp(const std::string& site_id, const ErpFamily& family,
                      const Vec& naturals) override {
    int support = 0;
    switch (family.kind) {
      case ErpKind::Bernoulli: support = 2; break;
      case ErpKind::Categorical: support = family.dim; break;
      default:
        throw ParameterError("enumeration requires finite-discrete ERPs, got " +
                             family.name());
    }
    if (next_ >= choices_.size()) throw BranchPoint{support};
    const Address addr = next_address(site_id);
    const ErpValue value = ErpValue::index(choices_[next_++]);
    const ParamVector& theta = store_.lookup_or_init(addr, family, naturals);
    const double lq = log_pdf(family, theta, value);
    const double lp = natural_log_pdf(family, naturals, value);
    trace_.log_prior += lp;
    trace_.log_guide += lq;
    trace_.entries.push_back(TraceEntry{addr, family, value, naturals, lp, lq,
                                        grad_log_pdf(family, theta, value), lp - lq});
    return value;
  }

 private:
  ParamStore& store_;
  const std::vector<int>& choices_;
  size_t next_ = 0;
};

// DFS over the choice tree. Every complete run lands in `traces`.
inline std::vector<Trace> enumerate_traces(const Program& program, ParamStore& store,
                                           long max_traces) {
  std::vector<Trace> traces;
  std::vector<std::vector<int>> stack;
  stack.push_back({});
  while (!stack.empty()) {
    std::vector<int> prefix = std::move(stack.back());
    stack.pop_back();
    ReplayContext ctx(store, prefix);
    try {
      program(ctx);
      traces.push_back(ctx.take());
      if (long(traces.size()) > max_traces)
        throw ParameterError("enumeration exceeds trace bound of " +
                             std::to_string(max_traces));
    } catch (const BranchPoint& bp) {
      // Push high values first so value 0 is explored first.
      for (int v = bp.support - 1; v >= 0; --v) {
        std::vector<int> child = prefix;
        child.push_back(v);
        stack.push_back(std::move(child));
      }
      if (long(stack.size()) > 64 * max_traces)
        throw ParameterError("enumeration frontier exceeds bound");
    }
  }
  return traces;
}

}  // namespace detail

// Registers every address the program can reach (all branches) into the
// store, deterministically in DFS order.
inline void register_addresses(const Program& program, ParamStore& store,
                               long max_traces = 1000000) {
  detail::enumerate_traces(program, store, max_traces);
}

// Exact posterior quantities at the given store. The store is copied; the
// caller's store is untouched. If the program reaches addresses the store
// has not registered, the gradient gains trailing segments for them (the
// existing layout is always a prefix); pre-register with register_addresses
// for a fixed layout.
inline Enumeration enumerate_posterior(const Program& program, const ParamStore& store,
                                       long max_traces = 1000000) {
  ParamStore local = store;
  Enumeration e;
  e.traces = detail::enumerate_traces(program, local, max_traces);

  const size_t n = e.traces.size();
  Vec joint(n), lq(n);
  for (size_t j = 0; j < n; ++j) {
    joint[j] = e.traces[j].log_prior + e.traces[j].log_lik;
    lq[j] = e.traces[j].log_guide;
  }
  e.log_evidence = log_sum_exp(joint);

  e.exact_elbo = 0;
  e.exact_gradient = Vec::Zero(local.dim());
  e.posterior_weights.resize(n);
  for (size_t j = 0; j < n; ++j) {
    const double q = std::exp(lq[j]);
    const double integrand = joint[j] - lq[j];
    e.exact_elbo += q * integrand;
    e.exact_gradient += q * integrand * per_trace_score(e.traces[j], local);
    e.posterior_weights[j] = std::exp(joint[j] - e.log_evidence);
  }
  return e;
}

}  // namespace avi::models
