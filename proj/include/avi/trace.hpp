#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "avi/erp.hpp"

namespace avi {

// Stable identity of an ERP call site across traces: the author-supplied
// site label plus a per-site occurrence counter that resets each execution,
// so loops and recursion get distinct, deterministic addresses.
struct Address {
  std::string site;
  int occurrence = 0;

  bool operator==(const Address& o) const {
    return occurrence == o.occurrence && site == o.site;
  }
  std::string str() const { return site + "#" + std::to_string(occurrence); }
};

struct AddressHash {
  size_t operator()(const Address& a) const {
    return std::hash<std::string>()(a.site) ^ splitmix64(uint64_t(a.occurrence));
  }
};

// One recorded ERP draw.
struct TraceEntry {
  Address address;
  ErpFamily family;
  ErpValue value;
  Vec target_naturals;    // history-dependent parameters the program passed
  double log_p_target = 0;  // log p(x_t | psi_t(h_t))
  double log_q = 0;         // log p_theta(x_t)
  ParamVector score;        // d log p_theta(x_t) / d theta_t
  double reward = 0;        // log_p_target - log_q
};

// Full record of one program execution.
struct Trace {
  std::vector<TraceEntry> entries;
  double log_lik = 0;    // accumulated log p(y|x) from observe/factor
  double log_prior = 0;  // sum of log_p_target
  double log_guide = 0;  // sum of log_q
};

// Interface the model program calls. observe/factor only contribute to the
// trace likelihood; they never create variational parameters.
class ProgramContext {
 public:
  virtual ~ProgramContext() = default;
  virtual ErpValue sample_erp(const std::string& site_id, const ErpFamily& family,
                              const Vec& naturals) = 0;
  virtual void observe(const ErpFamily& family, const Vec& naturals,
                       const ErpValue& observed) = 0;
  virtual void factor(double log_weight) = 0;
};

using Program = std::function<void(ProgramContext&)>;

// Gain of one trace: sum of rewards + log p(y|x) + K.
inline double gain(const Trace& trace, double K) {
  double r = 0;
  for (const auto& e : trace.entries) r += e.reward;
  return r + trace.log_lik + K;
}

namespace detail {

class TraceContextBase : public ProgramContext {
 public:
  void observe(const ErpFamily& family, const Vec& naturals,
               const ErpValue& observed) override {
    trace_.log_lik += natural_log_pdf(family, naturals, observed);
  }
  void factor(double log_weight) override { trace_.log_lik += log_weight; }

  Trace take() { return std::move(trace_); }

 protected:
  Address next_address(const std::string& site_id) {
    return Address{site_id, counters_[site_id]++};
  }

  Trace trace_;
  std::unordered_map<std::string, int> counters_;
};

}  // namespace detail

// Runs the program with every ERP drawing from its natural parameters.
// Guide and target coincide, so every reward is zero.
class TargetContext final : public detail::TraceContextBase {
 public:
  explicit TargetContext(Rng& rng) : rng_(rng) {}

  ErpValue sample_erp(const std::string& site_id, const ErpFamily& family,
                      const Vec& naturals) override {
    const Address addr = next_address(site_id);
    try {
      ErpValue value = natural_sample(family, naturals, rng_);
      const double lp = natural_log_pdf(family, naturals, value);
      trace_.log_prior += lp;
      trace_.log_guide += lp;
      trace_.entries.push_back(TraceEntry{addr, family, value, naturals, lp, lp,
                                          Vec::Zero(family.arity()), 0.0});
      return value;
    } catch (ParameterError& e) {
      throw ParameterError(std::string(e.what()) + " (at " + addr.str() + ")");
    }
  }

 private:
  Rng& rng_;
};

inline Trace run_target(const Program& program, Rng& rng) {
  TargetContext ctx(rng);
  program(ctx);
  return ctx.take();
}

// Runs the program with every ERP drawing from its variational parameters:
// look up (or initialize) theta at the site's address, sample from the
// variational ERP, and record guide log-prob, target log-prob, score and
// reward. The parameters the program passed are recorded but do not affect
// the sampled distribution; only control flow couples sites.
//
// Store must provide
//   const ParamVector& lookup_or_init(address, family, naturals)
template <class Store>
class GuidedContext final : public detail::TraceContextBase {
 public:
  GuidedContext(Store& store, Rng& rng) : store_(store), rng_(rng) {}

  ErpValue sample_erp(const std::string& site_id, const ErpFamily& family,
                      const Vec& naturals) override {
    const Address addr = next_address(site_id);
    try {
      const ParamVector& theta = store_.lookup_or_init(addr, family, naturals);
      ErpValue value = sample(family, theta, rng_);
      const double lq = log_pdf(family, theta, value);
      const double lp = natural_log_pdf(family, naturals, value);
      ParamVector score = grad_log_pdf(family, theta, value);
      trace_.log_prior += lp;
      trace_.log_guide += lq;
      trace_.entries.push_back(TraceEntry{addr, family, std::move(value), naturals, lp,
                                          lq, std::move(score), lp - lq});
      return trace_.entries.back().value;
    } catch (ParameterError& e) {
      throw ParameterError(std::string(e.what()) + " (at " + addr.str() + ")");
    }
  }

 private:
  Store& store_;
  Rng& rng_;
};

template <class Store>
Trace run_guided(const Program& program, Store& store, Rng& rng) {
  GuidedContext<Store> ctx(store, rng);
  program(ctx);
  return ctx.take();
}

}  // namespace avi
