#include "avi/trace.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "avi/meanfield.hpp"
#include "avi/models/toy.hpp"

using namespace avi;
using models::vec1;
using models::vec2;

namespace {

// Returns prescribed real values in order; used to pin ERP draws where a
// test needs exact values.
class FixedValueContext final : public detail::TraceContextBase {
 public:
  explicit FixedValueContext(std::vector<double> values) : values_(std::move(values)) {}

  ErpValue sample_erp(const std::string& site_id, const ErpFamily& family,
                      const Vec& naturals) override {
    const Address addr = next_address(site_id);
    const ErpValue value = ErpValue::real(values_.at(next_++));
    const double lp = natural_log_pdf(family, naturals, value);
    trace_.log_prior += lp;
    trace_.log_guide += lp;
    trace_.entries.push_back(
        TraceEntry{addr, family, value, naturals, lp, lp, Vec::Zero(family.arity()), 0.0});
    return value;
  }

 private:
  std::vector<double> values_;
  size_t next_ = 0;
};

std::set<std::string> sites(const Trace& t) {
  std::set<std::string> s;
  for (const auto& e : t.entries) s.insert(e.address.site);
  return s;
}

}  // namespace

TEST(Trace, FactorOnlyProgram) {
  const Program program = [](ProgramContext& ctx) { ctx.factor(-1.5); };
  Rng rng = make_stream(1, 0);
  const Trace t = run_target(program, rng);
  EXPECT_TRUE(t.entries.empty());
  EXPECT_DOUBLE_EQ(t.log_lik, -1.5);
  EXPECT_DOUBLE_EQ(t.log_prior, 0.0);
  EXPECT_DOUBLE_EQ(gain(t, 0.0), -1.5);
  EXPECT_DOUBLE_EQ(gain(t, 2.0), 0.5);
}

TEST(Trace, BranchSelectsAddressSet) {
  const Program program = models::branching_program();
  Rng rng = make_stream(2, 0);
  int saw_gauss = 0, saw_unif = 0;
  for (int i = 0; i < 200; ++i) {
    const Trace t = run_target(program, rng);
    const double m = t.entries[0].value.as_real();
    if (m > 1.0) {
      EXPECT_EQ(sites(t), (std::set<std::string>{"m", "x_gauss"}));
      ++saw_gauss;
    } else {
      EXPECT_EQ(sites(t), (std::set<std::string>{"m", "x_unif"}));
      ++saw_unif;
    }
  }
  EXPECT_GT(saw_gauss, 0);
  EXPECT_GT(saw_unif, 0);
}

TEST(Trace, TwoStandardNormalsAtZero) {
  const Program program = [](ProgramContext& ctx) {
    ctx.sample_erp("a", ErpFamily::normal(), vec2(0.0, 1.0));
    ctx.sample_erp("b", ErpFamily::normal(), vec2(0.0, 1.0));
  };
  FixedValueContext ctx({0.0, 0.0});
  program(ctx);
  const Trace t = ctx.take();
  EXPECT_NEAR(t.log_prior, 2 * -0.9189385332046727, 1e-12);
}

TEST(Trace, TargetRunHasZeroRewards) {
  const Program program = models::two_coin_program();
  Rng rng = make_stream(3, 0);
  for (int i = 0; i < 50; ++i) {
    const Trace t = run_target(program, rng);
    for (const auto& e : t.entries) {
      EXPECT_DOUBLE_EQ(e.reward, 0.0);
      EXPECT_DOUBLE_EQ(e.log_q, e.log_p_target);
    }
  }
}

TEST(Trace, GuidedNoErpGain) {
  const Program program = [](ProgramContext& ctx) { ctx.factor(-3.25); };
  ParamStore store;
  Rng rng = make_stream(4, 0);
  const Trace t = run_guided(program, store, rng);
  EXPECT_TRUE(t.entries.empty());
  EXPECT_DOUBLE_EQ(gain(t, 0.0), -3.25);
  EXPECT_DOUBLE_EQ(gain(t, 7.0), 3.75);
}

TEST(Trace, GuidedMarginalMatchesStoreParamsKS) {
  const Program program = models::branching_program();
  ParamStore store;
  {
    Rng rng = make_stream(5, 0);
    run_guided(program, store, rng);  // register addresses on some path
  }
  // Move the first site away from its initialization, then check the
  // sampled marginal against the store's density.
  const Address m_addr{"m", 0};
  store.set_params(m_addr, vec2(0.3, -0.2));

  const int n = 100000;
  std::vector<double> draws;
  draws.reserve(n);
  for (int i = 0; i < n; ++i) {
    Rng rng = make_stream(6, 0, uint64_t(i));
    const Trace t = run_guided(program, store, rng);
    draws.push_back(t.entries[0].value.as_real());
  }
  std::sort(draws.begin(), draws.end());
  const double mu = 0.3, sigma = std::exp(-0.2);
  double ks = 0;
  for (int i = 0; i < n; ++i) {
    const double cdf = 0.5 * std::erfc(-(draws[i] - mu) / (sigma * std::sqrt(2.0)));
    ks = std::max(ks, std::abs(cdf - (i + 1.0) / n));
    ks = std::max(ks, std::abs(cdf - double(i) / n));
  }
  // Kolmogorov critical value at the 1e-3 level.
  const double crit = 1.9495 / std::sqrt(double(n));
  EXPECT_LT(ks, crit);
}

TEST(Trace, RewardZeroWhenGuideEqualsTarget) {
  // Straight-line program with history-independent parameters: immediately
  // after initialization the guide equals the target at every site.
  const Program program = [](ProgramContext& ctx) {
    ctx.sample_erp("x", ErpFamily::normal(), vec2(1.0, 2.0));
    ctx.sample_erp("c", ErpFamily::bernoulli(), vec1(0.3));
    ctx.factor(-0.5);
  };
  ParamStore store;
  Rng rng = make_stream(7, 0);
  for (int i = 0; i < 20; ++i) {
    const Trace t = run_guided(program, store, rng);
    for (const auto& e : t.entries) EXPECT_NEAR(e.reward, 0.0, 1e-14);
  }
}

TEST(Trace, GainMatchesEntryFields) {
  const Program program = models::two_coin_program();
  ParamStore store;
  Rng rng = make_stream(8, 0);
  run_guided(program, store, rng);
  store.set_params(Address{"a", 0}, vec1(0.4));
  store.set_params(Address{"b", 0}, vec1(-0.7));
  for (int i = 0; i < 100; ++i) {
    const Trace t = run_guided(program, store, rng);
    double reward_sum = 0;
    for (const auto& e : t.entries) {
      EXPECT_DOUBLE_EQ(e.reward, e.log_p_target - e.log_q);
      reward_sum += e.reward;
    }
    EXPECT_NEAR(t.log_prior - t.log_guide, reward_sum, 1e-10);
    const double K = 2.5;
    EXPECT_NEAR(gain(t, K), t.log_prior - t.log_guide + t.log_lik + K, 1e-10);
  }
}

TEST(Trace, AddressDeterminism) {
  const Program program = models::branching_program();
  ParamStore store;
  {
    Rng rng = make_stream(9, 0);
    for (int i = 0; i < 10; ++i) run_guided(program, store, rng);
  }
  for (uint64_t s = 0; s < 20; ++s) {
    Rng rng1 = make_stream(10, s);
    Rng rng2 = make_stream(10, s);
    ParamStore store1 = store, store2 = store;
    const Trace t1 = run_guided(program, store1, rng1);
    const Trace t2 = run_guided(program, store2, rng2);
    ASSERT_EQ(t1.entries.size(), t2.entries.size());
    for (size_t i = 0; i < t1.entries.size(); ++i) {
      EXPECT_EQ(t1.entries[i].address, t2.entries[i].address);
      EXPECT_TRUE(t1.entries[i].value == t2.entries[i].value);
    }
  }
}

TEST(Trace, TargetLogPriorMatchesPerEntryDensities) {
  const Program program = models::branching_program();
  Rng rng = make_stream(11, 0);
  for (int i = 0; i < 100; ++i) {
    const Trace t = run_target(program, rng);
    double sum = 0;
    for (const auto& e : t.entries)
      sum += log_pdf(e.family, init_from_target(e.family, e.target_naturals), e.value);
    EXPECT_NEAR(t.log_prior, sum, 1e-10);
  }
}

TEST(Trace, OccurrenceCountersDisambiguateLoops) {
  const Program program = [](ProgramContext& ctx) {
    for (int i = 0; i < 3; ++i)
      ctx.sample_erp("coin", ErpFamily::bernoulli(), vec1(0.5));
  };
  Rng rng = make_stream(12, 0);
  const Trace t = run_target(program, rng);
  ASSERT_EQ(t.entries.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(t.entries[i].address.site, "coin");
    EXPECT_EQ(t.entries[i].address.occurrence, i);
  }
}

TEST(Trace, FamilyMismatchAtAddressIsStructuralError) {
  ParamStore store;
  const Program p1 = [](ProgramContext& ctx) {
    ctx.sample_erp("s", ErpFamily::normal(), vec2(0.0, 1.0));
  };
  const Program p2 = [](ProgramContext& ctx) {
    ctx.sample_erp("s", ErpFamily::bernoulli(), vec1(0.5));
  };
  Rng rng = make_stream(13, 0);
  run_guided(p1, store, rng);
  EXPECT_THROW(run_guided(p2, store, rng), StructureError);
}

TEST(Trace, ProgramErrorCarriesAddressContext) {
  const Program program = [](ProgramContext& ctx) {
    ctx.sample_erp("bad", ErpFamily::bernoulli(), vec1(2.0));  // p > 1
  };
  Rng rng = make_stream(14, 0);
  try {
    run_target(program, rng);
    FAIL() << "expected ParameterError";
  } catch (const ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("bad#0"), std::string::npos);
  }
}

TEST(Trace, SeveredParameterDependence) {
  // Two versions of the branching model differing only in the deterministic
  // function feeding a natural parameter: same store, same stream => same
  // sampled values and same log_q, different rewards on the gauss branch.
  const auto f_alt = [](double m) { return m; };
  const Program pa = models::branching_program(1.5);
  const Program pb = models::branching_program(1.5, f_alt);

  ParamStore store;
  {
    Rng rng = make_stream(15, 0);
    for (int i = 0; i < 50; ++i) run_guided(pa, store, rng);
  }
  bool saw_reward_difference = false;
  for (uint64_t s = 0; s < 200; ++s) {
    ParamStore sa = store, sb = store;
    Rng ra = make_stream(16, s), rb = make_stream(16, s);
    const Trace ta = run_guided(pa, sa, ra);
    const Trace tb = run_guided(pb, sb, rb);
    ASSERT_EQ(ta.entries.size(), tb.entries.size());
    for (size_t i = 0; i < ta.entries.size(); ++i) {
      EXPECT_TRUE(ta.entries[i].value == tb.entries[i].value);
      EXPECT_DOUBLE_EQ(ta.entries[i].log_q, tb.entries[i].log_q);
    }
    if (ta.entries[0].value.as_real() > 1.0 &&
        ta.entries[1].reward != tb.entries[1].reward)
      saw_reward_difference = true;
  }
  EXPECT_TRUE(saw_reward_difference);
}
