#include "avi/models/enumerate.hpp"
#include "avi/models/lda.hpp"
#include "avi/models/qmr.hpp"
#include "avi/models/toy.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

using namespace avi;
using namespace avi::models;

namespace {

QmrModel two_disease_qmr() {
  QmrModel m;
  m.n_diseases = 2;
  m.n_findings = 1;
  m.prior = vec2(0.5, 0.5);
  m.leak = vec1(0.0);
  m.weight = Mat(1, 2);
  m.weight << 0.8, 0.6;
  m.observed = {1};
  return m;
}

}  // namespace

TEST(Qmr, AllNegativeFindingsWithZeroWeightsGiveZeroLogLik) {
  QmrModel m;
  m.n_diseases = 3;
  m.n_findings = 2;
  m.prior = Vec::Constant(3, 0.4);
  m.leak = Vec::Zero(2);
  m.weight = Mat::Zero(2, 3);
  m.observed = {0, 0};
  const Program program = qmr_program(m);
  Rng rng = make_stream(90, 0);
  for (int i = 0; i < 100; ++i) {
    const Trace t = run_target(program, rng);
    EXPECT_DOUBLE_EQ(t.log_lik, 0.0);
    EXPECT_EQ(t.entries.size(), 3u);
  }
}

TEST(Qmr, TwoDiseaseEvidenceMatchesHandComputation) {
  const QmrModel m = two_disease_qmr();
  ParamStore store;
  const auto e = enumerate_posterior(qmr_program(m), store);
  // oracle first: enumeration over the 4 disease states
  EXPECT_EQ(e.traces.size(), 4u);
  EXPECT_NEAR(std::exp(e.log_evidence), 0.58, 1e-12);

  // posterior marginals from the oracle weights
  double p_d0 = 0, p_d1 = 0;
  for (size_t j = 0; j < e.traces.size(); ++j) {
    if (e.traces[j].entries[0].value.as_index()) p_d0 += e.posterior_weights[j];
    if (e.traces[j].entries[1].value.as_index()) p_d1 += e.posterior_weights[j];
  }
  // p(d0=1, y) = 0.25 * (0.8 + 0.92), p(d1=1, y) = 0.25 * (0.6 + 0.92)
  EXPECT_NEAR(p_d0, 0.25 * (0.8 + 0.92) / 0.58, 1e-12);
  EXPECT_NEAR(p_d1, 0.25 * (0.6 + 0.92) / 0.58, 1e-12);
}

TEST(Qmr, FiveDiseaseModelEnumeratesThirtyTwoStates) {
  const QmrModel m = make_enumerable_qmr(5, 21);
  ParamStore store;
  const auto e = enumerate_posterior(qmr_program(m), store);
  EXPECT_EQ(e.traces.size(), 32u);
}

TEST(Qmr, MonteCarloEvidenceAgreesWithEnumeration) {
  const QmrModel m = make_enumerable_qmr(5, 22);
  const Program program = qmr_program(m);
  ParamStore store;
  const auto e = enumerate_posterior(program, store);

  const int n = 1000000;
  double sum = 0, sumsq = 0;
  Rng rng = make_stream(91, 0);
  for (int i = 0; i < n; ++i) {
    const double w = std::exp(run_target(program, rng).log_lik);
    sum += w;
    sumsq += w * w;
  }
  const double mean = sum / n;
  const double stderr = std::sqrt((sumsq - n * mean * mean) / (n - 1) / n);
  EXPECT_NEAR(mean, std::exp(e.log_evidence), 3 * stderr);
}

TEST(Qmr, NegativeFindingFlagDropsTheirContribution) {
  QmrModel m = make_enumerable_qmr(4, 23);
  m.include_negative = false;
  const Program with_flag = qmr_program(m);
  m.include_negative = true;
  const Program without_flag = qmr_program(m);
  Rng r1 = make_stream(92, 0), r2 = make_stream(92, 0);
  const Trace t1 = run_target(with_flag, r1);
  const Trace t2 = run_target(without_flag, r2);
  // same stream, same disease draws; the flagged run scores fewer findings
  EXPECT_GE(t1.log_lik, t2.log_lik);
}

TEST(Qmr, FileRoundTrip) {
  const QmrModel m = make_desk_qmr();
  std::stringstream ss;
  write_qmr(ss, m);
  const QmrModel back = parse_qmr(ss);
  EXPECT_EQ(back.n_diseases, m.n_diseases);
  EXPECT_EQ(back.n_findings, m.n_findings);
  EXPECT_EQ((back.prior - m.prior).norm(), 0.0);
  EXPECT_EQ((back.leak - m.leak).norm(), 0.0);
  EXPECT_EQ((back.weight - m.weight).norm(), 0.0);
  EXPECT_EQ(back.observed, m.observed);
}

TEST(Qmr, ParserRejectsMalformedInput) {
  std::stringstream bad1("qmr\n2 1\npriors 0.5\n");  // truncated
  EXPECT_THROW(parse_qmr(bad1), IoError);
  std::stringstream bad2("lda\n2 1\n");  // wrong magic
  EXPECT_THROW(parse_qmr(bad2), IoError);
  std::stringstream bad3(
      "qmr\n1 1\npriors 0.5\nleaks 0\nweights 1\n0 5 0.5\nobservations 1\n");
  EXPECT_THROW(parse_qmr(bad3), IoError);  // weight index out of range
}

TEST(Qmr, DeskInstanceShape) {
  const QmrModel m = make_desk_qmr();
  EXPECT_EQ(m.n_diseases, 20);
  EXPECT_EQ(m.n_findings, 30);
  int positives = 0;
  for (uint8_t y : m.observed) positives += y;
  EXPECT_GE(positives, 4);
  EXPECT_LE(positives, 14);
}

TEST(Lda, SingleTopicLogLikIsSumOfWordLogProbs) {
  LdaModel m;
  m.n_topics = 1;
  m.vocab_size = 4;
  m.doc_prior = 1.0;
  m.topic_prior = 0.7;
  m.documents = {{0, 2, 2, 3}};
  const Program program = lda_program(m);
  Rng rng = make_stream(93, 0);
  for (int i = 0; i < 20; ++i) {
    const Trace t = run_target(program, rng);
    const Vec phi = t.entries[0].value.as_simplex();
    double expect = 0;
    for (int w : m.documents[0]) expect += std::log(phi[w]);
    EXPECT_NEAR(t.log_lik, expect, 1e-10);
  }
}

TEST(Lda, TraceStructureIsValueIndependent) {
  const LdaModel m = make_lda_instance(3, 8, 4, 5, 0.5, 0.5, 24);
  const Program program = lda_program(m);
  ParamStore store;
  Rng rng = make_stream(94, 0);
  const int expected = m.n_topics + int(m.documents.size()) + m.total_words();
  for (int i = 0; i < 50; ++i) {
    const Trace t = run_guided(program, store, rng);
    EXPECT_EQ(int(t.entries.size()), expected);
    std::set<std::pair<std::string, int>> addrs;
    for (const auto& e : t.entries) addrs.insert({e.address.site, e.address.occurrence});
    EXPECT_EQ(int(addrs.size()), expected);  // all distinct
  }
  EXPECT_EQ(store.dim(),
            m.n_topics * m.vocab_size + int(m.documents.size()) * m.n_topics +
                m.total_words() * m.n_topics);
}

TEST(Lda, ElboRespectsCollapsedEvidenceOnTinyInstance) {
  LdaModel m;
  m.n_topics = 2;
  m.vocab_size = 3;
  m.doc_prior = 0.8;
  m.topic_prior = 0.6;
  m.documents = {{0, 2}};
  const double log_py = collapsed_lda_log_evidence(m);
  EXPECT_TRUE(std::isfinite(log_py));

  const Program program = lda_program(m);
  ParamStore store;
  Rng rng = make_stream(95, 0);
  const ElboEstimate est = elbo_estimate(program, store, 10000, rng);
  EXPECT_LE(est.mean, log_py + 3 * est.stderr);
}

TEST(Lda, CollapsedEvidenceRefusesLargeInstances) {
  LdaModel m = make_lda_instance(3, 8, 4, 10, 0.5, 0.5, 25);
  EXPECT_THROW(collapsed_lda_log_evidence(m, 1000), ParameterError);
}

TEST(Lda, FileRoundTrip) {
  const LdaModel m = make_desk_lda();
  std::stringstream ss;
  write_lda(ss, m);
  const LdaModel back = parse_lda(ss);
  EXPECT_EQ(back.n_topics, m.n_topics);
  EXPECT_EQ(back.vocab_size, m.vocab_size);
  EXPECT_DOUBLE_EQ(back.doc_prior, m.doc_prior);
  EXPECT_DOUBLE_EQ(back.topic_prior, m.topic_prior);
  EXPECT_EQ(back.documents, m.documents);
}

TEST(Lda, DeskInstanceShape) {
  const LdaModel m = make_desk_lda();
  EXPECT_EQ(m.n_topics, 5);
  EXPECT_EQ(m.vocab_size, 50);
  EXPECT_EQ(m.documents.size(), 10u);
  EXPECT_EQ(m.total_words(), 400);
}

TEST(Enumerate, DeterministicProgramGivesSingleTrace) {
  const Program program = [](ProgramContext& ctx) { ctx.factor(-2.5); };
  ParamStore store;
  const auto e = enumerate_posterior(program, store);
  ASSERT_EQ(e.traces.size(), 1u);
  EXPECT_DOUBLE_EQ(e.log_evidence, -2.5);
  EXPECT_DOUBLE_EQ(e.posterior_weights[0], 1.0);
}

TEST(Enumerate, OneCoinBayesExample) {
  const Program program = one_coin_program(0.5, 0.8, 0.2);
  ParamStore store;
  const auto e = enumerate_posterior(program, store);
  ASSERT_EQ(e.traces.size(), 2u);
  EXPECT_NEAR(std::exp(e.log_evidence), 0.5, 1e-12);
  double p1 = 0;
  for (size_t j = 0; j < e.traces.size(); ++j)
    if (e.traces[j].entries[0].value.as_index() == 1) p1 += e.posterior_weights[j];
  EXPECT_NEAR(p1, 0.8, 1e-12);
}

TEST(Enumerate, ExactGradientMatchesFiniteDifferencesOfExactElbo) {
  const Program program = two_coin_program();
  ParamStore store;
  register_addresses(program, store);
  store.set_params(Address{"a", 0}, vec1(0.35));
  store.set_params(Address{"b", 0}, vec1(-0.15));

  const auto e = enumerate_posterior(program, store);
  const Vec theta = store.flatten();
  for (int i = 0; i < store.dim(); ++i) {
    const double h = 1e-6;
    ParamStore hi = store, lo = store;
    Vec up = theta, dn = theta;
    up[i] += h;
    dn[i] -= h;
    hi.unflatten(up);
    lo.unflatten(dn);
    const double fd = (enumerate_posterior(program, hi).exact_elbo -
                       enumerate_posterior(program, lo).exact_elbo) /
                      (2 * h);
    EXPECT_NEAR(e.exact_gradient[i], fd, 1e-6);
  }
}

TEST(Enumerate, RefusesBlowup) {
  const Program program = [](ProgramContext& ctx) {
    Vec quarter = Vec::Constant(4, 0.25);
    for (int i = 0; i < 10; ++i)
      ctx.sample_erp("c", ErpFamily::categorical(4), quarter);
  };
  ParamStore store;
  EXPECT_THROW(enumerate_posterior(program, store, 1000), ParameterError);
}

TEST(Enumerate, RefusesContinuousErps) {
  const Program program = [](ProgramContext& ctx) {
    ctx.sample_erp("x", ErpFamily::normal(), vec2(0.0, 1.0));
  };
  ParamStore store;
  EXPECT_THROW(enumerate_posterior(program, store), ParameterError);
}

TEST(GaussianPair, ClosedFormExamples) {
  const auto post = gaussian_pair_oracle(0.0, 1.0, 1.0, 0.0);
  EXPECT_NEAR(post.mean, 0.0, 1e-15);
  EXPECT_NEAR(post.std, 1.0 / std::sqrt(2.0), 1e-15);

  const auto centered = gaussian_pair_oracle(1.7, 0.8, 2.0, 1.7);
  EXPECT_NEAR(centered.mean, 1.7, 1e-15);
}

TEST(GaussianPair, MatchesQuadrature) {
  // posterior moments by Simpson integration of prior x likelihood
  const double mu0 = 0.4, s0 = 1.3, sl = 0.9, y = 1.8;
  const auto post = gaussian_pair_oracle(mu0, s0, sl, y);

  const int n = 20000;  // even
  const double lo = post.mean - 12 * post.std, hi = post.mean + 12 * post.std;
  const double h = (hi - lo) / n;
  auto weight = [&](double x) {
    const double zp = (x - mu0) / s0, zl = (y - x) / sl;
    return std::exp(-0.5 * (zp * zp + zl * zl));
  };
  double w0 = 0, w1 = 0, w2 = 0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double simpson = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double w = simpson * weight(x);
    w0 += w;
    w1 += w * x;
    w2 += w * x * x;
  }
  const double mean = w1 / w0;
  const double var = w2 / w0 - mean * mean;
  EXPECT_NEAR(post.mean, mean, 1e-8);
  EXPECT_NEAR(post.std, std::sqrt(var), 1e-8);
}

TEST(GaussianPair, ProgramLogLikMatchesDensity) {
  const GaussianPairModel m{0.0, 1.0, 0.5, 1.2};
  const Program program = gaussian_pair_program(m);
  Rng rng = make_stream(96, 0);
  for (int i = 0; i < 50; ++i) {
    const Trace t = run_target(program, rng);
    const double x = t.entries[0].value.as_real();
    const double z = (m.y - x) / m.lik_std;
    EXPECT_NEAR(t.log_lik, -0.5 * kLog2Pi - std::log(m.lik_std) - 0.5 * z * z, 1e-12);
  }
}
