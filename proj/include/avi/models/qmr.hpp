#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "avi/models/toy.hpp"

namespace avi::models {

// ---------------------------------------------------------------------------
// Bipartite noisy-or network: diseases are independent Bernoulli causes,
// each finding fires unless the leak and every active cause independently
// fail to trigger it:
//
//   p(f = 1 | x) = 1 - (1 - leak_f) * prod_{d : x_d = 1} (1 - weight[f][d])
// ---------------------------------------------------------------------------

struct QmrModel {
  int n_diseases = 0;
  int n_findings = 0;
  Vec prior;                      // per-disease activation probability
  Vec leak;                       // per-finding leak probability
  Mat weight;                     // n_findings x n_diseases
  std::vector<uint8_t> observed;  // per-finding observation, 0/1
  bool include_negative = true;   // score negative findings in the likelihood

  void validate() const {
    if (n_diseases < 1 || n_findings < 0) throw ParameterError("qmr: bad sizes");
    if (prior.size() != n_diseases || leak.size() != n_findings ||
        weight.rows() != n_findings || weight.cols() != n_diseases ||
        int(observed.size()) != n_findings)
      throw ParameterError("qmr: inconsistent field dimensions");
    auto in01 = [](const Vec& v) { return v.minCoeff() >= 0 && v.maxCoeff() <= 1; };
    if (!in01(prior) || !in01(leak) || weight.minCoeff() < 0 || weight.maxCoeff() > 1)
      throw ParameterError("qmr: probabilities must lie in [0,1]");
  }
};

inline double qmr_finding_prob(const QmrModel& m, int f, const std::vector<int>& x) {
  double fail = 1.0 - m.leak[f];
  for (int d = 0; d < m.n_diseases; ++d)
    if (x[d]) fail *= 1.0 - m.weight(f, d);
  return 1.0 - fail;
}

inline Program qmr_program(const QmrModel& model) {
  model.validate();
  return [model](ProgramContext& ctx) {
    std::vector<int> x(model.n_diseases);
    for (int d = 0; d < model.n_diseases; ++d)
      x[d] = ctx.sample_erp("disease", ErpFamily::bernoulli(), vec1(model.prior[d]))
                 .as_index();
    for (int f = 0; f < model.n_findings; ++f) {
      if (!model.observed[f] && !model.include_negative) continue;
      ctx.observe(ErpFamily::bernoulli(), vec1(qmr_finding_prob(model, f, x)),
                  ErpValue::index(model.observed[f]));
    }
  };
}

// -----------------------------------------------------------------------------
// Model file grammar ('#' starts a comment; whitespace separated):
//
//   qmr
//   <n_diseases> <n_findings>
//   priors <p_0> ... <p_{D-1}>
//   leaks <l_0> ... <l_{F-1}>
//   weights <count>
//   <finding> <disease> <q>        (count triplet lines)
//   observations <y_0> ... <y_{F-1}>
// -----------------------------------------------------------------------------

namespace detail {

// Strips '#' comments, returns whitespace tokens.
inline std::vector<std::string> tokenize_model_file(std::istream& is) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::stringstream ss(line);
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
  }
  return tokens;
}

class TokenReader {
 public:
  explicit TokenReader(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {}

  std::string next(const char* what) {
    if (pos_ >= tokens_.size())
      throw IoError(std::string("model file ended while reading ") + what);
    return tokens_[pos_++];
  }
  void expect(const std::string& word) {
    const std::string tok = next(word.c_str());
    if (tok != word) throw IoError("expected '" + word + "', got '" + tok + "'");
  }
  long integer(const char* what) {
    try {
      return std::stol(next(what));
    } catch (const std::exception&) {
      throw IoError(std::string("bad integer for ") + what);
    }
  }
  double real(const char* what) {
    try {
      return std::stod(next(what));
    } catch (const std::exception&) {
      throw IoError(std::string("bad number for ") + what);
    }
  }
  bool done() const { return pos_ >= tokens_.size(); }

 private:
  std::vector<std::string> tokens_;
  size_t pos_ = 0;
};

inline void write_real(std::ostream& os, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  os << buf;
}

}  // namespace detail

inline QmrModel parse_qmr(std::istream& is) {
  detail::TokenReader r(detail::tokenize_model_file(is));
  r.expect("qmr");
  QmrModel m;
  m.n_diseases = int(r.integer("n_diseases"));
  m.n_findings = int(r.integer("n_findings"));
  if (m.n_diseases < 1 || m.n_findings < 0) throw IoError("qmr: bad sizes");
  m.prior.resize(m.n_diseases);
  m.leak.resize(m.n_findings);
  m.weight = Mat::Zero(m.n_findings, m.n_diseases);
  m.observed.assign(m.n_findings, 0);
  r.expect("priors");
  for (int d = 0; d < m.n_diseases; ++d) m.prior[d] = r.real("prior");
  r.expect("leaks");
  for (int f = 0; f < m.n_findings; ++f) m.leak[f] = r.real("leak");
  r.expect("weights");
  const long n_weights = r.integer("weight count");
  for (long i = 0; i < n_weights; ++i) {
    const int f = int(r.integer("weight finding"));
    const int d = int(r.integer("weight disease"));
    if (f < 0 || f >= m.n_findings || d < 0 || d >= m.n_diseases)
      throw IoError("qmr: weight triplet index out of range");
    m.weight(f, d) = r.real("weight value");
  }
  r.expect("observations");
  for (int f = 0; f < m.n_findings; ++f) {
    const long y = r.integer("observation");
    if (y != 0 && y != 1) throw IoError("qmr: observations must be 0/1");
    m.observed[f] = uint8_t(y);
  }
  if (!r.done()) throw IoError("qmr: trailing tokens in model file");
  m.validate();
  return m;
}

inline void write_qmr(std::ostream& os, const QmrModel& m) {
  m.validate();
  os << "qmr\n" << m.n_diseases << ' ' << m.n_findings << "\npriors";
  for (int d = 0; d < m.n_diseases; ++d) {
    os << ' ';
    detail::write_real(os, m.prior[d]);
  }
  os << "\nleaks";
  for (int f = 0; f < m.n_findings; ++f) {
    os << ' ';
    detail::write_real(os, m.leak[f]);
  }
  long count = 0;
  for (int f = 0; f < m.n_findings; ++f)
    for (int d = 0; d < m.n_diseases; ++d)
      if (m.weight(f, d) != 0) ++count;
  os << "\nweights " << count << '\n';
  for (int f = 0; f < m.n_findings; ++f)
    for (int d = 0; d < m.n_diseases; ++d)
      if (m.weight(f, d) != 0) {
        os << f << ' ' << d << ' ';
        detail::write_real(os, m.weight(f, d));
        os << '\n';
      }
  os << "observations";
  for (int f = 0; f < m.n_findings; ++f) os << ' ' << int(m.observed[f]);
  os << '\n';
}

inline QmrModel load_qmr_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read model file: " + path);
  return parse_qmr(is);
}

// Synthetic benchmark instance: random sparse bipartite structure, findings
// generated from the model itself on a fixed stream.
inline QmrModel make_qmr_instance(int n_diseases, int n_findings, uint64_t gen_seed) {
  QmrModel m;
  m.n_diseases = n_diseases;
  m.n_findings = n_findings;
  Rng rng = make_stream(gen_seed, 0x716d72);
  m.prior.resize(n_diseases);
  for (int d = 0; d < n_diseases; ++d) m.prior[d] = 0.03 + 0.12 * uniform01(rng);
  m.leak.resize(n_findings);
  for (int f = 0; f < n_findings; ++f) m.leak[f] = 0.01 + 0.04 * uniform01(rng);
  m.weight = Mat::Zero(n_findings, n_diseases);
  for (int f = 0; f < n_findings; ++f) {
    const int links = 3 + int(rng() % 4);
    for (int i = 0; i < links; ++i) {
      const int d = int(rng() % uint64_t(n_diseases));
      m.weight(f, d) = 0.3 + 0.6 * uniform01(rng);
    }
  }
  // Observations drawn from the generative process.
  std::vector<int> x(n_diseases);
  for (int d = 0; d < n_diseases; ++d) x[d] = uniform01(rng) < m.prior[d] ? 1 : 0;
  m.observed.assign(n_findings, 0);
  for (int f = 0; f < n_findings; ++f)
    m.observed[f] = uniform01(rng) < qmr_finding_prob(m, f, x) ? 1 : 0;
  m.validate();
  return m;
}

// Desk-scale benchmark default (D=20, F=30).
inline QmrModel make_desk_qmr() { return make_qmr_instance(20, 30, 7); }

// Small enumerable instance for oracle-backed tests.
inline QmrModel make_enumerable_qmr(int n_diseases, uint64_t gen_seed) {
  QmrModel m = make_qmr_instance(n_diseases, std::max(2, n_diseases / 2 + 2), gen_seed);
  return m;
}

}  // namespace avi::models
