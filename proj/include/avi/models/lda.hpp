#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "avi/models/qmr.hpp"

namespace avi::models {

// ---------------------------------------------------------------------------
// Latent Dirichlet allocation:
//
//   phi_k   ~ Dirichlet(beta * 1_V)    topic-word distributions,  k < K
//   theta_d ~ Dirichlet(alpha * 1_K)   document-topic mixtures,   d < D
//   z_dn    ~ Categorical(theta_d)     per-word topic assignment
//   w_dn    ~ Categorical(phi_{z_dn})  observed word
// ---------------------------------------------------------------------------

struct LdaModel {
  int n_topics = 0;
  int vocab_size = 0;
  double doc_prior = 1.0;    // alpha, concentration over topics
  double topic_prior = 1.0;  // beta, concentration over vocabulary
  std::vector<std::vector<int>> documents;

  void validate() const {
    if (n_topics < 1 || vocab_size < 2) throw ParameterError("lda: bad sizes");
    if (!(doc_prior > 0) || !(topic_prior > 0))
      throw ParameterError("lda: concentrations must be > 0");
    for (const auto& doc : documents)
      for (int w : doc)
        if (w < 0 || w >= vocab_size)
          throw ParameterError("lda: word index out of vocabulary");
  }

  int total_words() const {
    int n = 0;
    for (const auto& doc : documents) n += int(doc.size());
    return n;
  }
};

inline Program lda_program(const LdaModel& model) {
  model.validate();
  return [model](ProgramContext& ctx) {
    const int K = model.n_topics, V = model.vocab_size;
    std::vector<Vec> phi(K);
    for (int k = 0; k < K; ++k)
      phi[k] = ctx.sample_erp("topic", ErpFamily::dirichlet(V),
                              Vec::Constant(V, model.topic_prior))
                   .as_simplex();
    for (const auto& doc : model.documents) {
      const Vec theta = ctx.sample_erp("doc", ErpFamily::dirichlet(K),
                                       Vec::Constant(K, model.doc_prior))
                            .as_simplex();
      for (int word : doc) {
        const int z =
            ctx.sample_erp("z", ErpFamily::categorical(K), theta).as_index();
        ctx.observe(ErpFamily::categorical(V), phi[z], ErpValue::index(word));
      }
    }
  };
}

// -----------------------------------------------------------------------------
// Model file grammar ('#' starts a comment):
//
//   lda
//   <n_topics> <vocab_size>
//   alpha <doc_prior>
//   beta <topic_prior>
//   docs <n_documents>
//   <len> <w_0> ... <w_{len-1}>      (one group per document)
// -----------------------------------------------------------------------------

inline LdaModel parse_lda(std::istream& is) {
  detail::TokenReader r(detail::tokenize_model_file(is));
  r.expect("lda");
  LdaModel m;
  m.n_topics = int(r.integer("n_topics"));
  m.vocab_size = int(r.integer("vocab_size"));
  r.expect("alpha");
  m.doc_prior = r.real("alpha");
  r.expect("beta");
  m.topic_prior = r.real("beta");
  r.expect("docs");
  const long n_docs = r.integer("doc count");
  for (long d = 0; d < n_docs; ++d) {
    const long len = r.integer("doc length");
    if (len < 0) throw IoError("lda: negative document length");
    std::vector<int> doc(len);
    for (long i = 0; i < len; ++i) doc[i] = int(r.integer("word index"));
    m.documents.push_back(std::move(doc));
  }
  if (!r.done()) throw IoError("lda: trailing tokens in model file");
  m.validate();
  return m;
}

inline void write_lda(std::ostream& os, const LdaModel& m) {
  m.validate();
  os << "lda\n" << m.n_topics << ' ' << m.vocab_size << "\nalpha ";
  detail::write_real(os, m.doc_prior);
  os << "\nbeta ";
  detail::write_real(os, m.topic_prior);
  os << "\ndocs " << m.documents.size() << '\n';
  for (const auto& doc : m.documents) {
    os << doc.size();
    for (int w : doc) os << ' ' << w;
    os << '\n';
  }
}

inline LdaModel load_lda_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read model file: " + path);
  return parse_lda(is);
}

// Synthetic corpus drawn from the generative process on a fixed stream.
inline LdaModel make_lda_instance(int n_topics, int vocab_size, int n_docs,
                                  int words_per_doc, double alpha, double beta,
                                  uint64_t gen_seed) {
  LdaModel m;
  m.n_topics = n_topics;
  m.vocab_size = vocab_size;
  m.doc_prior = alpha;
  m.topic_prior = beta;
  Rng rng = make_stream(gen_seed, 0x6c6461);
  auto dirichlet = [&](int dim, double conc) {
    Vec x(dim);
    for (int i = 0; i < dim; ++i) x[i] = std::max(1e-12, standard_gamma(rng, conc));
    x /= x.sum();
    return x;
  };
  auto pick = [&](const Vec& probs) {
    const double u = uniform01(rng);
    double acc = 0;
    for (int i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return int(i);
    }
    return int(probs.size() - 1);
  };
  std::vector<Vec> phi(n_topics);
  for (int k = 0; k < n_topics; ++k) phi[k] = dirichlet(vocab_size, beta);
  for (int d = 0; d < n_docs; ++d) {
    const Vec theta = dirichlet(n_topics, alpha);
    std::vector<int> doc(words_per_doc);
    for (int i = 0; i < words_per_doc; ++i) doc[i] = pick(phi[pick(theta)]);
    m.documents.push_back(std::move(doc));
  }
  m.validate();
  return m;
}

// Desk-scale benchmark default (K=5, V=50, 10 docs, 40 words each).
inline LdaModel make_desk_lda() {
  return make_lda_instance(5, 50, 10, 40, 0.5, 0.2, 11);
}

// Exact log evidence by summing the collapsed Dirichlet-multinomial over all
// K^total_words topic-assignment patterns. Feasible only for tiny corpora.
inline double collapsed_lda_log_evidence(const LdaModel& m,
                                         long max_patterns = 1000000) {
  m.validate();
  const int K = m.n_topics, V = m.vocab_size;
  const int W = m.total_words();
  double patterns = std::pow(double(K), double(W));
  if (patterns > double(max_patterns))
    throw ParameterError("collapsed_lda_log_evidence: assignment space too large");

  std::vector<int> flat_word, flat_doc;
  for (size_t d = 0; d < m.documents.size(); ++d)
    for (int w : m.documents[d]) {
      flat_word.push_back(w);
      flat_doc.push_back(int(d));
    }

  const long total = long(patterns);
  std::vector<double> terms;
  terms.reserve(total);
  std::vector<int> z(W, 0);
  const int D = int(m.documents.size());
  for (long code = 0; code < total; ++code) {
    long c = code;
    for (int i = 0; i < W; ++i) {
      z[i] = int(c % K);
      c /= K;
    }
    // log p(z): per-document Dirichlet-multinomial over topic counts.
    double lp = 0;
    for (int d = 0; d < D; ++d) {
      std::vector<int> cnt(K, 0);
      int nd = 0;
      for (int i = 0; i < W; ++i)
        if (flat_doc[i] == d) {
          ++cnt[z[i]];
          ++nd;
        }
      lp += std::lgamma(K * m.doc_prior) - std::lgamma(K * m.doc_prior + nd);
      for (int k = 0; k < K; ++k)
        lp += std::lgamma(m.doc_prior + cnt[k]) - std::lgamma(m.doc_prior);
    }
    // log p(w|z): per-topic Dirichlet-multinomial over vocabulary counts.
    for (int k = 0; k < K; ++k) {
      std::vector<int> cnt(V, 0);
      int mk = 0;
      for (int i = 0; i < W; ++i)
        if (z[i] == k) {
          ++cnt[flat_word[i]];
          ++mk;
        }
      lp += std::lgamma(V * m.topic_prior) - std::lgamma(V * m.topic_prior + mk);
      for (int v = 0; v < V; ++v)
        if (cnt[v] > 0)
          lp += std::lgamma(m.topic_prior + cnt[v]) - std::lgamma(m.topic_prior);
    }
    terms.push_back(lp);
  }
  return log_sum_exp(Eigen::Map<const Vec>(terms.data(), long(terms.size())));
}

}  // namespace avi::models
