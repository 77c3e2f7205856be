#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "coacor/annotation/seq2seq.hpp"
#include "coacor/data/corpus.hpp"
#include "coacor/eval/mrr.hpp"
#include "coacor/retrieval/model.hpp"
#include "coacor/retrieval/train.hpp"

namespace coacor::eval {

using Annotations = std::map<std::string, data::TokenList>;

/// Greedy annotation of every snippet, keyed by example id.
inline Annotations annotate_corpus(const annotation::Seq2SeqModel& model,
                                   const data::Corpus& corpus, const data::Vocabulary& code_vocab,
                                   const data::Vocabulary& nl_vocab, std::size_t max_code_len,
                                   std::size_t max_len = 20) {
  Annotations out;
  for (const auto& ex : corpus) {
    auto code = data::encode_and_pad(ex.code_tokens, code_vocab, max_code_len);
    auto gen = annotation::greedy_decode(model, code.ids, code.length, max_len);
    out[ex.id] = nl_vocab.decode(gen.tokens);
  }
  return out;
}

/// <Q, N> corpus: each snippet's code tokens replaced by its annotation.
/// An empty annotation becomes a single UNK token so it can be encoded.
inline data::Corpus annotated_corpus(const data::Corpus& corpus, const Annotations& annotations) {
  data::Corpus out;
  out.reserve(corpus.size());
  for (const auto& ex : corpus) {
    auto it = annotations.find(ex.id);
    if (it == annotations.end()) {
      fail(ErrorKind::kConfig, "no annotation for example '" + ex.id + "'");
    }
    data::CorpusExample qn = ex;
    qn.code_tokens = it->second.empty() ? data::TokenList{"<unk>"} : it->second;
    out.push_back(std::move(qn));
  }
  return out;
}

inline void write_annotations(const std::string& path, const Annotations& annotations) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write annotations " + path);
  for (const auto& [id, tokens] : annotations) {
    out << nlohmann::json{{"id", id}, {"annotation", tokens}}.dump() << '\n';
  }
}

inline Annotations read_annotations(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read annotations " + path);
  Annotations out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out[j.at("id").get<std::string>()] = j.at("annotation").get<data::TokenList>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kCorpus, path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

/// lambda * cos(v_q, v_n) + (1 - lambda) * cos(v_q, v_c).
inline double ensemble_score(double lambda, double cos_qn, double cos_qc) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    fail(ErrorKind::kConfig, "ensemble weight " + std::to_string(lambda) + " outside [0, 1]");
  }
  return lambda * cos_qn + (1.0 - lambda) * cos_qc;
}

/// Both constituent cosine tables for one dataset, computed once.
class EnsembleScorer {
 public:
  struct Views {
    const retrieval::RetrievalModel* qc = nullptr;
    const retrieval::RetrievalModel* qn = nullptr;
    const data::Vocabulary* code_vocab = nullptr;
    const data::Vocabulary* nl_vocab = nullptr;
    std::size_t max_query_len = 20;
    std::size_t max_code_len = 120;
    std::size_t max_annotation_len = 20;
  };

  /// `annotated` holds the same examples as `corpus` with annotations as code tokens.
  EnsembleScorer(const Views& v, const data::Corpus& corpus, const data::Corpus* annotated) {
    if (v.qc == nullptr || v.code_vocab == nullptr || v.nl_vocab == nullptr) {
      fail(ErrorKind::kConfig, "ensemble scorer needs a QC model and both vocabularies");
    }
    using retrieval::encode_corpus;
    qc_query_ = encode_corpus(*v.qc, corpus, *v.nl_vocab, data::Side::kNl, v.max_query_len);
    qc_code_ = encode_corpus(*v.qc, corpus, *v.code_vocab, data::Side::kCode, v.max_code_len);
    if (v.qn != nullptr) {
      if (annotated == nullptr || annotated->size() != corpus.size()) {
        fail(ErrorKind::kConfig, "QN scoring requires annotations for every snippet");
      }
      qn_query_ = encode_corpus(*v.qn, corpus, *v.nl_vocab, data::Side::kNl, v.max_query_len);
      qn_code_ =
          encode_corpus(*v.qn, *annotated, *v.nl_vocab, data::Side::kCode, v.max_annotation_len);
    }
  }

  bool has_qn() const { return !qn_query_.empty(); }

  double cos_qc(std::size_t q, std::size_t c) const {
    return retrieval::cosine_similarity(qc_query_.at(q), qc_code_.at(c));
  }

  double cos_qn(std::size_t q, std::size_t c) const {
    if (!has_qn()) fail(ErrorKind::kConfig, "QN scores unavailable");
    return retrieval::cosine_similarity(qn_query_.at(q), qn_code_.at(c));
  }

  double score(double lambda, std::size_t q, std::size_t c) const {
    return ensemble_score(lambda, has_qn() ? cos_qn(q, c) : 0.0, cos_qc(q, c));
  }

  PairScorer scorer(double lambda) const {
    if (lambda > 0.0 && !has_qn()) fail(ErrorKind::kConfig, "ensemble needs a QN model");
    return [this, lambda](std::size_t q, std::size_t c) { return score(lambda, q, c); };
  }

 private:
  std::vector<std::vector<double>> qc_query_, qc_code_, qn_query_, qn_code_;
};

struct SweepResult {
  std::vector<double> lambdas;
  std::vector<double> mrrs;
  std::vector<EvalResult> results;
  double best_lambda = 0.0;
  double best_mrr = 0.0;
};

/// Evaluates lambda in {0.0, 0.1, ..., 1.0} on shared pools; the best
/// lambda is the argmax, ties going to the smaller weight.
inline SweepResult lambda_sweep(const std::string& dataset, const std::vector<EvalItem>& items,
                                const EnsembleScorer& scorer, std::size_t k, std::uint64_t seed) {
  SweepResult sweep;
  for (int i = 0; i <= 10; ++i) {
    const double lambda = static_cast<double>(i) / 10.0;
    auto result = mrr_evaluate(dataset, items, scorer.scorer(lambda), k, seed);
    sweep.lambdas.push_back(lambda);
    sweep.mrrs.push_back(result.mrr);
    if (i == 0 || result.mrr > sweep.best_mrr) {
      sweep.best_mrr = result.mrr;
      sweep.best_lambda = lambda;
    }
    sweep.results.push_back(std::move(result));
  }
  return sweep;
}

inline void write_sweep_csv(const std::string& path, const SweepResult& sweep) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write sweep " + path);
  out << "lambda,mrr\n";
  char buf[64];
  for (std::size_t i = 0; i < sweep.lambdas.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.1f,%.17g\n", sweep.lambdas[i], sweep.mrrs[i]);
    out << buf;
  }
}

}  // namespace coacor::eval
