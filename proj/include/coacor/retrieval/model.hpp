#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "coacor/core/optim.hpp"
#include "coacor/core/rng.hpp"
#include "coacor/core/tensor.hpp"
#include "coacor/data/corpus.hpp"
#include "coacor/data/vocab.hpp"
#include "coacor/retrieval/lstm.hpp"
#include "coacor/retrieval/rank.hpp"

namespace coacor::retrieval {

using data::Side;
using data::TokenId;

struct RetrievalConfig {
  std::size_t query_vocab = 0;      // NL vocabulary size
  std::size_t candidate_vocab = 0;  // code vocabulary (QC) or NL vocabulary (QN)
  std::size_t embed_dim = 200;
  std::size_t hidden = 200;
  double dropout = 0.1;
};

/// Dual Bi-LSTM encoder scoring queries against candidates by cosine.
///
/// The NL side (Side::kNl) encodes queries; the code side (Side::kCode)
/// encodes candidates, which are code tokens for the QC model and
/// annotation tokens for the QN model.
class RetrievalModel {
 public:
  RetrievalModel(const RetrievalConfig& config, std::uint64_t init_seed) : config_(config) {
    if (config.query_vocab == 0 || config.candidate_vocab == 0 || config.embed_dim == 0 ||
        config.hidden == 0) {
      fail(ErrorKind::kArgument, "RetrievalModel: all dimensions must be positive");
    }
    store_.add("code_embedding", {config.candidate_vocab, config.embed_dim});
    store_.add("nl_embedding", {config.query_vocab, config.embed_dim});
    BiLstm::create(store_, "code_bilstm", config.embed_dim, config.hidden);
    BiLstm::create(store_, "nl_bilstm", config.embed_dim, config.hidden);
    Rng rng(init_seed);
    init_uniform(store_, rng);
    bind();
    for (BiLstm* b : {&code_lstm_, &nl_lstm_}) {
      b->forward.set_forget_bias(1.0);
      b->backward.set_forget_bias(1.0);
    }
  }

  RetrievalModel(const RetrievalModel& other) : config_(other.config_), store_(other.store_) {
    bind();
  }
  RetrievalModel& operator=(const RetrievalModel& other) {
    if (this != &other) {
      config_ = other.config_;
      store_ = other.store_;
      bind();
    }
    return *this;
  }

  const RetrievalConfig& config() const { return config_; }
  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }
  std::size_t output_size() const { return 2 * config_.hidden; }

  /// v = tanh(maxpool([h_1 .. h_length])) over Bi-LSTM states of the first
  /// `length` ids. Passing `dropout_rng` enables training-mode dropout on the
  /// embeddings and on the concatenated states.
  ad::Tensor encode(std::span<const TokenId> ids, std::size_t length, Side side,
                    Rng* dropout_rng = nullptr) const {
    if (length == 0 || length > ids.size()) {
      fail(ErrorKind::kArgument, "encode_sequence: length " + std::to_string(length) +
                                     " outside [1, " + std::to_string(ids.size()) + "]");
    }
    const ad::Tensor& table =
        side == Side::kCode ? code_embedding_->tensor : nl_embedding_->tensor;
    const BiLstm& lstm = side == Side::kCode ? code_lstm_ : nl_lstm_;
    const bool drop = dropout_rng != nullptr && config_.dropout > 0.0;
    std::vector<ad::Tensor> inputs;
    inputs.reserve(length);
    for (std::size_t t = 0; t < length; ++t) {
      ad::Tensor x = ad::embedding(table, ids[t]);
      if (drop) x = ad::apply_mask(x, dropout_mask(x.size(), *dropout_rng));
      inputs.push_back(x);
    }
    BiLstmOutput run = lstm.run(inputs);
    if (drop) {
      for (auto& s : run.states) s = ad::apply_mask(s, dropout_mask(s.size(), *dropout_rng));
    }
    return ad::tanh(ad::max_over_time(ad::stack(run.states)));
  }

  std::vector<double> embed(std::span<const TokenId> ids, std::size_t length, Side side) const {
    ad::NoGrad no_grad;
    auto v = encode(ids, length, side);
    return {v.values().begin(), v.values().end()};
  }

  std::vector<double> embed_tokens(const data::TokenList& tokens, const data::Vocabulary& vocab,
                                   std::size_t max_len, Side side) const {
    auto enc = data::encode_and_pad(tokens, vocab, max_len);
    return embed(enc.ids, enc.length, side);
  }

 private:
  std::vector<double> dropout_mask(std::size_t n, Rng& rng) const {
    std::vector<double> mask(n);
    const double keep = 1.0 - config_.dropout;
    for (double& m : mask) m = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
    return mask;
  }

  void bind() {
    code_embedding_ = &store_.get("code_embedding");
    nl_embedding_ = &store_.get("nl_embedding");
    code_lstm_ = BiLstm::bind(store_, "code_bilstm");
    nl_lstm_ = BiLstm::bind(store_, "nl_bilstm");
  }

  RetrievalConfig config_;
  ParameterStore store_;
  Parameter* code_embedding_ = nullptr;
  Parameter* nl_embedding_ = nullptr;
  BiLstm code_lstm_;
  BiLstm nl_lstm_;
};

/// Plain cosine on value vectors; 0 for a zero-norm operand.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

/// max(0, margin - cos(q, c) + cos(q, c_neg)).
inline ad::Tensor ranking_loss(const ad::Tensor& query, const ad::Tensor& positive,
                               const ad::Tensor& negative, double margin = 0.05) {
  if (query.shape() != positive.shape() || query.shape() != negative.shape()) {
    fail(ErrorKind::kDimension, "ranking_loss: encoded vectors differ in dimension");
  }
  ad::Tensor gap = ad::sub(ad::cosine(query, negative), ad::cosine(query, positive));
  return ad::relu(ad::add_constant(gap, margin));
}

/// Ranks candidate vectors by cosine to `query`.
inline Ranking rank_candidates(std::span<const double> query,
                               const std::vector<std::vector<double>>& candidates,
                               std::size_t target) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto& c : candidates) scores.push_back(cosine_similarity(query, c));
  return rank_candidates(std::span<const double>(scores), target);
}

/// Encodes every example of `corpus` on one side (queries through the NL
/// encoder, candidates through the code encoder).
inline std::vector<std::vector<double>> encode_corpus(const RetrievalModel& model,
                                                      const data::Corpus& corpus,
                                                      const data::Vocabulary& vocab, Side side,
                                                      std::size_t max_len) {
  std::vector<std::vector<double>> out;
  out.reserve(corpus.size());
  for (const auto& ex : corpus) {
    const auto& tokens = side == Side::kNl ? ex.query_tokens : ex.code_tokens;
    out.push_back(model.embed_tokens(tokens, vocab, max_len, side));
  }
  return out;
}

}  // namespace coacor::retrieval
