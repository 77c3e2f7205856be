#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "coacor/annotation/seq2seq.hpp"
#include "coacor/core/optim.hpp"
#include "coacor/data/corpus.hpp"
#include "coacor/eval/bleu.hpp"

namespace coacor::annotation {

/// Encodes <C, Q> as a likelihood-training pair with Q as the target
/// annotation (truncated to `max_query_len`, then EOS).
inline AnnotationPair make_annotation_pair(const data::CorpusExample& ex,
                                           const data::Vocabulary& code_vocab,
                                           const data::Vocabulary& nl_vocab,
                                           std::size_t max_code_len, std::size_t max_query_len) {
  auto code = data::encode_and_pad(ex.code_tokens, code_vocab, max_code_len);
  auto query = data::encode_and_pad(ex.query_tokens, nl_vocab, max_query_len);
  AnnotationPair pair{std::move(code.ids), code.length, {}};
  pair.target.assign(query.ids.begin(), query.ids.begin() + query.length);
  pair.target.push_back(data::kEos);
  return pair;
}

inline std::vector<AnnotationPair> make_annotation_pairs(const data::Corpus& corpus,
                                                         const data::Vocabulary& code_vocab,
                                                         const data::Vocabulary& nl_vocab,
                                                         std::size_t max_code_len,
                                                         std::size_t max_query_len) {
  std::vector<AnnotationPair> out;
  out.reserve(corpus.size());
  for (const auto& ex : corpus)
    out.push_back(make_annotation_pair(ex, code_vocab, nl_vocab, max_code_len, max_query_len));
  return out;
}

/// Corpus BLEU of greedy annotations against the paired targets (EOS dropped).
inline double greedy_bleu(const Seq2SeqModel& model, const std::vector<AnnotationPair>& pairs,
                          std::size_t max_len) {
  std::vector<std::vector<TokenId>> hyps;
  std::vector<std::vector<std::vector<TokenId>>> refs;
  for (const auto& p : pairs) {
    hyps.push_back(greedy_decode(model, p.code, p.code_length, max_len).tokens);
    refs.push_back({std::vector<TokenId>(p.target.begin(), p.target.end() - 1)});
  }
  return eval::bleu_corpus(hyps, refs);
}

struct MleOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  double lr = 0.001;
  double clip_norm = 5.0;
  std::size_t max_code_len = 120;
  std::size_t max_query_len = 20;
  std::size_t max_annotation_len = 20;
  std::uint64_t seed = 1;
};

struct MleEpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double val_bleu = 0.0;
};

struct MleResult {
  Seq2SeqModel model;  // best validation-BLEU epoch; last epoch without a validation set
  std::vector<MleEpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_bleu = 0.0;
};

/// Teacher-forced likelihood training with Adam; selects by validation BLEU.
inline MleResult train_mle(const data::Corpus& train, const data::Corpus& val,
                           const data::Vocabulary& code_vocab, const data::Vocabulary& nl_vocab,
                           const Seq2SeqConfig& config, const MleOptions& opt) {
  if (train.empty()) fail(ErrorKind::kCorpus, "train_mle: empty training set");
  if (opt.batch_size == 0) fail(ErrorKind::kConfig, "train_mle: batch_size must be positive");
  Seq2SeqModel model(config, derive_seed(opt.seed, "ca-init"));
  MleResult result{model, {}, 0, -1.0};
  const auto pairs =
      make_annotation_pairs(train, code_vocab, nl_vocab, opt.max_code_len, opt.max_query_len);
  const auto val_pairs =
      make_annotation_pairs(val, code_vocab, nl_vocab, opt.max_code_len, opt.max_query_len);
  Rng rng(derive_seed(opt.seed, "ca-mle"));
  auto params = model.params().all();
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    shuffle(order, rng);
    double loss_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      std::vector<AnnotationPair> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + opt.batch_size); ++i)
        batch.push_back(pairs[order[i]]);
      ad::Tape tape;
      ad::Tensor loss = mle_loss(model, batch, &rng);
      if (!std::isfinite(loss.item())) {
        fail(ErrorKind::kDivergence, "train_mle: non-finite loss at epoch " + std::to_string(epoch));
      }
      loss_total += loss.item();
      ++batches;
      tape.backward(loss);
      clip_global_norm(params, opt.clip_norm);
      adam_step(params, {.lr = opt.lr});
    }
    MleEpochLog row{epoch, loss_total / static_cast<double>(batches), 0.0};
    if (!val_pairs.empty()) row.val_bleu = greedy_bleu(model, val_pairs, opt.max_annotation_len);
    result.log.push_back(row);
    if (val_pairs.empty() || row.val_bleu > result.best_val_bleu) {
      result.best_val_bleu = row.val_bleu;
      result.best_epoch = epoch;
      result.model.params().assign_values(model.params());
    }
  }
  if (opt.epochs == 0) result.best_val_bleu = 0.0;
  return result;
}

}  // namespace coacor::annotation
