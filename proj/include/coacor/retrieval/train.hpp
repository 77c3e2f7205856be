#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coacor/core/optim.hpp"
#include "coacor/data/corpus.hpp"
#include "coacor/eval/mrr.hpp"
#include "coacor/retrieval/model.hpp"

namespace coacor::retrieval {

struct CrTrainOptions {
  std::size_t epochs = 20;
  std::size_t batch_size = 128;
  double lr = 0.001;
  double margin = 0.05;
  double clip_norm = 5.0;
  std::size_t max_query_len = 20;
  std::size_t max_code_len = 120;
  std::size_t eval_k = 49;
  std::uint64_t seed = 1;
  std::string val_name = "val";
};

struct CrEpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;     // mean triple loss over the epoch
  double val_mrr = 0.0;
};

struct CrTrainResult {
  RetrievalModel model;  // parameters of the best validation epoch
  std::vector<CrEpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_mrr = 0.0;
};

inline std::vector<eval::EvalItem> eval_items(const data::Corpus& corpus) {
  std::vector<eval::EvalItem> items;
  items.reserve(corpus.size());
  for (const auto& ex : corpus) items.push_back({ex.id, ex.query_group});
  return items;
}

/// MRR of a single retrieval model on `corpus` with K sampled distractors.
inline eval::EvalResult evaluate_retrieval(const RetrievalModel& model, const data::Corpus& corpus,
                                           const data::Vocabulary& query_vocab,
                                           const data::Vocabulary& candidate_vocab,
                                           std::size_t max_query_len, std::size_t max_code_len,
                                           std::size_t k, std::uint64_t seed,
                                           const std::string& dataset) {
  const auto queries = encode_corpus(model, corpus, query_vocab, Side::kNl, max_query_len);
  const auto cands = encode_corpus(model, corpus, candidate_vocab, Side::kCode, max_code_len);
  return eval::mrr_evaluate(
      dataset, eval_items(corpus),
      [&](std::size_t q, std::size_t c) { return cosine_similarity(queries[q], cands[c]); }, k,
      seed);
}

/// Mini-batch Adam over <Q, C, C-> triples with one fresh negative per
/// positive per epoch. Keeps the parameters of the best validation-MRR epoch.
inline CrTrainResult train_cr(const data::Corpus& train, const data::Corpus& val,
                              const data::Vocabulary& query_vocab,
                              const data::Vocabulary& candidate_vocab,
                              const RetrievalConfig& config, const CrTrainOptions& opt) {
  if (train.empty()) fail(ErrorKind::kCorpus, "train_cr: empty training set");
  if (data::count_groups(train) < 2) {
    fail(ErrorKind::kCorpus, "train_cr: training set needs at least 2 query groups");
  }
  if (opt.batch_size == 0) fail(ErrorKind::kConfig, "train_cr: batch_size must be positive");
  RetrievalModel model(config, derive_seed(opt.seed, "cr-init"));
  CrTrainResult result{model, {}, 0, -1.0};
  Rng rng(derive_seed(opt.seed, "cr-train"));
  auto params = model.params().all();

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    shuffle(order, rng);
    double loss_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t end = std::min(order.size(), start + opt.batch_size);
      std::vector<const data::CorpusExample*> pos, neg;
      for (std::size_t i = start; i < end; ++i) {
        pos.push_back(&train[order[i]]);
        neg.push_back(&data::sample_negative(train[order[i]], train, rng));
      }
      const auto batch = data::make_batch(pos, neg, query_vocab, candidate_vocab,
                                          opt.max_query_len, opt.max_code_len);
      ad::Tape tape;
      std::vector<ad::Tensor> losses;
      for (std::size_t b = 0; b < batch.size; ++b) {
        auto q = model.encode(batch.query_ids[b], batch.query_lengths[b], Side::kNl, &rng);
        auto c = model.encode(batch.code_ids[b], batch.code_lengths[b], Side::kCode, &rng);
        auto n = model.encode(batch.negative_code_ids[b], batch.negative_lengths[b], Side::kCode,
                              &rng);
        losses.push_back(ranking_loss(q, c, n, opt.margin));
      }
      ad::Tensor loss = ad::scale(ad::sum_all(losses), 1.0 / static_cast<double>(batch.size));
      if (!std::isfinite(loss.item())) {
        fail(ErrorKind::kDivergence, "train_cr: non-finite loss at epoch " +
                                         std::to_string(epoch) + ", batch starting " +
                                         std::to_string(start));
      }
      loss_total += loss.item() * static_cast<double>(batch.size);
      tape.backward(loss);
      clip_global_norm(params, opt.clip_norm);
      adam_step(params, {.lr = opt.lr});
    }
    CrEpochLog row{epoch, loss_total / static_cast<double>(train.size()), 0.0};
    row.val_mrr = evaluate_retrieval(model, val, query_vocab, candidate_vocab, opt.max_query_len,
                                     opt.max_code_len, opt.eval_k, opt.seed, opt.val_name)
                      .mrr;
    result.log.push_back(row);
    if (row.val_mrr > result.best_val_mrr) {
      result.best_val_mrr = row.val_mrr;
      result.best_epoch = epoch;
      result.model.params().assign_values(model.params());
    }
  }
  if (opt.epochs == 0) result.best_val_mrr = 0.0;
  return result;
}

}  // namespace coacor::retrieval
