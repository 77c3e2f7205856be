#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "coacor/core/rng.hpp"
#include "coacor/data/corpus.hpp"
#include "coacor/eval/bleu.hpp"
#include "coacor/retrieval/model.hpp"

namespace coacor::rl {

using data::TokenId;

enum class RewardKind { kMrr, kBleu };

struct RewardSpec {
  RewardKind kind = RewardKind::kMrr;
  std::size_t pool_size = 49;  // K distractors per episode
  std::uint64_t seed = 1;
};

/// Reciprocal rank of candidate 0 (the annotated snippet) when the
/// annotation is used as a query against `candidates` under a frozen QC
/// model. An empty annotation earns 0.
inline double retrieval_reward(const retrieval::RetrievalModel& frozen_cr,
                               std::span<const TokenId> annotation,
                               const std::vector<std::vector<double>>& candidates,
                               std::size_t max_query_len = 20) {
  if (annotation.empty()) return 0.0;
  if (candidates.empty()) fail(ErrorKind::kArgument, "retrieval_reward: empty pool");
  const std::size_t length = std::min(annotation.size(), max_query_len);
  const auto query = frozen_cr.embed(annotation, length, data::Side::kNl);
  const auto ranking = retrieval::rank_candidates(query, candidates, 0);
  return 1.0 / static_cast<double>(ranking.target_rank);
}

/// Smoothed sentence BLEU-4 of an annotation against its reference query.
inline double bleu_reward(std::span<const TokenId> candidate, std::span<const TokenId> reference) {
  return eval::sentence_bleu(std::vector<TokenId>(candidate.begin(), candidate.end()),
                             std::vector<TokenId>(reference.begin(), reference.end()));
}

/// Scores annotations of snippets from a fixed code base with a frozen QC
/// model. Code vectors are computed once; the object is read-only afterwards
/// and may be shared across threads.
class RetrievalRewardProvider {
 public:
  RetrievalRewardProvider(std::shared_ptr<const retrieval::RetrievalModel> frozen_cr,
                          const data::Corpus& code_base, const data::Vocabulary& code_vocab,
                          std::size_t max_code_len, std::size_t max_query_len)
      : cr_(std::move(frozen_cr)), max_query_len_(max_query_len) {
    if (!cr_) fail(ErrorKind::kDependency, "reward provider needs a QC retrieval model");
    code_vectors_ =
        retrieval::encode_corpus(*cr_, code_base, code_vocab, data::Side::kCode, max_code_len);
    for (const auto& ex : code_base) groups_.push_back(ex.query_group);
  }

  std::size_t size() const { return code_vectors_.size(); }

  /// K distinct distractors whose query group differs from the target's.
  std::vector<std::size_t> sample_pool(std::size_t target, std::size_t k, Rng& rng) const {
    std::vector<std::size_t> eligible;
    for (std::size_t j = 0; j < groups_.size(); ++j)
      if (groups_[j] != groups_[target]) eligible.push_back(j);
    if (eligible.size() < k) {
      fail(ErrorKind::kDataset, "reward pool: only " + std::to_string(eligible.size()) +
                                    " eligible distractors for K=" + std::to_string(k));
    }
    for (std::size_t n = 0; n < k; ++n) {
      const std::size_t pick = n + static_cast<std::size_t>(rng.index(eligible.size() - n));
      std::swap(eligible[n], eligible[pick]);
    }
    eligible.resize(k);
    return eligible;
  }

  double reward(std::size_t target, std::span<const TokenId> annotation,
                std::span<const std::size_t> pool) const {
    std::vector<std::vector<double>> candidates;
    candidates.reserve(pool.size() + 1);
    candidates.push_back(code_vectors_.at(target));
    for (std::size_t j : pool) candidates.push_back(code_vectors_.at(j));
    return retrieval_reward(*cr_, annotation, candidates, max_query_len_);
  }

  const std::vector<double>& code_vector(std::size_t i) const { return code_vectors_.at(i); }
  const retrieval::RetrievalModel& model() const { return *cr_; }

 private:
  std::shared_ptr<const retrieval::RetrievalModel> cr_;
  std::size_t max_query_len_;
  std::vector<std::vector<double>> code_vectors_;
  std::vector<std::string> groups_;
};

}  // namespace coacor::rl
