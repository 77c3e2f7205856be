#pragma once

#include <algorithm>
#include <numeric>
#include <span>
#include <vector>

#include "coacor/core/error.hpp"

namespace coacor::retrieval {

/// Rank of `scores[target]` under descending order with the optimistic tie
/// rule: 1 + number of strictly higher scores.
inline std::size_t rank_of(std::span<const double> scores, std::size_t target) {
  if (target >= scores.size()) fail(ErrorKind::kArgument, "rank_of: target out of range");
  std::size_t higher = 0;
  for (double s : scores)
    if (s > scores[target]) ++higher;
  return higher + 1;
}

struct Ranking {
  std::vector<std::size_t> order;  // candidate indices, best first
  std::size_t target_rank = 0;     // 1-based, optimistic ties
};

/// Orders candidates by descending score (stable on ties) and ranks `target`.
inline Ranking rank_candidates(std::span<const double> scores, std::size_t target) {
  if (scores.empty()) fail(ErrorKind::kArgument, "rank_candidates: no candidates");
  Ranking r;
  r.order.resize(scores.size());
  std::iota(r.order.begin(), r.order.end(), std::size_t{0});
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  r.target_rank = rank_of(scores, target);
  return r;
}

}  // namespace coacor::retrieval
