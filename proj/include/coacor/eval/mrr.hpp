#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coacor/core/error.hpp"
#include "coacor/core/rng.hpp"
#include "coacor/retrieval/rank.hpp"

namespace coacor::eval {

/// Identity of one <Q, C> pair for pool construction.
struct EvalItem {
  std::string id;
  std::string query_group;
};

struct EvalResult {
  std::string dataset;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> ids;
  std::vector<std::size_t> ranks;
  double mrr = 0.0;
};

inline double mean_reciprocal_rank(const std::vector<std::size_t>& ranks) {
  if (ranks.empty()) fail(ErrorKind::kDataset, "MRR of empty rank list");
  double total = 0.0;
  for (std::size_t r : ranks) total += 1.0 / static_cast<double>(r);
  return total / static_cast<double>(ranks.size());
}

/// Score of query `q` (index into the dataset) against the code of example `c`.
using PairScorer = std::function<double(std::size_t q, std::size_t c)>;

/// Indices of K distractors for item `i`, excluding its query group. The
/// generator is seeded from (seed, dataset name, example id) so every scorer
/// sees the same pools.
inline std::vector<std::size_t> sample_pool(const std::vector<EvalItem>& items, std::size_t i,
                                            std::size_t k, std::uint64_t seed,
                                            const std::string& dataset) {
  std::vector<std::size_t> eligible;
  for (std::size_t j = 0; j < items.size(); ++j)
    if (items[j].query_group != items[i].query_group) eligible.push_back(j);
  if (eligible.size() < k) {
    fail(ErrorKind::kDataset, "dataset '" + dataset + "': example '" + items[i].id + "' has " +
                                  std::to_string(eligible.size()) + " eligible distractors, need " +
                                  std::to_string(k));
  }
  Rng rng(derive_seed(seed, dataset + "/" + items[i].id));
  for (std::size_t n = 0; n < k; ++n) {
    const std::size_t pick = n + static_cast<std::size_t>(rng.index(eligible.size() - n));
    std::swap(eligible[n], eligible[pick]);
  }
  eligible.resize(k);
  return eligible;
}

/// Ranks each example's own code among itself plus K sampled distractors.
inline EvalResult mrr_evaluate(const std::string& dataset, const std::vector<EvalItem>& items,
                               const PairScorer& scorer, std::size_t k, std::uint64_t seed) {
  if (items.empty()) fail(ErrorKind::kDataset, "dataset '" + dataset + "' is empty");
  EvalResult result{dataset, k, seed, {}, {}, 0.0};
  std::vector<double> scores;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto pool = sample_pool(items, i, k, seed, dataset);
    scores.assign(1, scorer(i, i));
    for (std::size_t j : pool) scores.push_back(scorer(i, j));
    result.ids.push_back(items[i].id);
    result.ranks.push_back(retrieval::rank_of(scores, 0));
  }
  result.mrr = mean_reciprocal_rank(result.ranks);
  return result;
}

inline nlohmann::json to_json(const EvalResult& r) {
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t i = 0; i < r.ids.size(); ++i) per.push_back({{"id", r.ids[i]}, {"rank", r.ranks[i]}});
  return {{"dataset", r.dataset}, {"K", r.k}, {"seed", r.seed}, {"mrr", r.mrr}, {"per_example", per}};
}

inline void write_report(const std::string& path, const EvalResult& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write report " + path);
  out << to_json(r).dump(2) << '\n';
}

}  // namespace coacor::eval
