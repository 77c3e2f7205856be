#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "coacor/core/error.hpp"

namespace coacor::eval {

namespace detail {

template <typename Token>
std::map<std::vector<Token>, std::size_t> ngram_counts(const std::vector<Token>& seq,
                                                       std::size_t n) {
  std::map<std::vector<Token>, std::size_t> counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    ++counts[std::vector<Token>(seq.begin() + i, seq.begin() + i + n)];
  }
  return counts;
}

}  // namespace detail

/// Smoothed sentence-level BLEU-4.
///
/// Clipped n-gram precisions; unigram precision unsmoothed, add-one
/// smoothing for n >= 2; geometric mean; brevity penalty exp(1 - r/c) when
/// the candidate is shorter than the reference.
template <typename Token>
double sentence_bleu(const std::vector<Token>& candidate, const std::vector<Token>& reference) {
  if (reference.empty()) fail(ErrorKind::kArgument, "sentence_bleu: empty reference");
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto cand = detail::ngram_counts(candidate, n);
    const auto ref = detail::ngram_counts(reference, n);
    std::size_t matches = 0;
    for (const auto& [gram, count] : cand) {
      auto it = ref.find(gram);
      if (it != ref.end()) matches += std::min(count, it->second);
    }
    const std::size_t total = candidate.size() >= n ? candidate.size() - n + 1 : 0;
    double precision;
    if (n == 1) {
      if (matches == 0) return 0.0;
      precision = static_cast<double>(matches) / static_cast<double>(total);
    } else {
      precision = static_cast<double>(matches + 1) / static_cast<double>(total + 1);
    }
    log_sum += std::log(precision);
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double brevity = c < r ? std::exp(1.0 - r / c) : 1.0;
  return brevity * std::exp(log_sum / 4.0);
}

/// Mean over examples of the best sentence BLEU against that example's
/// references.
template <typename Token>
double bleu_corpus(const std::vector<std::vector<Token>>& hypotheses,
                   const std::vector<std::vector<std::vector<Token>>>& references) {
  if (hypotheses.size() != references.size()) {
    fail(ErrorKind::kArgument, "bleu_corpus: " + std::to_string(hypotheses.size()) +
                                   " hypotheses vs " + std::to_string(references.size()) +
                                   " reference sets");
  }
  if (hypotheses.empty()) fail(ErrorKind::kArgument, "bleu_corpus: empty corpus");
  double total = 0.0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    if (references[i].empty()) fail(ErrorKind::kArgument, "bleu_corpus: example without reference");
    double best = 0.0;
    for (const auto& ref : references[i]) best = std::max(best, sentence_bleu(hypotheses[i], ref));
    total += best;
  }
  return total / static_cast<double>(hypotheses.size());
}

}  // namespace coacor::eval
