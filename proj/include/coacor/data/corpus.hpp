#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "coacor/core/error.hpp"
#include "coacor/core/rng.hpp"
#include "coacor/data/tokenize.hpp"
#include "coacor/data/vocab.hpp"

namespace coacor::data {

/// One <query, code> pair. `query_group` is shared by every example whose
/// query asks the same underlying question.
struct CorpusExample {
  std::string id;
  std::string query_group;
  TokenList query_tokens;
  TokenList code_tokens;
};

using Corpus = std::vector<CorpusExample>;

/// Untokenized corpus record as stored in the raw JSONL file.
struct RawExample {
  std::string id;
  std::string query_group;
  std::string query;
  std::string code;
};

inline std::vector<RawExample> read_raw_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read corpus " + path);
  std::vector<RawExample> out;
  std::string line;
  std::size_t line_no = 0;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kCorpus, "malformed JSONL at line " + std::to_string(line_no) +
                                   " (" + where + "): " + e.what());
    }
    RawExample ex;
    for (auto [field, dst] : {std::pair{"id", &ex.id}, std::pair{"query_group", &ex.query_group},
                              std::pair{"query", &ex.query}, std::pair{"code", &ex.code}}) {
      if (!j.is_object() || !j.contains(field) || !j[field].is_string()) {
        fail(ErrorKind::kCorpus, "malformed JSONL at line " + std::to_string(line_no) +
                                     ": missing string field '" + field + "'");
      }
      *dst = j[field].get<std::string>();
    }
    if (!seen.insert(ex.id).second) {
      fail(ErrorKind::kCorpus, "duplicate id '" + ex.id + "' at line " + std::to_string(line_no));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

inline void write_raw_jsonl(const std::string& path, const std::vector<RawExample>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write corpus " + path);
  for (const auto& r : rows) {
    nlohmann::json j = {{"id", r.id}, {"query_group", r.query_group},
                        {"query", r.query}, {"code", r.code}};
    out << j.dump() << '\n';
  }
}

inline CorpusExample tokenize_example(const RawExample& raw) {
  return {raw.id, raw.query_group, tokenize_nl(raw.query), tokenize_code(raw.code)};
}

/// Tokenized splits: {id, query_group, query_tokens, code_tokens} per line.
inline void write_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path);
  for (const auto& ex : corpus) {
    nlohmann::json j = {{"id", ex.id}, {"query_group", ex.query_group},
                        {"query_tokens", ex.query_tokens}, {"code_tokens", ex.code_tokens}};
    out << j.dump() << '\n';
  }
}

inline Corpus read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read " + path);
  Corpus out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("query_group").get<std::string>(),
                     j.at("query_tokens").get<TokenList>(),
                     j.at("code_tokens").get<TokenList>()});
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kCorpus, path + ": malformed line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::size_t count_groups(const Corpus& corpus) {
  std::unordered_set<std::string> groups;
  for (const auto& ex : corpus) groups.insert(ex.query_group);
  return groups.size();
}

/// Draws uniformly among examples whose query_group differs from `example`'s.
inline const CorpusExample& sample_negative(const CorpusExample& example,
                                            const Corpus& corpus, Rng& rng) {
  if (corpus.empty()) fail(ErrorKind::kCorpus, "sample_negative: empty corpus");
  // rejection sampling is exactly uniform over the eligible subset
  for (int attempt = 0; attempt < 64; ++attempt) {
    const auto& cand = corpus[rng.index(corpus.size())];
    if (cand.query_group != example.query_group) return cand;
  }
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    if (corpus[i].query_group != example.query_group) eligible.push_back(i);
  if (eligible.empty()) {
    fail(ErrorKind::kCorpus, "sample_negative: no example outside query group '" +
                                 example.query_group + "'");
  }
  return corpus[eligible[rng.index(eligible.size())]];
}

struct SplitRatios {
  double train = 0.75;
  double val = 0.10;
  double test = 0.15;
};

struct DatasetSplit {
  Corpus train;
  Corpus val;
  Corpus test;
};

/// Partitions by query_group so no group spans two splits.
inline DatasetSplit split_dataset(const Corpus& corpus, const SplitRatios& ratios,
                                  std::uint64_t seed) {
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    fail(ErrorKind::kArgument, "split ratios must sum to 1");
  }
  std::vector<std::string> groups;
  {
    std::set<std::string> unique;
    for (const auto& ex : corpus) unique.insert(ex.query_group);
    groups.assign(unique.begin(), unique.end());
  }
  const std::size_t g = groups.size();
  if (g < 3) {
    fail(ErrorKind::kCorpus, "split_dataset: need at least 3 query groups, have " +
                                 std::to_string(g));
  }
  Rng rng(seed);
  shuffle(groups, rng);
  auto n_val = static_cast<std::size_t>(std::llround(ratios.val * static_cast<double>(g)));
  auto n_test = static_cast<std::size_t>(std::llround(ratios.test * static_cast<double>(g)));
  n_val = std::max<std::size_t>(n_val, 1);
  n_test = std::max<std::size_t>(n_test, 1);
  while (n_val + n_test >= g) {
    if (n_test >= n_val && n_test > 1) --n_test;
    else if (n_val > 1) --n_val;
    else break;
  }
  std::unordered_map<std::string, int> which;
  for (std::size_t i = 0; i < g; ++i) {
    which[groups[i]] = i < n_val ? 1 : (i < n_val + n_test ? 2 : 0);
  }
  DatasetSplit split;
  for (const auto& ex : corpus) {
    switch (which[ex.query_group]) {
      case 0: split.train.push_back(ex); break;
      case 1: split.val.push_back(ex); break;
      default: split.test.push_back(ex); break;
    }
  }
  return split;
}

/// Padded id matrices for <Q, C, C-> training triples.
struct Batch {
  std::size_t size = 0;
  std::vector<std::vector<TokenId>> code_ids;
  std::vector<std::size_t> code_lengths;
  std::vector<std::vector<TokenId>> query_ids;
  std::vector<std::size_t> query_lengths;
  std::vector<std::vector<TokenId>> negative_code_ids;
  std::vector<std::size_t> negative_lengths;
};

/// Candidate-side tokens (code_tokens) are encoded with `candidate_vocab`.
inline Batch make_batch(const std::vector<const CorpusExample*>& positives,
                        const std::vector<const CorpusExample*>& negatives,
                        const Vocabulary& query_vocab, const Vocabulary& candidate_vocab,
                        std::size_t max_query_len, std::size_t max_code_len) {
  if (positives.size() != negatives.size()) {
    fail(ErrorKind::kArgument, "make_batch: positives and negatives differ in count");
  }
  Batch b;
  b.size = positives.size();
  for (std::size_t i = 0; i < b.size; ++i) {
    auto q = encode_and_pad(positives[i]->query_tokens, query_vocab, max_query_len);
    auto c = encode_and_pad(positives[i]->code_tokens, candidate_vocab, max_code_len);
    auto n = encode_and_pad(negatives[i]->code_tokens, candidate_vocab, max_code_len);
    b.query_ids.push_back(std::move(q.ids));
    b.query_lengths.push_back(q.length);
    b.code_ids.push_back(std::move(c.ids));
    b.code_lengths.push_back(c.length);
    b.negative_code_ids.push_back(std::move(n.ids));
    b.negative_lengths.push_back(n.length);
  }
  return b;
}

}  // namespace coacor::data
