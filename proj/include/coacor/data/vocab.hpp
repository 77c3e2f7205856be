#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "coacor/core/error.hpp"
#include "coacor/core/rng.hpp"
#include "coacor/data/tokenize.hpp"

namespace coacor::data {

using TokenId = std::size_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kStart = 2;
inline constexpr TokenId kEos = 3;
inline constexpr std::size_t kNumSpecials = 4;

enum class Side { kCode, kNl };

/// Token <-> id map with the four reserved specials at ids 0-3.
class Vocabulary {
 public:
  Vocabulary() {
    for (const char* s : {"<pad>", "<unk>", "<s>", "</s>"}) push(s);
  }

  /// Builds from an ordered list of non-special tokens (ids 4, 5, ...).
  static Vocabulary from_tokens(const std::vector<std::string>& tokens,
                                std::size_t min_freq = 1) {
    Vocabulary v;
    v.min_freq_ = min_freq;
    for (const auto& t : tokens) {
      if (v.index_.count(t)) fail(ErrorKind::kArgument, "duplicate vocabulary token " + t);
      v.push(t);
    }
    return v;
  }

  std::size_t size() const { return tokens_.size(); }
  std::size_t min_freq() const { return min_freq_; }

  bool contains(const std::string& token) const { return index_.count(token) != 0; }

  TokenId id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  const std::string& token(TokenId id) const {
    if (id >= tokens_.size()) {
      fail(ErrorKind::kArgument, "token id " + std::to_string(id) + " out of range");
    }
    return tokens_[id];
  }

  std::vector<TokenId> encode(const TokenList& tokens) const {
    std::vector<TokenId> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
  }

  TokenList decode(const std::vector<TokenId>& ids) const {
    TokenList out;
    out.reserve(ids.size());
    for (TokenId i : ids) out.push_back(token(i));
    return out;
  }

  /// Non-special tokens in id order.
  std::vector<std::string> regular_tokens() const {
    return {tokens_.begin() + kNumSpecials, tokens_.end()};
  }

  /// FNV-1a over the newline-joined token list; identifies vocabulary content.
  std::uint64_t content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& t : tokens_) {
      h = fnv1a(t, h);
      h = fnv1a("\n", h);
    }
    return h;
  }

  /// One token per line; line k holds id k + 4.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::kIo, "cannot write vocabulary " + path);
    for (std::size_t i = kNumSpecials; i < tokens_.size(); ++i) out << tokens_[i] << '\n';
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::kIo, "cannot read vocabulary " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) tokens.push_back(line);
    return from_tokens(tokens);
  }

 private:
  void push(const std::string& t) {
    index_[t] = tokens_.size();
    tokens_.push_back(t);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t min_freq_ = 1;
};

/// Keeps tokens seen at least `min_freq` times, ordered by descending count
/// and then lexicographically. `side` is informational only.
inline Vocabulary build_vocab(const std::vector<TokenList>& corpora,
                              std::size_t min_freq = 2, Side side = Side::kNl) {
  (void)side;
  if (corpora.empty()) fail(ErrorKind::kArgument, "build_vocab: empty corpus");
  const Vocabulary specials;  // holds only the reserved entries
  std::map<std::string, std::size_t> counts;
  for (const auto& seq : corpora)
    for (const auto& t : seq)
      if (!specials.contains(t)) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, n] : counts)
    if (n >= min_freq) kept.emplace_back(tok, n);
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::vector<std::string> ordered;
  for (auto& [tok, n] : kept) ordered.push_back(tok);
  return Vocabulary::from_tokens(ordered, min_freq);
}

struct EncodedSequence {
  std::vector<TokenId> ids;  // exactly max_len entries
  std::size_t length = 0;    // number of real tokens
};

/// Truncates to `max_len` and right-pads with PAD.
inline EncodedSequence encode_and_pad(const TokenList& tokens, const Vocabulary& vocab,
                                      std::size_t max_len) {
  if (tokens.empty()) fail(ErrorKind::kArgument, "encode_and_pad: empty token list");
  EncodedSequence out;
  out.length = std::min(tokens.size(), max_len);
  out.ids.assign(max_len, kPad);
  for (std::size_t i = 0; i < out.length; ++i) out.ids[i] = vocab.id(tokens[i]);
  return out;
}

}  // namespace coacor::data
