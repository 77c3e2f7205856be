#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "coacor/core/error.hpp"

namespace coacor::cli {

/// Flat `key = value` experiment configuration with typed accessors.
///
/// Every recognised key has a default; files and flags may only set known
/// keys. Later sets override earlier ones.
class Config {
 public:
  Config() {
    for (const auto& [key, value, help] : schema()) values_[key] = value;
  }

  struct Entry {
    const char* key;
    const char* value;
    const char* help;
  };

  static const std::vector<Entry>& schema() {
    static const std::vector<Entry> entries = {
        {"corpus", "", "raw JSONL corpus {id, query_group, query, code}"},
        {"out_dir", "out", "directory for splits, vocabularies, checkpoints and reports"},
        {"seed", "1", "master seed"},
        {"min_freq", "2", "minimum token frequency kept in a vocabulary"},
        {"split_train", "0.75", "fraction of query groups used for training"},
        {"split_val", "0.10", "fraction of query groups used for validation"},
        {"split_test", "0.15", "fraction of query groups used for testing"},
        {"max_query_len", "20", "query truncation length"},
        {"max_code_len", "120", "code truncation length"},
        {"max_annotation_len", "20", "annotation decoding cap"},
        {"clip_norm", "5.0", "global gradient-norm clip"},
        {"cr_embed_dim", "200", "retrieval embedding size"},
        {"cr_hidden", "200", "retrieval LSTM hidden size per direction"},
        {"cr_dropout", "0.1", "retrieval dropout rate"},
        {"cr_epochs", "20", "retrieval training epochs"},
        {"cr_batch_size", "128", "retrieval batch size"},
        {"cr_lr", "0.001", "retrieval learning rate"},
        {"margin", "0.05", "ranking-loss margin"},
        {"ca_embed_dim", "256", "annotation embedding size"},
        {"ca_hidden", "256", "annotation encoder hidden size per direction"},
        {"ca_dropout", "0.1", "annotation dropout rate"},
        {"ca_epochs", "10", "annotation likelihood-training epochs"},
        {"ca_batch_size", "64", "annotation batch size"},
        {"ca_lr", "0.001", "annotation learning rate"},
        {"rl_epochs", "40", "joint actor-critic epochs"},
        {"rl_critic_epochs", "10", "critic pretraining epochs"},
        {"rl_batch_size", "64", "episodes per actor-critic update"},
        {"rl_actor_lr", "0.0001", "actor learning rate"},
        {"rl_critic_lr", "0.0001", "critic learning rate"},
        {"reward", "mrr", "reward kind: mrr or bleu"},
        {"reward_k", "49", "distractors per reward pool"},
        {"eval_k", "49", "distractors per evaluation pool"},
        {"qn_annotator", "ca-rl", "annotation checkpoint used for the QN model: ca-rl or ca-mle"},
        {"dataset", "test", "split evaluated by eval and sweep: train, val or test"},
        {"scorer", "qc", "eval scorer: qc, qn or ensemble"},
        {"lambda", "0.4", "ensemble weight on the QN score"},
    };
    return entries;
  }

  static bool known(const std::string& key) {
    for (const auto& e : schema())
      if (key == e.key) return true;
    return false;
  }

  void set(const std::string& key, const std::string& value) {
    if (!known(key)) fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
    values_[key] = value;
  }

  /// Reads `key = value` lines; `#` starts a comment.
  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::kConfig, "cannot read config file " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        fail(ErrorKind::kConfig, path + ":" + std::to_string(line_no) + ": expected key = value");
      }
      const std::string key = trim(line.substr(0, eq));
      if (!known(key)) {
        fail(ErrorKind::kConfig, path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
      }
      values_[key] = trim(line.substr(eq + 1));
    }
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) fail(ErrorKind::kConfig, "unknown config key '" + key + "'");
    return it->second;
  }

  std::uint64_t u64(const std::string& key) const {
    const auto& s = str(key);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
      fail(ErrorKind::kConfig, key + ": expected a non-negative integer, got '" + s + "'");
    }
    return v;
  }

  std::size_t size(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

  double real(const std::string& key) const {
    const auto& s = str(key);
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    fail(ErrorKind::kConfig, key + ": expected a number, got '" + s + "'");
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace coacor::cli
