#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "coacor/core/rng.hpp"
#include "coacor/data/corpus.hpp"

namespace coacor::data {

/// Tiny tokenized corpus where no token is shared between pairs.
inline Corpus disjoint_corpus(std::size_t pairs = 8, std::size_t query_len = 3,
                              std::size_t code_len = 5) {
  Corpus out;
  for (std::size_t i = 0; i < pairs; ++i) {
    CorpusExample ex;
    ex.id = "p" + std::to_string(i);
    ex.query_group = ex.id;
    for (std::size_t j = 0; j < query_len; ++j)
      ex.query_tokens.push_back("q" + std::to_string(i) + "w" + std::to_string(j));
    for (std::size_t j = 0; j < code_len; ++j)
      ex.code_tokens.push_back("c" + std::to_string(i) + "t" + std::to_string(j));
    out.push_back(std::move(ex));
  }
  return out;
}

/// Templated SQL corpus of 4 aggregates x 10 scalar functions x 5 clause
/// shapes (200 snippets). Queries always name the aggregate and only
/// sometimes the scalar function; the clause shape is never described.
struct TemplatedCorpusOptions {
  double mention_function = 0.35;
  double mention_aggregate = 0.9;
  std::uint64_t seed = 7;
};

inline std::vector<RawExample> templated_sql_corpus(const TemplatedCorpusOptions& opt = {}) {
  static const std::array<std::pair<const char*, const char*>, 4> aggregates = {{
      {"COUNT", "count"}, {"SUM", "total"}, {"AVG", "average"}, {"MAX", "maximum"}}};
  static const std::array<std::pair<const char*, const char*>, 10> functions = {{
      {"LOWER", "lowercase"}, {"UPPER", "uppercase"}, {"LENGTH", "length"},
      {"ROUND", "rounded"},   {"FLOOR", "floored"},   {"CEIL", "ceiling"},
      {"ABS", "absolute"},    {"TRIM", "trimmed"},    {"REVERSE", "reversed"},
      {"SQRT", "root"}}};
  static const std::array<const char*, 6> tables = {"orders", "users", "items",
                                                    "sales",  "logs",  "accounts"};
  static const std::array<const char*, 6> columns = {"price", "name", "amount",
                                                     "score", "title", "qty"};
  static const std::array<const char*, 4> keys = {"region", "category", "status", "owner"};
  static const std::array<std::vector<const char*>, 4> prefixes = {{
      {"how", "to", "get"}, {"sql", "to", "compute"}, {"find"}, {"select"}}};

  Rng rng(opt.seed);
  std::vector<RawExample> out;
  std::size_t n = 0;
  for (std::size_t a = 0; a < aggregates.size(); ++a) {
    for (std::size_t f = 0; f < functions.size(); ++f) {
      for (std::size_t shape = 0; shape < 5; ++shape, ++n) {
        const std::string t = tables[rng.index(tables.size())];
        const std::string c = columns[rng.index(columns.size())];
        const std::string k = keys[rng.index(keys.size())];
        const std::string agg = aggregates[a].first;
        const std::string fn = functions[f].first;
        const std::string expr = agg + "(" + fn + "(" + c + "))";
        std::string code;
        switch (shape) {
          case 0:
            code = "SELECT " + k + ", " + expr + " FROM " + t + " GROUP BY " + k;
            break;
          case 1:
            code = "SELECT " + expr + " FROM " + t + " WHERE " + k + " > " +
                   std::to_string(1 + rng.index(99)) + " ORDER BY " + k;
            break;
          case 2:
            code = "SELECT " + k + " FROM " + t + " GROUP BY " + k + " HAVING " + expr + " > " +
                   std::to_string(1 + rng.index(99));
            break;
          case 3:
            code = "SELECT " + agg + "(DISTINCT " + fn + "(" + c + ")) FROM " + t;
            break;
          default:
            code = "SELECT " + agg + "(" + fn + "(a." + c + ")) FROM " + t + " a JOIN " + k +
                   "s b ON a." + k + "_id = b.id";
            break;
        }
        bool say_agg = rng.bernoulli(opt.mention_aggregate);
        bool say_fn = rng.bernoulli(opt.mention_function);
        if (!say_agg && !say_fn) say_agg = true;
        std::string query;
        for (const char* w : prefixes[rng.index(prefixes.size())]) query += std::string(w) + " ";
        query += "the ";
        if (say_agg) query += std::string(aggregates[a].second) + " ";
        if (say_fn) query += std::string(functions[f].second) + " ";
        query += "value";
        RawExample ex;
        ex.id = "s" + std::to_string(n);
        ex.query_group = ex.id;
        ex.query = query;
        ex.code = code;
        out.push_back(std::move(ex));
      }
    }
  }
  return out;
}

}  // namespace coacor::data
