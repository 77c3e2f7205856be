#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "coacor/core/error.hpp"

namespace coacor::data {

using TokenList = std::vector<std::string>;

inline constexpr std::string_view kStringLiteral = "LIT_STR";
inline constexpr std::string_view kNumberLiteral = "LIT_NUM";

namespace detail {

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool is_word_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '@' || c == '#';
}

inline bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$' ||
         c == '@' || c == '#';
}

inline const std::unordered_set<std::string>& sql_keywords() {
  static const std::unordered_set<std::string> words = {
      "select", "from", "where", "and", "or", "not", "in", "is", "null", "like",
      "between", "exists", "as", "on", "join", "inner", "left", "right", "outer",
      "full", "cross", "natural", "using", "group", "by", "order", "asc", "desc",
      "having", "limit", "offset", "distinct", "all", "union", "insert", "into",
      "values", "update", "set", "delete", "create", "table", "drop", "alter",
      "add", "index", "primary", "key", "foreign", "references", "default",
      "case", "when", "then", "else", "end", "if", "count", "sum", "avg", "min",
      "max", "group_concat", "concat", "coalesce", "ifnull", "isnull", "nvl",
      "nullif", "cast", "convert", "substring", "substr", "now", "top", "with",
      "true", "false", "separator", "interval", "unique", "view", "procedure",
      "begin", "declare", "return", "returns", "function", "trigger",
      "row_number", "over", "partition", "rank", "dense_rank", "any", "some",
      "escape", "regexp", "rlike", "collate", "varchar", "int", "integer",
      "char", "text", "datetime", "timestamp", "decimal", "float", "double",
      "auto_increment", "minus", "intersect", "except", "fetch", "next", "rows",
      "only", "lower", "upper", "length", "len", "round", "floor", "ceil", "abs",
      "datediff", "dateadd", "getdate", "curdate", "replace", "trim", "ltrim",
      "rtrim", "exec", "execute", "use", "database", "schema", "column",
      "constraint", "check", "truncate", "merge", "pivot", "unpivot", "cursor",
      "while", "print", "year", "month", "day", "date_format", "str_to_date",
  };
  return words;
}

// Keywords after which a bare identifier names a table.
inline bool introduces_table(std::string_view kw) {
  return kw == "from" || kw == "join" || kw == "into" || kw == "update" ||
         kw == "table";
}

// Keywords that end a FROM list.
inline bool ends_table_list(std::string_view kw) {
  return kw == "where" || kw == "group" || kw == "order" || kw == "having" ||
         kw == "limit" || kw == "on" || kw == "union" || kw == "select" ||
         kw == "set" || kw == "values" || kw == "using" || kw == "offset";
}

enum class LexKind { kWord, kString, kNumber, kQuotedName, kSymbol };

struct Lexeme {
  LexKind kind;
  std::string text;
};

inline std::vector<Lexeme> lex_sql(std::string_view raw) {
  std::vector<Lexeme> out;
  std::size_t i = 0;
  const std::size_t n = raw.size();
  auto peek = [&](std::size_t k) { return i + k < n ? raw[i + k] : '\0'; };
  while (i < n) {
    const char c = raw[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '-' && peek(1) == '-') {
      while (i < n && raw[i] != '\n') ++i;
    } else if (c == '/' && peek(1) == '*') {
      i += 2;
      while (i + 1 < n && !(raw[i] == '*' && raw[i + 1] == '/')) ++i;
      i = std::min(n, i + 2);
    } else if (c == '\'' || c == '"') {
      ++i;
      while (i < n) {
        if (raw[i] == '\\' && i + 1 < n) {
          i += 2;
        } else if (raw[i] == c && peek(1) == c) {
          i += 2;
        } else if (raw[i] == c) {
          ++i;
          break;
        } else {
          ++i;
        }
      }
      out.push_back({LexKind::kString, std::string(kStringLiteral)});
    } else if (c == '`' || c == '[') {
      const char close = c == '`' ? '`' : ']';
      std::size_t start = ++i;
      while (i < n && raw[i] != close) ++i;
      std::string name(raw.substr(start, i - start));
      if (i < n) ++i;
      // a quoted name may still be qualified: `t`.`col`
      while (i + 1 < n && raw[i] == '.' &&
             (raw[i + 1] == '`' || is_word_start(raw[i + 1]) || raw[i + 1] == '*')) {
        ++i;
        if (raw[i] == '`') {
          std::size_t s2 = ++i;
          while (i < n && raw[i] != '`') ++i;
          name += "." + std::string(raw.substr(s2, i - s2));
          if (i < n) ++i;
        } else {
          std::size_t s2 = i;
          while (i < n && (is_word_char(raw[i]) || raw[i] == '*')) ++i;
          name += "." + std::string(raw.substr(s2, i - s2));
        }
      }
      out.push_back({LexKind::kQuotedName, name});
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
      while (i < n && (std::isalnum(static_cast<unsigned char>(raw[i])) || raw[i] == '.')) ++i;
      out.push_back({LexKind::kNumber, std::string(kNumberLiteral)});
    } else if (is_word_start(c)) {
      std::size_t start = i;
      while (i < n && is_word_char(raw[i])) ++i;
      // qualified names: a.b, a.b.c, a.*
      while (i + 1 < n && raw[i] == '.' &&
             (is_word_start(raw[i + 1]) || raw[i + 1] == '*' || raw[i + 1] == '`')) {
        ++i;
        if (raw[i] == '*') {
          ++i;
        } else if (raw[i] == '`') {
          ++i;
          while (i < n && raw[i] != '`') ++i;
          if (i < n) ++i;
        } else {
          while (i < n && is_word_char(raw[i])) ++i;
        }
      }
      std::string word(raw.substr(start, i - start));
      std::erase(word, '`');
      out.push_back({LexKind::kWord, word});
    } else {
      static const char* kMulti[] = {"<=", ">=", "<>", "!=", "||", "::", ":=", "=="};
      bool matched = false;
      for (const char* op : kMulti) {
        if (c == op[0] && peek(1) == op[1]) {
          out.push_back({LexKind::kSymbol, std::string(op)});
          i += 2;
          matched = true;
          break;
        }
      }
      if (!matched) {
        out.push_back({LexKind::kSymbol, std::string(1, c)});
        ++i;
      }
    }
  }
  return out;
}

}  // namespace detail

/// Tokenizes a SQL snippet.
///
/// Keywords and function names are lowercased and kept. Other identifiers
/// become numbered placeholders (tab0, tab1, ... for tables and their
/// aliases; col0, col1, ... otherwise) in order of first occurrence; a
/// repeated identifier (compared case-insensitively) reuses its placeholder.
/// String and numeric literals become LIT_STR and LIT_NUM.
inline TokenList tokenize_code(std::string_view raw) {
  if (raw.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    fail(ErrorKind::kArgument, "tokenize_code: empty input");
  }
  const auto lexemes = detail::lex_sql(raw);
  const auto& keywords = detail::sql_keywords();

  std::unordered_map<std::string, std::string> placeholders;
  std::size_t next_col = 0, next_tab = 0;
  TokenList out;
  bool in_table_list = false;
  bool expect_table = false;     // next identifier names a table
  bool after_table = false;      // previous token was a table placeholder
  bool after_table_as = false;   // ... followed by AS

  for (std::size_t k = 0; k < lexemes.size(); ++k) {
    const auto& lx = lexemes[k];
    const bool next_is_paren = k + 1 < lexemes.size() &&
                               lexemes[k + 1].kind == detail::LexKind::kSymbol &&
                               lexemes[k + 1].text == "(";
    if (lx.kind == detail::LexKind::kString || lx.kind == detail::LexKind::kNumber) {
      out.push_back(lx.text);
      expect_table = after_table = after_table_as = false;
      continue;
    }
    if (lx.kind == detail::LexKind::kSymbol) {
      out.push_back(lx.text);
      expect_table = in_table_list && lx.text == ",";
      after_table = after_table_as = false;
      continue;
    }
    const std::string lower = detail::to_lower(lx.text);
    const bool qualified = lower.find('.') != std::string::npos;
    if (lx.kind == detail::LexKind::kWord && !qualified &&
        (keywords.count(lower) || next_is_paren)) {
      out.push_back(lower);
      if (detail::introduces_table(lower)) {
        in_table_list = true;
        expect_table = true;
      } else if (detail::ends_table_list(lower)) {
        in_table_list = false;
        expect_table = false;
      } else if (lower != "as" && lower != "inner" && lower != "left" &&
                 lower != "right" && lower != "outer" && lower != "cross" &&
                 lower != "full" && lower != "natural") {
        expect_table = false;
      }
      after_table_as = after_table && lower == "as";
      after_table = false;
      continue;
    }
    // identifier
    const bool table = !qualified && (expect_table || after_table || after_table_as);
    auto it = placeholders.find(lower);
    if (it == placeholders.end()) {
      std::string name = table ? "tab" + std::to_string(next_tab++)
                               : "col" + std::to_string(next_col++);
      it = placeholders.emplace(lower, std::move(name)).first;
    }
    out.push_back(it->second);
    after_table = table;
    after_table_as = false;
    expect_table = false;
  }
  return out;
}

/// Rule-based word tokenizer for natural-language text.
///
/// Lowercases, splits on whitespace, and peels parentheses plus leading or
/// trailing punctuation (? ! . , ; : and quotes) into separate tokens.
/// Underscores and inner punctuation stay inside the word.
inline TokenList tokenize_nl(std::string_view raw) {
  if (raw.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    fail(ErrorKind::kArgument, "tokenize_nl: empty input");
  }
  auto is_edge_punct = [](char c) {
    return c == '?' || c == '!' || c == '.' || c == ',' || c == ';' || c == ':' ||
           c == '"' || c == '\'' || c == '`';
  };
  TokenList out;
  const std::string text = detail::to_lower(raw);
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    std::string_view chunk(text.data() + i, j - i);
    i = j;

    // parentheses split anywhere
    std::vector<std::string_view> pieces;
    std::size_t start = 0;
    for (std::size_t p = 0; p < chunk.size(); ++p) {
      if (chunk[p] == '(' || chunk[p] == ')') {
        if (p > start) pieces.push_back(chunk.substr(start, p - start));
        pieces.push_back(chunk.substr(p, 1));
        start = p + 1;
      }
    }
    if (start < chunk.size()) pieces.push_back(chunk.substr(start));

    for (std::string_view piece : pieces) {
      if (piece == "(" || piece == ")") {
        out.emplace_back(piece);
        continue;
      }
      std::size_t lo = 0, hi = piece.size();
      std::vector<std::string> trailing;
      while (lo < hi && is_edge_punct(piece[lo])) out.emplace_back(1, piece[lo++]);
      while (hi > lo && is_edge_punct(piece[hi - 1])) trailing.emplace_back(1, piece[--hi]);
      if (hi > lo) out.emplace_back(piece.substr(lo, hi - lo));
      out.insert(out.end(), trailing.rbegin(), trailing.rend());
    }
  }
  return out;
}

}  // namespace coacor::data
