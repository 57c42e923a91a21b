#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dialign/error.hpp"

namespace dialign {

// Ordered list of lowercase word tokens.
struct TokenSeq {
  std::vector<std::string> tokens;

  bool empty() const { return tokens.empty(); }
  std::size_t size() const { return tokens.size(); }
};

namespace detail {

inline bool is_word_char(unsigned char c) {
  // Bytes >= 0x80 (UTF-8 continuation/lead bytes) stay inside tokens so
  // non-ASCII words survive intact.
  return std::isalnum(c) != 0 || c >= 0x80;
}

inline char ascii_lower(unsigned char c) {
  return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a')
                                : static_cast<char>(c);
}

}  // namespace detail

// Lowercases and splits on any character that is neither alphanumeric nor an
// apostrophe. Apostrophes inside a word are kept ("don't" stays one token);
// leading and trailing apostrophes are stripped.
inline TokenSeq tokenize(std::string_view text) {
  TokenSeq out;
  std::string cur;
  auto flush = [&] {
    std::size_t b = 0, e = cur.size();
    while (b < e && cur[b] == '\'') ++b;
    while (e > b && cur[e - 1] == '\'') --e;
    if (e > b) out.tokens.emplace_back(cur.substr(b, e - b));
    cur.clear();
  };
  for (unsigned char c : text) {
    if (detail::is_word_char(c)) {
      cur.push_back(detail::ascii_lower(c));
    } else if (c == '\'') {
      cur.push_back('\'');
    } else {
      flush();
    }
  }
  flush();
  return out;
}

// Word-category dictionary. Each category holds exact words plus prefixes
// (a trailing '*' in the source file). Category order follows the source
// file's id order so reports are stable.
class Lexicon {
 public:
  struct Category {
    std::string name;
    std::unordered_set<std::string> exact;
    std::vector<std::string> prefixes;  // sorted, unique
  };

  // The 17 working categories every full dictionary must resolve by name.
  static const std::vector<std::string>& core_categories() {
    static const std::vector<std::string> names = {
        "i",    "you",     "we",      "they",  "social", "cogproc",
        "posemo", "negemo", "article", "prep",  "certain", "conj",
        "discrep", "negate", "pronoun", "quant", "tentat"};
    return names;
  }

  void add_category(const std::string& name) {
    if (name.empty()) throw DataError("empty category name");
    if (index_.count(name)) throw DataError("duplicate category name: " + name);
    index_[name] = categories_.size();
    categories_.push_back(Category{name, {}, {}});
  }

  // pattern "my*" -> prefix "my"; anything else is an exact word.
  void add_pattern(const std::string& category, const std::string& pattern) {
    auto it = index_.find(category);
    if (it == index_.end()) throw DataError("unknown category: " + category);
    Category& cat = categories_[it->second];
    if (pattern.size() > 1 && pattern.back() == '*') {
      std::string stem = pattern.substr(0, pattern.size() - 1);
      auto pos = std::lower_bound(cat.prefixes.begin(), cat.prefixes.end(), stem);
      if (pos == cat.prefixes.end() || *pos != stem) cat.prefixes.insert(pos, stem);
    } else if (!pattern.empty() && pattern != "*") {
      cat.exact.insert(pattern);
    }
  }

  std::size_t size() const { return categories_.size(); }
  const std::vector<Category>& categories() const { return categories_; }

  std::vector<std::string> category_names() const {
    std::vector<std::string> names;
    names.reserve(categories_.size());
    for (const auto& c : categories_) names.push_back(c.name);
    return names;
  }

  bool has_category(const std::string& name) const { return index_.count(name) != 0; }

  bool has_core_categories() const {
    for (const auto& name : core_categories())
      if (!has_category(name)) return false;
    return true;
  }

  bool matches(std::size_t category_index, const std::string& token) const {
    const Category& cat = categories_[category_index];
    if (cat.exact.count(token)) return true;
    // A prefix matches when the token starts with it; prefixes are sorted,
    // so the candidate stems are the ones <= token.
    auto it = std::upper_bound(cat.prefixes.begin(), cat.prefixes.end(), token);
    while (it != cat.prefixes.begin()) {
      --it;
      if (token.compare(0, it->size(), *it) == 0) return true;
      // Stems shorter than the shared prefix cannot match once the first
      // character differs.
      if (it->empty() || (*it)[0] != token[0]) break;
    }
    return false;
  }

 private:
  std::vector<Category> categories_;
  std::unordered_map<std::string, std::size_t> index_;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : line) {
    if (c == '\t' || c == ' ' || c == '\r') {
      if (!cur.empty()) parts.push_back(std::move(cur)), cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) parts.push_back(std::move(cur));
  return parts;
}

}  // namespace detail

// Parses the .dic dictionary convention: a header delimited by lines holding
// only "%", with "id<TAB>name" rows, followed by "word<TAB>id[<TAB>id...]"
// body rows. A trailing '*' on a word marks a prefix pattern. Words listed
// under several ids join every one of those categories.
inline Lexicon load_dic(std::istream& in, const std::string& origin = "<stream>") {
  Lexicon lex;
  std::map<std::string, std::string> id_to_name;
  int delimiters_seen = 0;
  std::size_t line_no = 0;
  std::string line;
  auto fail = [&](const std::string& msg) -> void {
    std::ostringstream os;
    os << origin << ":" << line_no << ": " << msg;
    throw DataError(os.str());
  };
  while (std::getline(in, line)) {
    ++line_no;
    auto parts = detail::split_ws(line);
    if (parts.empty()) continue;
    if (parts.size() == 1 && parts[0] == "%") {
      ++delimiters_seen;
      continue;
    }
    if (delimiters_seen == 0) fail("content before header delimiter '%'");
    if (delimiters_seen == 1) {
      // header row: id name
      if (parts.size() != 2) fail("expected 'id<TAB>name' in header");
      if (parts[1].empty()) fail("empty category name");
      if (id_to_name.count(parts[0])) fail("duplicate category id " + parts[0]);
      id_to_name[parts[0]] = parts[1];
      lex.add_category(parts[1]);
      continue;
    }
    // body row: word id [id...]
    if (parts.size() < 2) fail("expected 'word<TAB>id[<TAB>id...]'");
    for (std::size_t i = 1; i < parts.size(); ++i) {
      auto it = id_to_name.find(parts[i]);
      if (it == id_to_name.end()) fail("unknown category id " + parts[i]);
      lex.add_pattern(it->second, parts[0]);
    }
  }
  if (delimiters_seen < 2) {
    std::ostringstream os;
    os << origin << ": missing header delimiters ('%' lines)";
    throw DataError(os.str());
  }
  return lex;
}

inline Lexicon load_dic_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open lexicon file: " + path);
  return load_dic(in, path);
}

// Binary presence: category c is present in the utterance iff any token
// matches any of its patterns.
inline std::set<std::string> categories_in(const TokenSeq& u, const Lexicon& lex) {
  std::set<std::string> present;
  for (std::size_t c = 0; c < lex.size(); ++c) {
    for (const auto& tok : u.tokens) {
      if (lex.matches(c, tok)) {
        present.insert(lex.categories()[c].name);
        break;
      }
    }
  }
  return present;
}

// Bitmask variant of categories_in keyed by category index; the hot path for
// accommodation scoring.
inline std::vector<bool> category_presence(const TokenSeq& u, const Lexicon& lex) {
  std::vector<bool> present(lex.size(), false);
  for (std::size_t c = 0; c < lex.size(); ++c) {
    for (const auto& tok : u.tokens) {
      if (lex.matches(c, tok)) {
        present[c] = true;
        break;
      }
    }
  }
  return present;
}

// rate(c) = (# tokens matching c) / (# tokens); all zero for an empty
// utterance.
inline std::map<std::string, double> category_rates(const TokenSeq& u, const Lexicon& lex) {
  std::map<std::string, double> rates;
  for (const auto& cat : lex.categories()) rates[cat.name] = 0.0;
  if (u.tokens.empty()) return rates;
  const double denom = static_cast<double>(u.tokens.size());
  for (std::size_t c = 0; c < lex.size(); ++c) {
    std::size_t hits = 0;
    for (const auto& tok : u.tokens)
      if (lex.matches(c, tok)) ++hits;
    rates[lex.categories()[c].name] = static_cast<double>(hits) / denom;
  }
  return rates;
}

// Same rates in lexicon category order, used by the feature builders.
inline std::vector<double> category_rate_vector(const TokenSeq& u, const Lexicon& lex) {
  std::vector<double> rates(lex.size(), 0.0);
  if (u.tokens.empty()) return rates;
  const double denom = static_cast<double>(u.tokens.size());
  for (std::size_t c = 0; c < lex.size(); ++c) {
    std::size_t hits = 0;
    for (const auto& tok : u.tokens)
      if (lex.matches(c, tok)) ++hits;
    rates[c] = static_cast<double>(hits) / denom;
  }
  return rates;
}

}  // namespace dialign
