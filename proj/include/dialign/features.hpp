#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "dialign/accommodation.hpp"
#include "dialign/corpus.hpp"
#include "dialign/error.hpp"
#include "dialign/lexicon.hpp"

namespace dialign {

// Which participant's utterances feed a feature extractor.
enum class Variant { HumanOnly, UnknownOnly, Both };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::HumanOnly: return "human";
    case Variant::UnknownOnly: return "unknown";
    case Variant::Both: return "both";
  }
  return "?";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "human") return Variant::HumanOnly;
  if (s == "unknown") return Variant::UnknownOnly;
  if (s == "both") return Variant::Both;
  throw DataError("unknown variant \"" + s + "\" (expected human|unknown|both)");
}

// Single-space concatenation of the selected speaker's utterances in their
// original order (all utterances for Both).
inline std::string select_text(const Dialogue& d, Variant v) {
  std::string out;
  for (const auto& u : d.utterances) {
    const bool selected = v == Variant::Both ||
                          (v == Variant::HumanOnly && u.speaker == Speaker::Human) ||
                          (v == Variant::UnknownOnly && u.speaker == Speaker::Unknown);
    if (!selected) continue;
    if (!out.empty()) out += ' ';
    out += u.text;
  }
  return out;
}

inline std::vector<const Utterance*> select_utterances(const Dialogue& d, Variant v) {
  std::vector<const Utterance*> out;
  for (const auto& u : d.utterances) {
    if (v == Variant::Both || (v == Variant::HumanOnly && u.speaker == Speaker::Human) ||
        (v == Variant::UnknownOnly && u.speaker == Speaker::Unknown))
      out.push_back(&u);
  }
  return out;
}

// ---------------------------------------------------------------------------
// TF-IDF over unigrams.
//   entry(w) = count(w) * (ln((1 + n_docs) / (1 + df(w))) + 1)
// followed by L2 normalization when the norm is nonzero. The vocabulary is
// closed at fit time; unseen words contribute nothing.
// ---------------------------------------------------------------------------

struct TfidfModel {
  Variant variant = Variant::Both;
  std::vector<std::string> vocabulary;  // sorted; position = column index
  std::vector<std::size_t> doc_frequency;
  std::size_t n_docs = 0;
  std::unordered_map<std::string, std::size_t> term_index;

  std::size_t dim() const { return vocabulary.size(); }
};

inline TfidfModel tfidf_fit(const CorpusSet& train, Variant v) {
  if (train.dialogues.empty()) throw DataError("tfidf_fit: empty training corpus");
  std::map<std::string, std::size_t> df;  // ordered -> sorted vocabulary for free
  for (const auto& d : train.dialogues) {
    TokenSeq toks = tokenize(select_text(d, v));
    std::unordered_set<std::string> seen(toks.tokens.begin(), toks.tokens.end());
    for (const auto& t : seen) ++df[t];
  }
  if (df.empty())
    throw DataError("tfidf_fit: no tokens in corpus \"" + train.name +
                    "\" after variant selection");
  TfidfModel m;
  m.variant = v;
  m.n_docs = train.dialogues.size();
  m.vocabulary.reserve(df.size());
  m.doc_frequency.reserve(df.size());
  for (const auto& [term, count] : df) {
    m.term_index.emplace(term, m.vocabulary.size());
    m.vocabulary.push_back(term);
    m.doc_frequency.push_back(count);
  }
  return m;
}

inline nlohmann::json to_json(const TfidfModel& m) {
  nlohmann::json j;
  j["variant"] = to_string(m.variant);
  j["vocabulary"] = m.vocabulary;
  j["doc_frequency"] = m.doc_frequency;
  j["n_docs"] = m.n_docs;
  return j;
}

inline TfidfModel tfidf_from_json(const nlohmann::json& j,
                                  const std::string& origin = "<json>") {
  TfidfModel m;
  try {
    m.variant = variant_from_string(j.at("variant").get<std::string>());
    m.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    m.doc_frequency = j.at("doc_frequency").get<std::vector<std::size_t>>();
    m.n_docs = j.at("n_docs").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(origin + ": bad tfidf section (" + e.what() + ")");
  }
  if (m.vocabulary.size() != m.doc_frequency.size())
    throw DataError(origin + ": tfidf vocabulary/doc_frequency length mismatch");
  for (std::size_t i = 0; i < m.vocabulary.size(); ++i)
    m.term_index.emplace(m.vocabulary[i], i);
  return m;
}

inline std::vector<double> tfidf_transform(const TfidfModel& m, const Dialogue& d) {
  std::vector<double> vec(m.dim(), 0.0);
  TokenSeq toks = tokenize(select_text(d, m.variant));
  for (const auto& t : toks.tokens) {
    auto it = m.term_index.find(t);
    if (it != m.term_index.end()) vec[it->second] += 1.0;
  }
  double norm_sq = 0.0;
  for (std::size_t j = 0; j < vec.size(); ++j) {
    if (vec[j] == 0.0) continue;
    const double idf = std::log((1.0 + static_cast<double>(m.n_docs)) /
                                (1.0 + static_cast<double>(m.doc_frequency[j]))) +
                       1.0;
    vec[j] *= idf;
    norm_sq += vec[j] * vec[j];
  }
  if (norm_sq > 0.0) {
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& x : vec) x *= inv;
  }
  return vec;
}

// ---------------------------------------------------------------------------
// Stylistic feature vectors (lexicon category order)
// ---------------------------------------------------------------------------

// Mean of per-utterance category rates over the selected utterances; zeros
// when the selection is empty.
inline std::vector<double> liwc_features(const Dialogue& d, const Lexicon& lex,
                                         Variant v) {
  std::vector<double> sums(lex.size(), 0.0);
  auto selected = select_utterances(d, v);
  if (selected.empty()) return sums;
  for (const Utterance* u : selected) {
    std::vector<double> rates = category_rate_vector(tokenize(u->text), lex);
    for (std::size_t c = 0; c < lex.size(); ++c) sums[c] += rates[c];
  }
  const double inv = 1.0 / static_cast<double>(selected.size());
  for (auto& s : sums) s *= inv;
  return sums;
}

// acc(c) per category with the variant's speaker as responder; Both
// concatenates the Human-responder block then the Unknown-responder block.
// Missing scores are imputed as 0.
inline std::vector<double> accommodation_features(const Dialogue& d,
                                                  const Lexicon& lex, Variant v) {
  auto one = [&](Speaker responder) {
    AccommodationProfile p = conversation_accommodation(d, lex, Perspective{responder});
    std::vector<double> vec(lex.size(), 0.0);
    for (std::size_t c = 0; c < lex.size(); ++c)
      if (p.scores[c].acc) vec[c] = *p.scores[c].acc;
    return vec;
  };
  if (v == Variant::HumanOnly) return one(Speaker::Human);
  if (v == Variant::UnknownOnly) return one(Speaker::Unknown);
  std::vector<double> both = one(Speaker::Human);
  std::vector<double> unknown = one(Speaker::Unknown);
  both.insert(both.end(), unknown.begin(), unknown.end());
  return both;
}

// ---------------------------------------------------------------------------
// Named feature blocks
// ---------------------------------------------------------------------------

struct FeatureBlock {
  std::vector<std::string> names;
  std::vector<double> values;
};

// Concatenates blocks with prefixed names; the result must be duplicate-free.
inline FeatureBlock combine(const std::vector<std::pair<std::string, FeatureBlock>>& blocks) {
  if (blocks.empty()) throw DataError("combine: no feature blocks given");
  FeatureBlock out;
  std::unordered_set<std::string> seen;
  for (const auto& [prefix, block] : blocks) {
    if (block.names.size() != block.values.size())
      throw DataError("combine: block names/values length mismatch");
    for (std::size_t i = 0; i < block.names.size(); ++i) {
      std::string name = prefix + block.names[i];
      if (!seen.insert(name).second)
        throw DataError("combine: duplicate feature name \"" + name + "\"");
      out.names.push_back(std::move(name));
      out.values.push_back(block.values[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Externally computed per-dialogue embeddings (sidecar file). Records are
// line-delimited JSON: {"dialogue_id": ..., "variant": ..., "vector": [...]}.
// ---------------------------------------------------------------------------

struct EmbeddingTable {
  Variant variant = Variant::Both;
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;
  std::size_t skipped_unknown_ids = 0;  // records whose id is not in the corpus
};

inline EmbeddingTable load_embeddings(std::istream& in, Variant v,
                                      const std::unordered_set<std::string>& corpus_ids,
                                      const std::string& origin = "<stream>") {
  EmbeddingTable table;
  table.variant = v;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> void {
    throw DataError(origin + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(std::string("malformed record (") + e.what() + ")");
    }
    if (!rec.is_object() || !rec.contains("dialogue_id") || !rec.contains("variant") ||
        !rec.contains("vector") || !rec["dialogue_id"].is_string() ||
        !rec["variant"].is_string() || !rec["vector"].is_array())
      fail("record missing dialogue_id/variant/vector");
    if (variant_from_string(rec["variant"].get<std::string>()) != v) continue;
    const std::string id = rec["dialogue_id"].get<std::string>();
    if (!corpus_ids.count(id)) {
      ++table.skipped_unknown_ids;
      continue;
    }
    std::vector<double> vec;
    vec.reserve(rec["vector"].size());
    for (const auto& x : rec["vector"]) {
      if (!x.is_number()) fail("vector entry is not a number");
      const double value = x.get<double>();
      if (!std::isfinite(value)) fail("non-finite vector entry");
      vec.push_back(value);
    }
    if (table.vectors.empty()) {
      table.dim = vec.size();
    } else if (vec.size() != table.dim) {
      fail("vector dimension " + std::to_string(vec.size()) + " != expected " +
           std::to_string(table.dim));
    }
    table.vectors[id] = std::move(vec);
  }
  return table;
}

inline EmbeddingTable load_embeddings_file(const std::string& path, Variant v,
                                           const std::unordered_set<std::string>& ids) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding sidecar: " + path);
  return load_embeddings(in, v, ids, path);
}

// ---------------------------------------------------------------------------
// Feature matrices
// ---------------------------------------------------------------------------

struct FeatureMatrix {
  std::vector<std::string> feature_names;
  std::vector<std::vector<double>> rows;  // per dialogue, corpus order
  std::vector<Label> labels;
  std::vector<std::string> dialogue_ids;

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_cols() const { return feature_names.size(); }

  void validate() const {
    if (rows.size() != labels.size() || rows.size() != dialogue_ids.size())
      throw DataError("feature matrix: misaligned rows/labels/ids");
    for (const auto& row : rows) {
      if (row.size() != feature_names.size())
        throw DataError("feature matrix: row width mismatch");
      for (double x : row)
        if (!std::isfinite(x)) throw DataError("feature matrix: non-finite value");
    }
  }
};

namespace detail {

template <typename RowFn>
FeatureMatrix build_matrix(const CorpusSet& c, std::vector<std::string> names,
                           RowFn&& row_fn) {
  FeatureMatrix m;
  m.feature_names = std::move(names);
  m.rows.reserve(c.dialogues.size());
  for (const auto& d : c.dialogues) {
    m.rows.push_back(row_fn(d));
    m.labels.push_back(d.label);
    m.dialogue_ids.push_back(d.id);
  }
  m.validate();
  return m;
}

inline std::vector<std::string> prefixed(const std::string& prefix,
                                         const std::vector<std::string>& names) {
  std::vector<std::string> out;
  out.reserve(names.size());
  for (const auto& n : names) out.push_back(prefix + n);
  return out;
}

}  // namespace detail

inline FeatureMatrix bow_matrix(const TfidfModel& m, const CorpusSet& c) {
  return detail::build_matrix(c, detail::prefixed("bow.", m.vocabulary),
                              [&](const Dialogue& d) { return tfidf_transform(m, d); });
}

inline FeatureMatrix liwc_matrix(const CorpusSet& c, const Lexicon& lex, Variant v) {
  return detail::build_matrix(
      c, detail::prefixed("liwc.", lex.category_names()),
      [&](const Dialogue& d) { return liwc_features(d, lex, v); });
}

inline std::vector<std::string> accommodation_feature_names(const Lexicon& lex,
                                                            Variant v) {
  if (v == Variant::Both) {
    std::vector<std::string> names = detail::prefixed("human.", lex.category_names());
    auto u = detail::prefixed("unknown.", lex.category_names());
    names.insert(names.end(), u.begin(), u.end());
    return names;
  }
  return lex.category_names();
}

inline FeatureMatrix accommodation_matrix(const CorpusSet& c, const Lexicon& lex,
                                          Variant v) {
  return detail::build_matrix(
      c, detail::prefixed("acc.", accommodation_feature_names(lex, v)),
      [&](const Dialogue& d) { return accommodation_features(d, lex, v); });
}

inline FeatureMatrix liwc_plus_accommodation_matrix(const CorpusSet& c,
                                                    const Lexicon& lex, Variant v) {
  std::vector<std::string> names = detail::prefixed("liwc.", lex.category_names());
  auto acc_names = detail::prefixed("acc.", accommodation_feature_names(lex, v));
  names.insert(names.end(), acc_names.begin(), acc_names.end());
  return detail::build_matrix(c, std::move(names), [&](const Dialogue& d) {
    FeatureBlock liwc{lex.category_names(), liwc_features(d, lex, v)};
    FeatureBlock acc{accommodation_feature_names(lex, v),
                     accommodation_features(d, lex, v)};
    return combine({{"liwc.", liwc}, {"acc.", acc}}).values;
  });
}

inline FeatureMatrix embedding_matrix(const EmbeddingTable& table, const CorpusSet& c) {
  std::vector<std::string> names;
  names.reserve(table.dim);
  for (std::size_t j = 0; j < table.dim; ++j)
    names.push_back("emb." + std::to_string(j));
  return detail::build_matrix(c, std::move(names), [&](const Dialogue& d) {
    auto it = table.vectors.find(d.id);
    if (it == table.vectors.end())
      throw DataError("no embedding for dialogue \"" + d.id + "\"");
    return it->second;
  });
}

// CSV export: id and label first, then one column per feature.
inline void write_feature_csv(const FeatureMatrix& m, std::ostream& out) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    q += '"';
    return q;
  };
  out << "id,label";
  for (const auto& name : m.feature_names) out << ',' << quote(name);
  out << '\n';
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    out << quote(m.dialogue_ids[i]) << ',' << to_string(m.labels[i]);
    for (double x : m.rows[i]) out << ',' << format_double(x);
    out << '\n';
  }
}

}  // namespace dialign
