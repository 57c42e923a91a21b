#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "dialign/error.hpp"
#include "dialign/lexicon.hpp"
#include "dialign/rng.hpp"

namespace dialign {

enum class Speaker { Human, Unknown };
enum class Label { HumanHuman, HumanBot };

inline const char* to_string(Speaker s) {
  return s == Speaker::Human ? "human" : "unknown";
}

inline const char* to_string(Label l) {
  return l == Label::HumanHuman ? "human-human" : "human-bot";
}

inline Label label_from_string(const std::string& s) {
  if (s == "human-human") return Label::HumanHuman;
  if (s == "human-bot") return Label::HumanBot;
  throw DataError("unknown label \"" + s + "\"");
}

struct Utterance {
  Speaker speaker = Speaker::Human;
  std::string text;
  std::size_t index = 0;  // consecutive from 0 within a dialogue
};

struct Dialogue {
  std::string id;      // unique within a corpus
  std::string source;  // dataset tag
  Label label = Label::HumanHuman;
  std::vector<Utterance> utterances;

  bool alternating() const {
    for (std::size_t i = 1; i < utterances.size(); ++i)
      if (utterances[i].speaker == utterances[i - 1].speaker) return false;
    return true;
  }
};

struct CorpusSet {
  std::string name;
  std::vector<Dialogue> dialogues;

  bool empty() const { return dialogues.empty(); }
  std::size_t size() const { return dialogues.size(); }
};

struct CorpusStats {
  std::size_t n_dialogues = 0;
  std::size_t n_utterances = 0;
  std::size_t n_empty_utterances = 0;  // empty turns preserved from source files
  double avg_utterances_per_dialogue = 0.0;
  double avg_words_per_utterance = 0.0;
  std::map<Label, std::size_t> label_counts;
};

namespace detail {

inline void check_unique_ids(const CorpusSet& c) {
  std::unordered_set<std::string> seen;
  for (const auto& d : c.dialogues)
    if (!seen.insert(d.id).second)
      throw DataError("duplicate dialogue id \"" + d.id + "\" in corpus " + c.name);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Canonical dialogue file: UTF-8, one JSON record per line with fields
// id, source, label, utterances[{speaker,text}]. The exporter emits the same
// byte sequence for equal inputs.
// ---------------------------------------------------------------------------

inline CorpusSet load_canonical(std::istream& in, const std::string& name,
                                const std::string& origin = "<stream>") {
  CorpusSet corpus;
  corpus.name = name;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) -> void {
    std::ostringstream os;
    os << origin << ": " << msg << " at line " << line_no;
    throw DataError(os.str());
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(std::string("malformed record (") + e.what() + ")");
    }
    if (!rec.is_object() || !rec.contains("id") || !rec.contains("source") ||
        !rec.contains("label") || !rec.contains("utterances") ||
        !rec["id"].is_string() || !rec["source"].is_string() ||
        !rec["label"].is_string() || !rec["utterances"].is_array())
      fail("record missing required fields");
    Dialogue d;
    d.id = rec["id"].get<std::string>();
    d.source = rec["source"].get<std::string>();
    const std::string label_str = rec["label"].get<std::string>();
    if (label_str == "human-human") {
      d.label = Label::HumanHuman;
    } else if (label_str == "human-bot") {
      d.label = Label::HumanBot;
    } else {
      fail("unknown label \"" + label_str + "\"");
    }
    if (!seen_ids.insert(d.id).second) fail("duplicate id \"" + d.id + "\"");
    std::size_t idx = 0;
    for (const auto& u : rec["utterances"]) {
      if (!u.is_object() || !u.contains("speaker") || !u.contains("text") ||
          !u["speaker"].is_string() || !u["text"].is_string())
        fail("malformed utterance");
      const std::string sp = u["speaker"].get<std::string>();
      Utterance ut;
      if (sp == "human") {
        ut.speaker = Speaker::Human;
      } else if (sp == "unknown") {
        ut.speaker = Speaker::Unknown;
      } else {
        fail("unknown speaker \"" + sp + "\"");
      }
      ut.text = u["text"].get<std::string>();
      ut.index = idx++;
      d.utterances.push_back(std::move(ut));
    }
    corpus.dialogues.push_back(std::move(d));
  }
  return corpus;
}

inline CorpusSet load_canonical_file(const std::string& path,
                                     const std::string& name = "") {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);
  return load_canonical(in, name.empty() ? path : name, path);
}

inline void save_canonical(const CorpusSet& c, std::ostream& out) {
  for (const auto& d : c.dialogues) {
    nlohmann::ordered_json rec;
    rec["id"] = d.id;
    rec["source"] = d.source;
    rec["label"] = to_string(d.label);
    auto& utts = rec["utterances"] = nlohmann::ordered_json::array();
    for (const auto& u : d.utterances) {
      nlohmann::ordered_json ju;
      ju["speaker"] = to_string(u.speaker);
      ju["text"] = u.text;
      utts.push_back(std::move(ju));
    }
    out << rec.dump() << "\n";
  }
}

inline void save_canonical_file(const CorpusSet& c, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file: " + path);
  save_canonical(c, out);
  if (!out) throw DataError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Format adapters
// ---------------------------------------------------------------------------

enum class ImportFormat { Convai2Json, DailydialogText };

inline ImportFormat import_format_from_string(const std::string& s) {
  if (s == "convai2_json") return ImportFormat::Convai2Json;
  if (s == "dailydialog_text") return ImportFormat::DailydialogText;
  throw DataError("unknown import format \"" + s + "\"");
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// One dialogue per line; utterances separated by "__eou__". Speakers
// alternate starting with the Human.
inline CorpusSet import_dailydialog(std::istream& in, Label label,
                                    const std::string& source_tag,
                                    const std::string& origin) {
  CorpusSet corpus;
  corpus.name = source_tag;
  std::string line;
  std::size_t line_no = 0, next_id = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    Dialogue d;
    d.id = source_tag + "-" + std::to_string(next_id++);
    d.source = source_tag;
    d.label = label;
    static const std::string kSep = "__eou__";
    std::vector<std::string> pieces;
    std::size_t pos = 0;
    while (true) {
      std::size_t sep = line.find(kSep, pos);
      pieces.push_back(trim(sep == std::string::npos ? line.substr(pos)
                                                     : line.substr(pos, sep - pos)));
      if (sep == std::string::npos) break;
      pos = sep + kSep.size();
    }
    // Lines conventionally end with the separator; drop only that trailing
    // empty piece. Interior empty pieces are empty turns and are preserved.
    if (!pieces.empty() && pieces.back().empty()) pieces.pop_back();
    const bool any_text =
        std::any_of(pieces.begin(), pieces.end(),
                    [](const std::string& p) { return !p.empty(); });
    if (!any_text) {
      std::ostringstream os;
      os << origin << ":" << line_no << ": no utterances in record";
      throw DataError(os.str());
    }
    for (auto& piece : pieces) {
      Utterance u;
      u.speaker = d.utterances.size() % 2 == 0 ? Speaker::Human : Speaker::Unknown;
      u.text = std::move(piece);
      u.index = d.utterances.size();
      d.utterances.push_back(std::move(u));
    }
    corpus.dialogues.push_back(std::move(d));
  }
  return corpus;
}

// ConvAI2-style JSON: a top-level array (or an object whose "dialogs" member
// is the array) of records, each holding "dialog": [{"sender","text",...}].
// At most two senders may appear. A sender flagged with sender_class or
// user_class "Bot" maps to Unknown; otherwise the first sender to speak is
// the Human and the other one is Unknown. Human-human sources therefore keep
// their second participant as Unknown.
inline CorpusSet import_convai2(std::istream& in, Label label,
                                const std::string& source_tag,
                                const std::string& origin) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(origin + ": " + e.what());
  }
  const nlohmann::json* records = nullptr;
  if (root.is_array()) {
    records = &root;
  } else if (root.is_object() && root.contains("dialogs") && root["dialogs"].is_array()) {
    records = &root["dialogs"];
  } else {
    throw DataError(origin + ": expected a JSON array of dialog records");
  }
  CorpusSet corpus;
  corpus.name = source_tag;
  std::size_t rec_no = 0;
  for (const auto& rec : *records) {
    std::ostringstream where;
    where << origin << ": record " << rec_no;
    if (!rec.is_object() || !rec.contains("dialog") || !rec["dialog"].is_array())
      throw DataError(where.str() + ": missing \"dialog\" array");
    // sender -> speaker mapping
    std::vector<std::string> senders;
    std::string bot_sender;
    auto note_sender = [&](const std::string& s) {
      if (std::find(senders.begin(), senders.end(), s) == senders.end())
        senders.push_back(s);
    };
    for (const auto& turn : rec["dialog"]) {
      if (!turn.is_object() || !turn.contains("text"))
        throw DataError(where.str() + ": malformed turn");
      const std::string sender =
          turn.contains("sender") && turn["sender"].is_string()
              ? turn["sender"].get<std::string>()
              : "";
      note_sender(sender);
      if (turn.contains("sender_class") && turn["sender_class"].is_string() &&
          turn["sender_class"].get<std::string>() == "Bot")
        bot_sender = sender;
    }
    if (rec.contains("users") && rec["users"].is_array()) {
      for (const auto& user : rec["users"]) {
        if (!user.is_object()) continue;
        for (const char* key : {"user_class", "user_type"}) {
          if (user.contains(key) && user[key].is_string() &&
              user[key].get<std::string>() == "Bot" && user.contains("id") &&
              user["id"].is_string())
            bot_sender = user["id"].get<std::string>();
        }
      }
    }
    if (senders.size() > 2)
      throw DataError(where.str() + ": more than two senders");
    auto speaker_of = [&](const std::string& sender) {
      if (!bot_sender.empty()) return sender == bot_sender ? Speaker::Unknown : Speaker::Human;
      return sender == senders.front() ? Speaker::Human : Speaker::Unknown;
    };
    Dialogue d;
    d.id = rec.contains("dialog_id") && rec["dialog_id"].is_string()
               ? source_tag + "-" + rec["dialog_id"].get<std::string>()
               : source_tag + "-" + std::to_string(rec_no);
    d.source = source_tag;
    d.label = label;
    for (const auto& turn : rec["dialog"]) {
      Utterance u;
      const std::string sender =
          turn.contains("sender") && turn["sender"].is_string()
              ? turn["sender"].get<std::string>()
              : "";
      u.speaker = speaker_of(sender);
      if (!turn["text"].is_string())
        throw DataError(where.str() + ": turn text is not a string");
      u.text = turn["text"].get<std::string>();
      u.index = d.utterances.size();
      d.utterances.push_back(std::move(u));
    }
    corpus.dialogues.push_back(std::move(d));
    ++rec_no;
  }
  detail::check_unique_ids(corpus);
  return corpus;
}

}  // namespace detail

inline CorpusSet import_adapter(ImportFormat format, std::istream& in, Label label,
                                const std::string& source_tag,
                                const std::string& origin = "<stream>") {
  switch (format) {
    case ImportFormat::DailydialogText:
      return detail::import_dailydialog(in, label, source_tag, origin);
    case ImportFormat::Convai2Json:
      return detail::import_convai2(in, label, source_tag, origin);
  }
  throw DataError("unknown import format");
}

inline CorpusSet import_adapter_file(ImportFormat format, const std::string& path,
                                     Label label, const std::string& source_tag) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  return import_adapter(format, in, label, source_tag, path);
}

// ---------------------------------------------------------------------------
// Normalization: consecutive utterances by the same speaker merge into one,
// joined with a single space, and indices are recomputed. A dialogue that
// starts with the Unknown speaker keeps that order.
// ---------------------------------------------------------------------------

inline Dialogue normalize(const Dialogue& d) {
  Dialogue out;
  out.id = d.id;
  out.source = d.source;
  out.label = d.label;
  for (const auto& u : d.utterances) {
    if (!out.utterances.empty() && out.utterances.back().speaker == u.speaker) {
      out.utterances.back().text += " " + u.text;
    } else {
      Utterance merged;
      merged.speaker = u.speaker;
      merged.text = u.text;
      merged.index = out.utterances.size();
      out.utterances.push_back(std::move(merged));
    }
  }
  return out;
}

struct NormalizeResult {
  CorpusSet corpus;
  std::size_t dropped = 0;  // dialogues with < 2 utterances after merging
};

inline NormalizeResult normalize_corpus(const CorpusSet& c) {
  NormalizeResult result;
  result.corpus.name = c.name;
  for (const auto& d : c.dialogues) {
    Dialogue n = normalize(d);
    if (n.utterances.size() < 2) {
      ++result.dropped;
      continue;
    }
    result.corpus.dialogues.push_back(std::move(n));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Deterministic 70/10/20 split
// ---------------------------------------------------------------------------

struct SplitSets {
  CorpusSet train;
  CorpusSet validation;
  CorpusSet test;
};

// Shuffles by a seeded permutation, then cuts at floor(0.7 n) and
// floor(0.8 n). Same seed, same corpus -> identical membership.
inline SplitSets split(const CorpusSet& c, std::uint64_t seed) {
  const std::size_t n = c.dialogues.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t cut_train = n * 7 / 10;
  const std::size_t cut_val = n * 8 / 10;
  SplitSets out;
  out.train.name = c.name + ".train";
  out.validation.name = c.name + ".validation";
  out.test.name = c.name + ".test";
  for (std::size_t i = 0; i < n; ++i) {
    const Dialogue& d = c.dialogues[order[i]];
    if (i < cut_train)
      out.train.dialogues.push_back(d);
    else if (i < cut_val)
      out.validation.dialogues.push_back(d);
    else
      out.test.dialogues.push_back(d);
  }
  return out;
}

// Splits each source corpus independently with the same seed and unions the
// parts, so a source shared by two groups lands in the same split membership
// in both.
inline SplitSets split_grouped(const std::vector<CorpusSet>& sources,
                               const std::string& group_name, std::uint64_t seed) {
  SplitSets out;
  out.train.name = group_name + ".train";
  out.validation.name = group_name + ".validation";
  out.test.name = group_name + ".test";
  for (const auto& src : sources) {
    SplitSets part = split(src, seed);
    auto append = [](CorpusSet& dst, CorpusSet& from) {
      for (auto& d : from.dialogues) dst.dialogues.push_back(std::move(d));
    };
    append(out.train, part.train);
    append(out.validation, part.validation);
    append(out.test, part.test);
  }
  detail::check_unique_ids(out.train);
  detail::check_unique_ids(out.validation);
  detail::check_unique_ids(out.test);
  return out;
}

// ---------------------------------------------------------------------------
// Corpus statistics
// ---------------------------------------------------------------------------

inline CorpusStats stats(const CorpusSet& c) {
  CorpusStats s;
  s.n_dialogues = c.dialogues.size();
  std::size_t total_words = 0;
  for (const auto& d : c.dialogues) {
    s.n_utterances += d.utterances.size();
    ++s.label_counts[d.label];
    for (const auto& u : d.utterances) {
      if (u.text.empty()) ++s.n_empty_utterances;
      total_words += tokenize(u.text).size();
    }
  }
  if (s.n_dialogues > 0)
    s.avg_utterances_per_dialogue =
        static_cast<double>(s.n_utterances) / static_cast<double>(s.n_dialogues);
  if (s.n_utterances > 0)
    s.avg_words_per_utterance =
        static_cast<double>(total_words) / static_cast<double>(s.n_utterances);
  return s;
}

}  // namespace dialign
