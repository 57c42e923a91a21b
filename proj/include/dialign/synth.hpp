#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "dialign/corpus.hpp"
#include "dialign/error.hpp"
#include "dialign/lexicon.hpp"
#include "dialign/rng.hpp"

namespace dialign {

// One planted category: the non-responder emits `word` with probability q in
// every utterance; the responder emits it with probability p1 when the
// previous utterance contained it and p0 otherwise. In the long run the
// responder's accommodation for the category converges to (1-q)*(p1-p0).
struct SynthCategory {
  std::string word;
  double q = 0.5;
  double p1 = 0.5;
  double p0 = 0.5;
};

struct SynthConfig {
  std::size_t n_dialogues = 0;
  std::size_t n_utterances = 0;  // even, at least 4; non-responder speaks first
  std::size_t utterance_tokens = 0;
  Speaker responder = Speaker::Unknown;
  Label label = Label::HumanHuman;
  std::string source;
  std::uint64_t seed = 0;
  std::vector<std::string> filler_vocabulary;
  std::vector<SynthCategory> categories;
};

namespace detail {

inline void validate_synth(const SynthConfig& cfg) {
  if (cfg.n_dialogues == 0) throw DataError("synth: n_dialogues must be positive");
  if (cfg.n_utterances < 4 || cfg.n_utterances % 2 != 0)
    throw DataError("synth: n_utterances must be even and at least 4");
  if (cfg.source.empty()) throw DataError("synth: source tag is empty");
  if (cfg.filler_vocabulary.empty()) throw DataError("synth: no filler vocabulary");
  if (cfg.utterance_tokens < cfg.categories.size())
    throw DataError("synth: utterance_tokens must be at least the category count");
  std::unordered_set<std::string> words;
  for (const auto& c : cfg.categories) {
    TokenSeq toks = tokenize(c.word);
    if (toks.tokens.size() != 1 || toks.tokens[0] != c.word)
      throw DataError("synth: category word \"" + c.word +
                      "\" does not survive tokenization");
    if (!words.insert(c.word).second)
      throw DataError("synth: duplicate category word \"" + c.word + "\"");
    for (double rate : {c.q, c.p1, c.p0})
      if (!(rate >= 0.0 && rate <= 1.0))
        throw DataError("synth: rate outside [0, 1] for word \"" + c.word + "\"");
  }
  for (const auto& f : cfg.filler_vocabulary) {
    TokenSeq toks = tokenize(f);
    if (toks.tokens.size() != 1 || toks.tokens[0] != f)
      throw DataError("synth: filler \"" + f + "\" does not survive tokenization");
    if (words.count(f))
      throw DataError("synth: filler \"" + f + "\" collides with a category word");
  }
}

}  // namespace detail

// Deterministic generator: dialogue d uses Rng(Rng::derive(seed, d)), so
// corpora are reproducible and insensitive to generation order.
inline CorpusSet generate(const SynthConfig& cfg) {
  detail::validate_synth(cfg);
  const Speaker starter =
      cfg.responder == Speaker::Human ? Speaker::Unknown : Speaker::Human;
  CorpusSet out;
  out.name = cfg.source;
  out.dialogues.reserve(cfg.n_dialogues);
  const std::size_t n_cat = cfg.categories.size();

  for (std::size_t d = 0; d < cfg.n_dialogues; ++d) {
    Rng rng(Rng::derive(cfg.seed, d));
    Dialogue dlg;
    dlg.id = cfg.source + "-" + std::to_string(d);
    dlg.source = cfg.source;
    dlg.label = cfg.label;
    std::vector<bool> prev_included(n_cat, false);
    for (std::size_t t = 0; t < cfg.n_utterances; ++t) {
      const bool responder_turn = t % 2 == 1;
      std::vector<std::string> tokens;
      tokens.reserve(cfg.utterance_tokens);
      std::vector<bool> included(n_cat, false);
      for (std::size_t c = 0; c < n_cat; ++c) {
        const auto& cat = cfg.categories[c];
        const double rate =
            responder_turn ? (prev_included[c] ? cat.p1 : cat.p0) : cat.q;
        if (rng.bernoulli(rate)) {
          included[c] = true;
          tokens.push_back(cat.word);
        }
      }
      while (tokens.size() < cfg.utterance_tokens) {
        tokens.push_back(
            cfg.filler_vocabulary[rng.below(cfg.filler_vocabulary.size())]);
      }
      rng.shuffle(tokens);
      std::string text;
      for (const auto& t2 : tokens) {
        if (!text.empty()) text += ' ';
        text += t2;
      }
      Utterance u;
      u.speaker = responder_turn ? cfg.responder : starter;
      u.text = std::move(text);
      u.index = t;
      dlg.utterances.push_back(std::move(u));
      prev_included = std::move(included);
    }
    out.dialogues.push_back(std::move(dlg));
  }
  return out;
}

// Builds a matched lexicon: one category per planted word, named after it.
inline Lexicon planted_lexicon(const SynthConfig& cfg) {
  Lexicon lex;
  for (const auto& c : cfg.categories) {
    lex.add_category(c.word);
    lex.add_pattern(c.word, c.word);
  }
  return lex;
}

// Two-class benchmark. Both sides must share filler vocabulary and per-word
// starter behaviour (word list and q); only the responder's p1/p0 may differ,
// so any separation comes from accommodation, not word frequency.
inline CorpusSet make_detection_benchmark(const SynthConfig& cfg_hh,
                                          const SynthConfig& cfg_hb) {
  if (cfg_hh.label != Label::HumanHuman || cfg_hb.label != Label::HumanBot)
    throw DataError("benchmark: configs must be labeled human-human and human-bot");
  if (cfg_hh.source == cfg_hb.source)
    throw DataError("benchmark: configs must use distinct source tags");
  if (cfg_hh.filler_vocabulary != cfg_hb.filler_vocabulary)
    throw DataError("benchmark: filler vocabularies differ");
  if (cfg_hh.categories.size() != cfg_hb.categories.size())
    throw DataError("benchmark: category lists differ in length");
  for (std::size_t c = 0; c < cfg_hh.categories.size(); ++c) {
    if (cfg_hh.categories[c].word != cfg_hb.categories[c].word)
      throw DataError("benchmark: category words differ at position " +
                      std::to_string(c));
    if (cfg_hh.categories[c].q != cfg_hb.categories[c].q)
      throw DataError("benchmark: starter rate q differs for \"" +
                      cfg_hh.categories[c].word + "\"");
  }
  CorpusSet hh = generate(cfg_hh);
  CorpusSet hb = generate(cfg_hb);
  CorpusSet out;
  out.name = cfg_hh.source + "+" + cfg_hb.source;
  out.dialogues = std::move(hh.dialogues);
  out.dialogues.insert(out.dialogues.end(),
                       std::make_move_iterator(hb.dialogues.begin()),
                       std::make_move_iterator(hb.dialogues.end()));
  detail::check_unique_ids(out);
  return out;
}

inline nlohmann::json to_json(const SynthConfig& cfg) {
  nlohmann::json j;
  j["n_dialogues"] = cfg.n_dialogues;
  j["n_utterances"] = cfg.n_utterances;
  j["utterance_tokens"] = cfg.utterance_tokens;
  j["responder"] = to_string(cfg.responder);
  j["label"] = to_string(cfg.label);
  j["source"] = cfg.source;
  j["seed"] = cfg.seed;
  j["filler_vocabulary"] = cfg.filler_vocabulary;
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : cfg.categories)
    cats.push_back({{"word", c.word}, {"q", c.q}, {"p1", c.p1}, {"p0", c.p0}});
  j["categories"] = std::move(cats);
  return j;
}

inline SynthConfig synth_config_from_json(const nlohmann::json& j,
                                          const std::string& origin = "<json>") {
  SynthConfig cfg;
  try {
    cfg.n_dialogues = j.at("n_dialogues").get<std::size_t>();
    cfg.n_utterances = j.at("n_utterances").get<std::size_t>();
    cfg.utterance_tokens = j.at("utterance_tokens").get<std::size_t>();
    const std::string resp = j.at("responder").get<std::string>();
    if (resp == "human")
      cfg.responder = Speaker::Human;
    else if (resp == "unknown")
      cfg.responder = Speaker::Unknown;
    else
      throw DataError("unknown responder \"" + resp + "\"");
    cfg.label = label_from_string(j.at("label").get<std::string>());
    cfg.source = j.at("source").get<std::string>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.filler_vocabulary =
        j.at("filler_vocabulary").get<std::vector<std::string>>();
    for (const auto& cj : j.at("categories")) {
      SynthCategory c;
      c.word = cj.at("word").get<std::string>();
      c.q = cj.at("q").get<double>();
      c.p1 = cj.at("p1").get<double>();
      c.p0 = cj.at("p0").get<double>();
      cfg.categories.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(origin + ": bad generator config (" + e.what() + ")");
  }
  return cfg;
}

inline SynthConfig load_synth_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open generator config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": malformed JSON (" + e.what() + ")");
  }
  return synth_config_from_json(j, path);
}

}  // namespace dialign
