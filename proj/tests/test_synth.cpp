#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <string>
#include <vector>

#include "dialign/accommodation.hpp"
#include "dialign/corpus.hpp"
#include "dialign/lexicon.hpp"
#include "dialign/synth.hpp"

using namespace dialign;
using Catch::Matchers::ContainsSubstring;

namespace {

SynthConfig base_config() {
  SynthConfig cfg;
  cfg.n_dialogues = 20;
  cfg.n_utterances = 8;
  cfg.utterance_tokens = 6;
  cfg.responder = Speaker::Unknown;
  cfg.label = Label::HumanHuman;
  cfg.source = "gen";
  cfg.seed = 99;
  cfg.filler_vocabulary = {"zzone", "zztwo", "zzthree"};
  cfg.categories = {{"aa", 0.5, 0.8, 0.2}, {"bb", 0.4, 0.5, 0.5}};
  return cfg;
}

std::string canonical_bytes(const CorpusSet& c) {
  std::ostringstream out;
  save_canonical(c, out);
  return out.str();
}

std::size_t count_tokens(const std::string& text) {
  return tokenize(text).tokens.size();
}

}  // namespace

TEST_CASE("generated corpora have the configured shape") {
  SynthConfig cfg = base_config();
  CorpusSet c = generate(cfg);
  REQUIRE(c.dialogues.size() == cfg.n_dialogues);
  CHECK(c.name == "gen");
  for (std::size_t d = 0; d < c.dialogues.size(); ++d) {
    const Dialogue& dlg = c.dialogues[d];
    CHECK(dlg.id == "gen-" + std::to_string(d));
    CHECK(dlg.source == "gen");
    CHECK(dlg.label == Label::HumanHuman);
    REQUIRE(dlg.utterances.size() == cfg.n_utterances);
    for (std::size_t t = 0; t < dlg.utterances.size(); ++t) {
      const Utterance& u = dlg.utterances[t];
      CHECK(u.index == t);
      // the responder answers; the other speaker opens and keeps odd turns
      CHECK(u.speaker == (t % 2 == 1 ? Speaker::Unknown : Speaker::Human));
      CHECK(count_tokens(u.text) == cfg.utterance_tokens);
    }
  }

  SECTION("a human responder flips the turn order") {
    cfg.responder = Speaker::Human;
    CorpusSet flipped = generate(cfg);
    CHECK(flipped.dialogues[0].utterances[0].speaker == Speaker::Unknown);
    CHECK(flipped.dialogues[0].utterances[1].speaker == Speaker::Human);
  }
}

TEST_CASE("generation is deterministic and per-dialogue seeded") {
  SynthConfig cfg = base_config();
  CHECK(canonical_bytes(generate(cfg)) == canonical_bytes(generate(cfg)));

  // dialogue d depends on (seed, d) only, so a longer run extends a shorter one
  SynthConfig longer = cfg;
  longer.n_dialogues = 35;
  CorpusSet small = generate(cfg);
  CorpusSet big = generate(longer);
  for (std::size_t d = 0; d < small.dialogues.size(); ++d)
    CHECK(canonical_bytes({"x", {small.dialogues[d]}}) ==
          canonical_bytes({"x", {big.dialogues[d]}}));

  SynthConfig reseeded = cfg;
  reseeded.seed = 100;
  CHECK(canonical_bytes(generate(reseeded)) != canonical_bytes(generate(cfg)));
}

TEST_CASE("group accommodation converges to its closed form") {
  SynthConfig cfg = base_config();
  cfg.n_dialogues = 400;
  cfg.n_utterances = 20;
  cfg.utterance_tokens = 8;
  cfg.seed = 2718;
  cfg.categories = {{"aa", 0.5, 0.8, 0.2}, {"bb", 0.5, 0.6, 0.6}};
  CorpusSet c = generate(cfg);
  Lexicon lex = planted_lexicon(cfg);
  GroupAccommodationProfile g =
      group_accommodation(c, lex, Perspective{Speaker::Unknown});

  // expectation per word: acc -> (1-q)(p1-p0), baseline -> q*p1 + (1-q)*p0
  REQUIRE(g.scores[0].mean_acc);
  CHECK(*g.scores[0].mean_acc == Catch::Approx(0.3).margin(0.05));
  CHECK(*g.scores[0].mean_baseline == Catch::Approx(0.5).margin(0.05));
  // p1 == p0: echoing carries no signal over the base rate
  CHECK(*g.scores[1].mean_acc == Catch::Approx(0.0).margin(0.05));
  CHECK(*g.scores[1].mean_baseline == Catch::Approx(0.6).margin(0.05));

  // the starter does not accommodate by construction
  GroupAccommodationProfile h =
      group_accommodation(c, lex, Perspective{Speaker::Human});
  REQUIRE(h.scores[0].mean_acc);
  CHECK(*h.scores[0].mean_acc == Catch::Approx(0.0).margin(0.05));
}

TEST_CASE("generator configs are validated") {
  auto broken = [](auto mutate) {
    SynthConfig cfg = base_config();
    mutate(cfg);
    return cfg;
  };
  CHECK_THROWS_WITH(generate(broken([](SynthConfig& c) { c.n_dialogues = 0; })),
                    ContainsSubstring("n_dialogues"));
  CHECK_THROWS_WITH(generate(broken([](SynthConfig& c) { c.n_utterances = 7; })),
                    ContainsSubstring("even and at least 4"));
  CHECK_THROWS_WITH(generate(broken([](SynthConfig& c) { c.n_utterances = 2; })),
                    ContainsSubstring("even and at least 4"));
  CHECK_THROWS_WITH(generate(broken([](SynthConfig& c) { c.source.clear(); })),
                    ContainsSubstring("source tag"));
  CHECK_THROWS_WITH(
      generate(broken([](SynthConfig& c) { c.filler_vocabulary.clear(); })),
      ContainsSubstring("filler vocabulary"));
  CHECK_THROWS_WITH(generate(broken([](SynthConfig& c) { c.utterance_tokens = 1; })),
                    ContainsSubstring("at least the category count"));
  CHECK_THROWS_WITH(
      generate(broken([](SynthConfig& c) { c.categories[0].word = "Two Words!"; })),
      ContainsSubstring("does not survive tokenization"));
  CHECK_THROWS_WITH(
      generate(broken([](SynthConfig& c) { c.categories[1].word = "aa"; })),
      ContainsSubstring("duplicate category word"));
  CHECK_THROWS_WITH(
      generate(broken([](SynthConfig& c) { c.categories[0].p1 = 1.5; })),
      ContainsSubstring("rate outside [0, 1]"));
  CHECK_THROWS_WITH(
      generate(broken([](SynthConfig& c) { c.filler_vocabulary[0] = "aa"; })),
      ContainsSubstring("collides with a category word"));
  CHECK_THROWS_WITH(
      generate(broken([](SynthConfig& c) { c.filler_vocabulary[0] = "Bad Filler"; })),
      ContainsSubstring("does not survive tokenization"));
}

TEST_CASE("the planted lexicon mirrors the category words") {
  SynthConfig cfg = base_config();
  Lexicon lex = planted_lexicon(cfg);
  REQUIRE(lex.size() == 2);
  CHECK(lex.category_names() == std::vector<std::string>{"aa", "bb"});
  TokenSeq toks = tokenize("aa zzone bb");
  auto present = categories_in(toks, lex);
  CHECK(present.count("aa") == 1);
  CHECK(present.count("bb") == 1);
  CHECK(categories_in(tokenize("zzone zztwo"), lex).empty());
}

TEST_CASE("benchmarks pair a matched human and bot corpus") {
  SynthConfig hh = base_config();
  hh.source = "hh";
  SynthConfig hb = base_config();
  hb.source = "hb";
  hb.label = Label::HumanBot;
  hb.seed = 7;
  hb.categories[0].p1 = 0.5;
  hb.categories[0].p0 = 0.5;

  CorpusSet bench = make_detection_benchmark(hh, hb);
  CHECK(bench.name == "hh+hb");
  REQUIRE(bench.dialogues.size() == 40);
  CHECK(bench.dialogues[0].label == Label::HumanHuman);
  CHECK(bench.dialogues[39].label == Label::HumanBot);

  SECTION("mismatched configs are rejected") {
    SynthConfig bad = hb;
    bad.label = Label::HumanHuman;
    CHECK_THROWS_WITH(make_detection_benchmark(hh, bad),
                      ContainsSubstring("labeled human-human and human-bot"));

    bad = hb;
    bad.source = "hh";
    CHECK_THROWS_WITH(make_detection_benchmark(hh, bad),
                      ContainsSubstring("distinct source tags"));

    bad = hb;
    bad.filler_vocabulary.push_back("zzmore");
    CHECK_THROWS_WITH(make_detection_benchmark(hh, bad),
                      ContainsSubstring("filler vocabularies differ"));

    bad = hb;
    bad.categories.pop_back();
    CHECK_THROWS_WITH(make_detection_benchmark(hh, bad),
                      ContainsSubstring("category lists differ"));

    bad = hb;
    bad.categories[1].word = "cc";
    CHECK_THROWS_WITH(make_detection_benchmark(hh, bad),
                      ContainsSubstring("category words differ at position 1"));

    // only the responder's echo rates may differ between the classes
    bad = hb;
    bad.categories[0].q = 0.9;
    CHECK_THROWS_WITH(make_detection_benchmark(hh, bad),
                      ContainsSubstring("starter rate q differs for \"aa\""));
  }
}

TEST_CASE("generator configs survive a json round trip") {
  SynthConfig cfg = base_config();
  SynthConfig back = synth_config_from_json(to_json(cfg));
  CHECK(canonical_bytes(generate(back)) == canonical_bytes(generate(cfg)));

  nlohmann::json j = to_json(cfg);
  j.erase("seed");
  CHECK_THROWS_WITH(synth_config_from_json(j, "cfg.json"),
                    ContainsSubstring("cfg.json: bad generator config"));
  j = to_json(cfg);
  j["responder"] = "bot";
  CHECK_THROWS_WITH(synth_config_from_json(j),
                    ContainsSubstring("unknown responder \"bot\""));
}
