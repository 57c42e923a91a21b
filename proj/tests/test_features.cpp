#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "dialign/corpus.hpp"
#include "dialign/features.hpp"
#include "dialign/lexicon.hpp"
#include "dialign/rng.hpp"

using namespace dialign;
using Catch::Matchers::ContainsSubstring;

namespace {

Lexicon word_lexicon(std::initializer_list<std::string> words) {
  Lexicon lex;
  for (const auto& w : words) {
    lex.add_category(w);
    lex.add_pattern(w, w);
  }
  return lex;
}

Dialogue two_turns(std::string id, std::string human, std::string unknown) {
  Dialogue d;
  d.id = std::move(id);
  d.source = "s";
  d.label = Label::HumanHuman;
  Utterance h;
  h.speaker = Speaker::Human;
  h.text = std::move(human);
  h.index = 0;
  Utterance u;
  u.speaker = Speaker::Unknown;
  u.text = std::move(unknown);
  u.index = 1;
  d.utterances = {std::move(h), std::move(u)};
  return d;
}

CorpusSet corpus_of(std::vector<Dialogue> ds) {
  CorpusSet c;
  c.name = "c";
  c.dialogues = std::move(ds);
  return c;
}

double l2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("tfidf worked example") {
  CorpusSet train = corpus_of({two_turns("d1", "common rare rare", ""),
                               two_turns("d2", "common", "")});
  TfidfModel m = tfidf_fit(train, Variant::Both);
  REQUIRE(m.vocabulary == std::vector<std::string>{"common", "rare"});
  REQUIRE(m.doc_frequency == std::vector<std::size_t>{2, 1});
  REQUIRE(m.n_docs == 2);

  std::vector<double> v = tfidf_transform(m, train.dialogues[0]);
  // recompute from the definition: entry = count * (ln((1+n)/(1+df)) + 1)
  const double w_common = 1.0 * (std::log(3.0 / 3.0) + 1.0);
  const double w_rare = 2.0 * (std::log(3.0 / 2.0) + 1.0);
  const double norm = std::sqrt(w_common * w_common + w_rare * w_rare);
  REQUIRE(v.size() == 2);
  CHECK(v[0] == Catch::Approx(w_common / norm).epsilon(1e-12));
  CHECK(v[1] == Catch::Approx(w_rare / norm).epsilon(1e-12));
  CHECK(v[0] == Catch::Approx(0.3352).margin(5e-5));
  CHECK(v[1] == Catch::Approx(0.9422).margin(5e-5));

  // a word seen in every document keeps idf exactly 1
  std::vector<double> v2 = tfidf_transform(m, train.dialogues[1]);
  CHECK(v2[0] == 1.0);
  CHECK(v2[1] == 0.0);
}

TEST_CASE("tfidf edge cases") {
  CorpusSet train =
      corpus_of({two_turns("d1", "bb aa", ""), two_turns("d2", "cc", "")});
  TfidfModel m = tfidf_fit(train, Variant::Both);

  SECTION("vocabulary is sorted regardless of encounter order") {
    CHECK(m.vocabulary == std::vector<std::string>{"aa", "bb", "cc"});
  }

  SECTION("unseen words contribute nothing") {
    std::vector<double> v = tfidf_transform(m, two_turns("x", "zz aa zz", ""));
    CHECK(v[1] == 0.0);
    CHECK(v[2] == 0.0);
    CHECK(l2(v) == Catch::Approx(1.0));
  }

  SECTION("all-unseen and empty documents map to the zero vector") {
    for (const char* text : {"zz yy", ""}) {
      std::vector<double> v = tfidf_transform(m, two_turns("x", text, ""));
      CHECK(l2(v) == 0.0);
    }
  }

  SECTION("any matched document lands on the unit sphere") {
    Rng rng(5);
    const std::vector<std::string> pool = {"aa", "bb", "cc", "zz"};
    for (int t = 0; t < 100; ++t) {
      std::string text;
      bool matched = false;
      for (std::size_t k = 0; k < 1 + rng.below(8); ++k) {
        const auto& w = pool[rng.below(pool.size())];
        matched |= w != "zz";
        if (!text.empty()) text += ' ';
        text += w;
      }
      std::vector<double> v = tfidf_transform(m, two_turns("x", text, ""));
      CHECK(l2(v) == Catch::Approx(matched ? 1.0 : 0.0).margin(1e-12));
    }
  }

  SECTION("fit rejects empty input") {
    CHECK_THROWS_WITH(tfidf_fit(corpus_of({}), Variant::Both),
                      ContainsSubstring("empty training corpus"));
    // utterances exist but the selected side has no tokens
    CorpusSet silent = corpus_of({two_turns("d", "", "hello there")});
    CHECK_THROWS_WITH(tfidf_fit(silent, Variant::HumanOnly),
                      ContainsSubstring("no tokens"));
  }
}

TEST_CASE("tfidf variant restricts to one side of the conversation") {
  CorpusSet train = corpus_of({two_turns("d1", "alpha", "beta")});
  TfidfModel m = tfidf_fit(train, Variant::HumanOnly);
  CHECK(m.vocabulary == std::vector<std::string>{"alpha"});

  // rewriting the other speaker's text cannot move human-side features
  Dialogue a = two_turns("x", "alpha alpha", "beta beta beta");
  Dialogue b = two_turns("x", "alpha alpha", "totally different words");
  CHECK(tfidf_transform(m, a) == tfidf_transform(m, b));

  Lexicon lex = word_lexicon({"alpha"});
  CHECK(liwc_features(a, lex, Variant::HumanOnly) ==
        liwc_features(b, lex, Variant::HumanOnly));
}

TEST_CASE("tfidf model survives a json round trip") {
  CorpusSet train = corpus_of({two_turns("d1", "common rare rare", ""),
                               two_turns("d2", "common", "")});
  TfidfModel m = tfidf_fit(train, Variant::Both);
  TfidfModel back = tfidf_from_json(to_json(m));
  CHECK(back.vocabulary == m.vocabulary);
  CHECK(back.doc_frequency == m.doc_frequency);
  CHECK(back.n_docs == m.n_docs);
  CHECK(back.variant == m.variant);
  CHECK(tfidf_transform(back, train.dialogues[0]) ==
        tfidf_transform(m, train.dialogues[0]));

  nlohmann::json j = to_json(m);
  j["doc_frequency"].push_back(9);
  CHECK_THROWS_WITH(tfidf_from_json(j), ContainsSubstring("length mismatch"));
  j = to_json(m);
  j.erase("vocabulary");
  CHECK_THROWS_AS(tfidf_from_json(j), DataError);
}

TEST_CASE("liwc features average per-utterance rates") {
  Lexicon lex = word_lexicon({"i"});
  Dialogue d = two_turns("d", "i am i", "you");
  // human rate 2/3, unknown rate 0
  CHECK(liwc_features(d, lex, Variant::HumanOnly)[0] == Catch::Approx(2.0 / 3.0));
  CHECK(liwc_features(d, lex, Variant::UnknownOnly)[0] == 0.0);
  CHECK(liwc_features(d, lex, Variant::Both)[0] == Catch::Approx(1.0 / 3.0));

  // empty selection: dialogue with only one side present
  Dialogue solo;
  solo.id = "solo";
  solo.source = "s";
  solo.label = Label::HumanHuman;
  Utterance u;
  u.speaker = Speaker::Human;
  u.text = "i";
  u.index = 0;
  solo.utterances = {u};
  CHECK(liwc_features(solo, lex, Variant::UnknownOnly) ==
        std::vector<double>{0.0});
}

TEST_CASE("accommodation features impute missing scores as zero") {
  Lexicon lex = word_lexicon({"i"});
  Dialogue d;
  d.id = "d";
  d.source = "s";
  d.label = Label::HumanHuman;
  const char* texts[] = {"i think so", "i agree", "what now", "nothing"};
  for (std::size_t k = 0; k < 4; ++k) {
    Utterance u;
    u.speaker = k % 2 == 0 ? Speaker::Human : Speaker::Unknown;
    u.text = texts[k];
    u.index = k;
    d.utterances.push_back(std::move(u));
  }
  CHECK(accommodation_features(d, lex, Variant::UnknownOnly) ==
        std::vector<double>{0.5});
  CHECK(accommodation_features(d, lex, Variant::HumanOnly) ==
        std::vector<double>{0.0});
  // both: human-responder block first, then unknown-responder
  CHECK(accommodation_features(d, lex, Variant::Both) ==
        std::vector<double>{0.0, 0.5});

  // two turns, human first: human never replies, score missing -> imputed 0
  Dialogue tiny = two_turns("t", "i start", "i follow");
  CHECK(accommodation_features(tiny, lex, Variant::HumanOnly) ==
        std::vector<double>{0.0});
}

TEST_CASE("combine concatenates named blocks") {
  FeatureBlock a{{"x", "y"}, {1.0, 2.0}};
  FeatureBlock b{{"x"}, {3.0}};
  FeatureBlock out = combine({{"a.", a}, {"b.", b}});
  CHECK(out.names == std::vector<std::string>{"a.x", "a.y", "b.x"});
  CHECK(out.values == std::vector<double>{1.0, 2.0, 3.0});

  CHECK_THROWS_WITH(combine({}), ContainsSubstring("no feature blocks"));
  CHECK_THROWS_WITH(combine({{"a.", a}, {"a.", b}}),
                    ContainsSubstring("duplicate feature name \"a.x\""));
  FeatureBlock ragged{{"x", "y"}, {1.0}};
  CHECK_THROWS_WITH(combine({{"a.", ragged}}),
                    ContainsSubstring("length mismatch"));
}

TEST_CASE("embedding sidecars are filtered and validated") {
  const std::unordered_set<std::string> ids = {"d1", "d2"};

  SECTION("variant filtering and unknown-id accounting") {
    std::istringstream in(
        "{\"dialogue_id\": \"d1\", \"variant\": \"human\", \"vector\": [1, 2]}\n"
        "\n"
        "{\"dialogue_id\": \"ghost\", \"variant\": \"human\", \"vector\": [3, 4]}\n"
        "{\"dialogue_id\": \"d2\", \"variant\": \"unknown\", \"vector\": [9]}\n");
    EmbeddingTable t = load_embeddings(in, Variant::HumanOnly, ids);
    CHECK(t.dim == 2);
    CHECK(t.vectors.size() == 1);
    CHECK(t.vectors.at("d1") == std::vector<double>{1.0, 2.0});
    // other-variant records are not errors and not "unknown ids"
    CHECK(t.skipped_unknown_ids == 1);
  }

  SECTION("dimension mismatch names the line") {
    std::istringstream in(
        "{\"dialogue_id\": \"d1\", \"variant\": \"human\", \"vector\": [1, 2]}\n"
        "{\"dialogue_id\": \"d2\", \"variant\": \"human\", \"vector\": [1]}\n");
    CHECK_THROWS_WITH(load_embeddings(in, Variant::HumanOnly, ids, "emb.jsonl"),
                      ContainsSubstring("emb.jsonl:2: vector dimension 1"));
  }

  SECTION("non-numeric and malformed records are rejected") {
    std::istringstream bad_entry(
        "{\"dialogue_id\": \"d1\", \"variant\": \"human\", \"vector\": [\"x\"]}\n");
    CHECK_THROWS_WITH(load_embeddings(bad_entry, Variant::HumanOnly, ids),
                      ContainsSubstring("not a number"));
    std::istringstream not_json("{nope\n");
    CHECK_THROWS_WITH(load_embeddings(not_json, Variant::HumanOnly, ids),
                      ContainsSubstring(":1: malformed record"));
    std::istringstream missing("{\"dialogue_id\": \"d1\", \"vector\": []}\n");
    CHECK_THROWS_AS(load_embeddings(missing, Variant::HumanOnly, ids), DataError);
  }
}

TEST_CASE("matrix builders name their columns by family") {
  Lexicon lex = word_lexicon({"i", "you"});
  CorpusSet c = corpus_of({two_turns("d1", "i you", "you"),
                           two_turns("d2", "you", "i")});

  TfidfModel tf = tfidf_fit(c, Variant::Both);
  FeatureMatrix bow = bow_matrix(tf, c);
  CHECK(bow.feature_names == std::vector<std::string>{"bow.i", "bow.you"});
  CHECK(bow.dialogue_ids == std::vector<std::string>{"d1", "d2"});
  CHECK(bow.labels.size() == 2);

  FeatureMatrix liwc = liwc_matrix(c, lex, Variant::HumanOnly);
  CHECK(liwc.feature_names == std::vector<std::string>{"liwc.i", "liwc.you"});

  FeatureMatrix acc = accommodation_matrix(c, lex, Variant::Both);
  CHECK(acc.feature_names ==
        std::vector<std::string>{"acc.human.i", "acc.human.you",
                                 "acc.unknown.i", "acc.unknown.you"});

  FeatureMatrix both = liwc_plus_accommodation_matrix(c, lex, Variant::UnknownOnly);
  CHECK(both.feature_names ==
        std::vector<std::string>{"liwc.i", "liwc.you", "acc.i", "acc.you"});
  CHECK(both.rows[0].size() == 4);
}

TEST_CASE("embedding matrix requires coverage of every dialogue") {
  CorpusSet c = corpus_of({two_turns("d1", "a", "b"), two_turns("d2", "a", "b")});
  EmbeddingTable t;
  t.variant = Variant::Both;
  t.dim = 2;
  t.vectors["d1"] = {0.5, -0.5};
  CHECK_THROWS_WITH(embedding_matrix(t, c),
                    ContainsSubstring("no embedding for dialogue \"d2\""));
  t.vectors["d2"] = {1.0, 0.0};
  FeatureMatrix m = embedding_matrix(t, c);
  CHECK(m.feature_names == std::vector<std::string>{"emb.0", "emb.1"});
  CHECK(m.rows[1] == std::vector<double>{1.0, 0.0});
}

TEST_CASE("feature matrix validation catches structural damage") {
  FeatureMatrix m;
  m.feature_names = {"f"};
  m.rows = {{1.0}};
  m.labels = {Label::HumanHuman};
  m.dialogue_ids = {"d"};
  CHECK_NOTHROW(m.validate());

  FeatureMatrix wide = m;
  wide.rows[0].push_back(2.0);
  CHECK_THROWS_WITH(wide.validate(), ContainsSubstring("row width"));

  FeatureMatrix nan = m;
  nan.rows[0][0] = std::nan("");
  CHECK_THROWS_WITH(nan.validate(), ContainsSubstring("non-finite"));

  FeatureMatrix skew = m;
  skew.labels.clear();
  CHECK_THROWS_WITH(skew.validate(), ContainsSubstring("misaligned"));
}

TEST_CASE("feature csv quotes awkward names and ids") {
  FeatureMatrix m;
  m.feature_names = {"plain", "with,comma", "with\"quote"};
  m.rows = {{0.5, 1.0, -2.0}};
  m.labels = {Label::HumanBot};
  m.dialogue_ids = {"id,1"};
  std::ostringstream out;
  write_feature_csv(m, out);
  CHECK(out.str() ==
        "id,label,plain,\"with,comma\",\"with\"\"quote\"\n"
        "\"id,1\",human-bot,0.5,1,-2\n");
}
