#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dialign/corpus.hpp"
#include "dialign/rng.hpp"

using namespace dialign;
using Catch::Matchers::ContainsSubstring;

namespace {

Dialogue make_dialogue(const std::string& id, Label label,
                       std::initializer_list<std::pair<Speaker, std::string>> turns) {
  Dialogue d;
  d.id = id;
  d.source = "test";
  d.label = label;
  for (const auto& [sp, text] : turns) {
    Utterance u;
    u.speaker = sp;
    u.text = text;
    u.index = d.utterances.size();
    d.utterances.push_back(std::move(u));
  }
  return d;
}

std::string to_bytes(const CorpusSet& c) {
  std::ostringstream out;
  save_canonical(c, out);
  return out.str();
}

CorpusSet sample_corpus(std::size_t n, std::uint64_t seed = 5) {
  Rng rng(seed);
  CorpusSet c;
  c.name = "sample";
  for (std::size_t i = 0; i < n; ++i) {
    const Label label = rng.bernoulli(0.5) ? Label::HumanBot : Label::HumanHuman;
    c.dialogues.push_back(make_dialogue(
        "d" + std::to_string(i), label,
        {{Speaker::Human, "hello there " + std::to_string(i)},
         {Speaker::Unknown, "hi, how are you?"},
         {Speaker::Human, "fine thanks"},
         {Speaker::Unknown, "great"}}));
  }
  return c;
}

}  // namespace

TEST_CASE("canonical save/load round-trips and is byte-stable") {
  CorpusSet c = sample_corpus(6);
  const std::string bytes = to_bytes(c);
  std::istringstream in(bytes);
  CorpusSet reloaded = load_canonical(in, "sample", "mem");
  REQUIRE(reloaded.size() == c.size());
  CHECK(to_bytes(reloaded) == bytes);

  // field-level spot check
  CHECK(reloaded.dialogues[0].id == "d0");
  CHECK(reloaded.dialogues[0].source == "test");
  CHECK(reloaded.dialogues[0].utterances.size() == 4);
  CHECK(reloaded.dialogues[0].utterances[1].speaker == Speaker::Unknown);
  CHECK(reloaded.dialogues[0].utterances[1].text == "hi, how are you?");
  CHECK(reloaded.dialogues[0].utterances[1].index == 1);
}

TEST_CASE("canonical loader skips blank lines") {
  std::istringstream in(
      "\n"
      R"({"id":"a","source":"s","label":"human-bot","utterances":[{"speaker":"human","text":"x"}]})"
      "\n   \t\n");
  CorpusSet c = load_canonical(in, "c", "mem");
  REQUIRE(c.size() == 1);
  CHECK(c.dialogues[0].label == Label::HumanBot);
}

TEST_CASE("canonical loader reports position and cause") {
  auto load = [](const std::string& text) {
    std::istringstream in(text);
    return load_canonical(in, "c", "f.jsonl");
  };
  const std::string good =
      R"({"id":"a","source":"s","label":"human-human","utterances":[{"speaker":"human","text":"x"}]})";

  CHECK_THROWS_WITH(load("{oops\n"), ContainsSubstring("f.jsonl") &&
                                         ContainsSubstring("at line 1"));
  CHECK_THROWS_WITH(load(good + "\n{\"id\":1}\n"),
                    ContainsSubstring("at line 2") &&
                        ContainsSubstring("required fields"));
  CHECK_THROWS_WITH(
      load(R"({"id":"a","source":"s","label":"robot","utterances":[]})"),
      ContainsSubstring("unknown label \"robot\""));
  CHECK_THROWS_WITH(load(good + "\n" + good + "\n"),
                    ContainsSubstring("duplicate id \"a\"") &&
                        ContainsSubstring("at line 2"));
  CHECK_THROWS_WITH(
      load(R"({"id":"a","source":"s","label":"human-human","utterances":[{"speaker":"alien","text":"x"}]})"),
      ContainsSubstring("unknown speaker \"alien\""));
  CHECK_THROWS_WITH(
      load(R"({"id":"a","source":"s","label":"human-human","utterances":[{"speaker":"human"}]})"),
      ContainsSubstring("malformed utterance"));
}

TEST_CASE("normalize merges consecutive same-speaker turns with one space") {
  Dialogue d = make_dialogue("x", Label::HumanHuman,
                             {{Speaker::Human, "part one"},
                              {Speaker::Human, "part two"},
                              {Speaker::Unknown, "reply"},
                              {Speaker::Unknown, "more"},
                              {Speaker::Unknown, "again"},
                              {Speaker::Human, "done"}});
  Dialogue n = normalize(d);
  REQUIRE(n.utterances.size() == 3);
  CHECK(n.utterances[0].text == "part one part two");
  CHECK(n.utterances[1].text == "reply more again");
  CHECK(n.utterances[2].text == "done");
  CHECK(n.alternating());
  for (std::size_t i = 0; i < n.utterances.size(); ++i)
    CHECK(n.utterances[i].index == i);
}

TEST_CASE("normalize keeps a dialogue that starts with the unknown speaker") {
  Dialogue d = make_dialogue("x", Label::HumanBot,
                             {{Speaker::Unknown, "hi"}, {Speaker::Human, "hey"}});
  Dialogue n = normalize(d);
  REQUIRE(n.utterances.size() == 2);
  CHECK(n.utterances[0].speaker == Speaker::Unknown);
}

TEST_CASE("normalize is idempotent") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    Dialogue d;
    d.id = "t";
    d.source = "s";
    d.label = Label::HumanHuman;
    const std::size_t n = 1 + rng.below(8);
    for (std::size_t i = 0; i < n; ++i) {
      Utterance u;
      u.speaker = rng.bernoulli(0.5) ? Speaker::Human : Speaker::Unknown;
      u.text = "w" + std::to_string(rng.below(5));
      u.index = i;
      d.utterances.push_back(std::move(u));
    }
    Dialogue once = normalize(d);
    Dialogue twice = normalize(once);
    REQUIRE(once.utterances.size() == twice.utterances.size());
    for (std::size_t i = 0; i < once.utterances.size(); ++i) {
      CHECK(once.utterances[i].speaker == twice.utterances[i].speaker);
      CHECK(once.utterances[i].text == twice.utterances[i].text);
    }
    CHECK(once.alternating());
  }
}

TEST_CASE("normalize_corpus drops dialogues left with fewer than two turns") {
  CorpusSet c;
  c.name = "c";
  c.dialogues.push_back(make_dialogue("keep", Label::HumanHuman,
                                      {{Speaker::Human, "a"}, {Speaker::Unknown, "b"}}));
  c.dialogues.push_back(make_dialogue(
      "drop-merged", Label::HumanHuman,
      {{Speaker::Human, "a"}, {Speaker::Human, "b"}}));  // merges to one turn
  c.dialogues.push_back(
      make_dialogue("drop-single", Label::HumanBot, {{Speaker::Human, "a"}}));
  NormalizeResult r = normalize_corpus(c);
  CHECK(r.dropped == 2);
  REQUIRE(r.corpus.size() == 1);
  CHECK(r.corpus.dialogues[0].id == "keep");
}

TEST_CASE("split sizes follow the 70/10/20 floor rule") {
  auto sizes = [](std::size_t n) {
    SplitSets s = split(sample_corpus(n), 1);
    return std::vector<std::size_t>{s.train.size(), s.validation.size(),
                                    s.test.size()};
  };
  CHECK(sizes(10) == std::vector<std::size_t>{7, 1, 2});
  CHECK(sizes(3) == std::vector<std::size_t>{2, 0, 1});
  CHECK(sizes(100) == std::vector<std::size_t>{70, 10, 20});
  CHECK(sizes(1) == std::vector<std::size_t>{0, 0, 1});
}

TEST_CASE("split is a deterministic partition") {
  CorpusSet c = sample_corpus(37);
  SplitSets a = split(c, 13);
  SplitSets b = split(c, 13);
  CHECK(to_bytes(a.train) == to_bytes(b.train));
  CHECK(to_bytes(a.validation) == to_bytes(b.validation));
  CHECK(to_bytes(a.test) == to_bytes(b.test));

  std::set<std::string> all;
  std::size_t total = 0;
  for (const CorpusSet* part : {&a.train, &a.validation, &a.test}) {
    total += part->size();
    for (const auto& d : part->dialogues) all.insert(d.id);
  }
  CHECK(total == 37);
  CHECK(all.size() == 37);  // disjoint and complete
  CHECK(a.train.name == "sample.train");
  CHECK(a.validation.name == "sample.validation");
  CHECK(a.test.name == "sample.test");
}

TEST_CASE("split_grouped gives a shared source identical membership") {
  CorpusSet shared = sample_corpus(20, 3);
  shared.name = "shared";
  CorpusSet extra = sample_corpus(10, 4);
  extra.name = "extra";
  for (auto& d : extra.dialogues) d.id = "x-" + d.id;

  SplitSets alone = split_grouped({shared}, "g1", 13);
  SplitSets with_extra = split_grouped({shared, extra}, "g2", 13);

  auto ids = [](const CorpusSet& c) {
    std::set<std::string> s;
    for (const auto& d : c.dialogues) s.insert(d.id);
    return s;
  };
  // every id from the shared source keeps its split when the group grows
  for (const auto& id : ids(alone.test)) CHECK(ids(with_extra.test).count(id) == 1);
  for (const auto& id : ids(alone.train)) CHECK(ids(with_extra.train).count(id) == 1);

  CHECK_THROWS_WITH(split_grouped({shared, shared}, "dup", 13),
                    ContainsSubstring("duplicate dialogue id"));
}

TEST_CASE("stats counts dialogues, utterances, words and labels") {
  CorpusSet c;
  c.name = "c";
  c.dialogues.push_back(make_dialogue("a", Label::HumanHuman,
                                      {{Speaker::Human, "one two three"},
                                       {Speaker::Unknown, ""}}));
  c.dialogues.push_back(make_dialogue("b", Label::HumanBot,
                                      {{Speaker::Human, "four five"},
                                       {Speaker::Unknown, "six"},
                                       {Speaker::Human, "seven!"}}));
  CorpusStats s = stats(c);
  CHECK(s.n_dialogues == 2);
  CHECK(s.n_utterances == 5);
  CHECK(s.n_empty_utterances == 1);
  CHECK(s.avg_utterances_per_dialogue == Catch::Approx(2.5));
  CHECK(s.avg_words_per_utterance == Catch::Approx(7.0 / 5.0));
  CHECK(s.label_counts.at(Label::HumanHuman) == 1);
  CHECK(s.label_counts.at(Label::HumanBot) == 1);
}

TEST_CASE("dailydialog import splits on the turn separator") {
  std::istringstream in("Hi ! __eou__ Hello . __eou__\n");
  CorpusSet c = detail::import_dailydialog(in, Label::HumanHuman, "dd", "f.txt");
  REQUIRE(c.size() == 1);
  const Dialogue& d = c.dialogues[0];
  CHECK(d.id == "dd-0");
  CHECK(d.source == "dd");
  REQUIRE(d.utterances.size() == 2);
  CHECK(d.utterances[0].text == "Hi !");
  CHECK(d.utterances[0].speaker == Speaker::Human);
  CHECK(d.utterances[1].text == "Hello .");
  CHECK(d.utterances[1].speaker == Speaker::Unknown);
}

TEST_CASE("dailydialog import keeps interior empty turns, drops the trailing one") {
  std::istringstream in("a __eou__ __eou__ b __eou__\n\nc __eou__ d\n");
  CorpusSet c = detail::import_dailydialog(in, Label::HumanHuman, "dd", "f.txt");
  REQUIRE(c.size() == 2);
  REQUIRE(c.dialogues[0].utterances.size() == 3);
  CHECK(c.dialogues[0].utterances[1].text.empty());
  CHECK(c.dialogues[0].utterances[2].text == "b");
  // no trailing separator on the second line
  REQUIRE(c.dialogues[1].utterances.size() == 2);
  CHECK(c.dialogues[1].id == "dd-1");
  CHECK(c.dialogues[1].utterances[1].text == "d");
}

TEST_CASE("convai2 import maps senders to speakers in speaking order") {
  std::istringstream in(R"([
    {"dialog_id": "t1", "dialog": [
      {"sender": "p1", "text": "hi"},
      {"sender": "p2", "text": "hello"},
      {"sender": "p1", "text": "how are you"},
      {"sender": "p2", "text": "good"}
    ]}
  ])");
  CorpusSet c = detail::import_convai2(in, Label::HumanBot, "cv", "f.json");
  REQUIRE(c.size() == 1);
  const Dialogue& d = c.dialogues[0];
  CHECK(d.id == "cv-t1");
  REQUIRE(d.utterances.size() == 4);
  CHECK(d.utterances[0].speaker == Speaker::Human);
  CHECK(d.utterances[1].speaker == Speaker::Unknown);
  CHECK(d.utterances[2].speaker == Speaker::Human);
  CHECK(d.utterances[3].speaker == Speaker::Unknown);
}

TEST_CASE("convai2 import honours an explicit bot flag over speaking order") {
  std::istringstream in(R"({"dialogs": [
    {"dialog": [
      {"sender": "bot9", "sender_class": "Bot", "text": "greetings"},
      {"sender": "user3", "text": "hi"}
    ]},
    {"users": [{"id": "u2", "user_class": "Bot"}],
     "dialog": [
      {"sender": "u1", "text": "hi"},
      {"sender": "u2", "text": "hello"}
    ]}
  ]})");
  CorpusSet c = detail::import_convai2(in, Label::HumanBot, "cv", "f.json");
  REQUIRE(c.size() == 2);
  // the bot spoke first here, so speaking order alone would get this wrong
  CHECK(c.dialogues[0].utterances[0].speaker == Speaker::Unknown);
  CHECK(c.dialogues[0].utterances[1].speaker == Speaker::Human);
  CHECK(c.dialogues[0].id == "cv-0");
  CHECK(c.dialogues[1].utterances[1].speaker == Speaker::Unknown);
}

TEST_CASE("convai2 import rejects malformed input") {
  auto load = [](const std::string& text) {
    std::istringstream in(text);
    return detail::import_convai2(in, Label::HumanBot, "cv", "f.json");
  };
  CHECK_THROWS_WITH(load("not json"), ContainsSubstring("f.json"));
  CHECK_THROWS_WITH(load(R"({"x": 1})"),
                    ContainsSubstring("expected a JSON array"));
  CHECK_THROWS_WITH(
      load(R"([{"dialog": [{"sender":"a","text":"x"},{"sender":"b","text":"y"},{"sender":"c","text":"z"}]}])"),
      ContainsSubstring("more than two senders"));
  CHECK_THROWS_WITH(load(R"([{"nope": []}])"),
                    ContainsSubstring("record 0") &&
                        ContainsSubstring("missing \"dialog\""));
}

TEST_CASE("dailydialog import rejects a line with no utterances") {
  std::istringstream in("__eou__\n");
  CHECK_THROWS_WITH(
      detail::import_dailydialog(in, Label::HumanHuman, "dd", "f.txt"),
      ContainsSubstring("f.txt:1") && ContainsSubstring("no utterances"));
}
