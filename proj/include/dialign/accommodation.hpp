#pragma once

#include <charconv>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dialign/corpus.hpp"
#include "dialign/error.hpp"
#include "dialign/lexicon.hpp"
#include "dialign/parallel.hpp"

namespace dialign {

// Which participant's replies are being measured.
struct Perspective {
  Speaker responder = Speaker::Unknown;
};

// Conversation-level scores for one category. A reply at position i is a
// responder turn with i > 0; it is triggered when the preceding turn
// contains the category.
//
//   baseline    = P(c in reply)              over all replies
//   conditional = P(c in reply | triggered)  over triggered replies
//   acc         = conditional - baseline
//
// Scores stay missing while their denominator is zero; imputation is a
// modeling choice that belongs to the feature layer.
struct CategoryAccommodation {
  std::optional<double> baseline;
  std::optional<double> conditional;
  std::optional<double> acc;
  std::size_t trigger_count = 0;
};

struct AccommodationProfile {
  Speaker responder = Speaker::Unknown;
  std::size_t reply_count = 0;
  std::vector<std::string> categories;        // lexicon order
  std::vector<CategoryAccommodation> scores;  // parallel to categories
};

inline AccommodationProfile conversation_accommodation(const Dialogue& d,
                                                       const Lexicon& lex,
                                                       Perspective p) {
  if (!d.alternating())
    throw DataError("dialogue \"" + d.id + "\" is not normalized (speakers repeat)");
  AccommodationProfile profile;
  profile.responder = p.responder;
  profile.categories = lex.category_names();
  profile.scores.resize(lex.size());

  std::vector<std::vector<bool>> presence;
  presence.reserve(d.utterances.size());
  for (const auto& u : d.utterances)
    presence.push_back(category_presence(tokenize(u.text), lex));

  std::vector<std::size_t> reply_hits(lex.size(), 0);
  std::vector<std::size_t> trigger_hits(lex.size(), 0);
  std::vector<std::size_t> both_hits(lex.size(), 0);
  for (std::size_t i = 1; i < d.utterances.size(); ++i) {
    if (d.utterances[i].speaker != p.responder) continue;
    ++profile.reply_count;
    for (std::size_t c = 0; c < lex.size(); ++c) {
      const bool in_reply = presence[i][c];
      const bool in_trigger = presence[i - 1][c];
      if (in_reply) ++reply_hits[c];
      if (in_trigger) ++trigger_hits[c];
      if (in_reply && in_trigger) ++both_hits[c];
    }
  }
  for (std::size_t c = 0; c < lex.size(); ++c) {
    CategoryAccommodation& s = profile.scores[c];
    s.trigger_count = trigger_hits[c];
    if (profile.reply_count > 0)
      s.baseline = static_cast<double>(reply_hits[c]) /
                   static_cast<double>(profile.reply_count);
    if (trigger_hits[c] > 0) {
      s.conditional = static_cast<double>(both_hits[c]) /
                      static_cast<double>(trigger_hits[c]);
      s.acc = *s.conditional - *s.baseline;
    }
  }
  return profile;
}

// Group level: the unweighted mean of each conversation-level score over the
// dialogues where it is defined, plus the contributing-dialogue counts.
struct GroupCategoryScore {
  std::optional<double> mean_acc;
  std::optional<double> mean_baseline;
  std::size_t n_acc = 0;       // dialogues contributing to mean_acc
  std::size_t n_baseline = 0;  // dialogues contributing to mean_baseline
};

struct GroupAccommodationProfile {
  Speaker responder = Speaker::Unknown;
  std::size_t n_dialogues = 0;  // dialogues scored (after normalization)
  std::vector<std::string> categories;
  std::vector<GroupCategoryScore> scores;
};

// Dialogues are normalized first; those left with fewer than two utterances
// are skipped. Per-dialogue profiles may be computed concurrently, but the
// reduction runs in corpus order so the sums are stable.
inline GroupAccommodationProfile group_accommodation(const CorpusSet& c,
                                                     const Lexicon& lex,
                                                     Perspective p,
                                                     unsigned threads = 1) {
  NormalizeResult normalized = normalize_corpus(c);
  const auto& dialogues = normalized.corpus.dialogues;

  std::vector<AccommodationProfile> profiles(dialogues.size());
  parallel_for(dialogues.size(), threads, [&](std::size_t i) {
    profiles[i] = conversation_accommodation(dialogues[i], lex, p);
  });

  GroupAccommodationProfile group;
  group.responder = p.responder;
  group.n_dialogues = dialogues.size();
  group.categories = lex.category_names();
  group.scores.resize(lex.size());
  std::vector<double> acc_sum(lex.size(), 0.0), base_sum(lex.size(), 0.0);
  for (const auto& profile : profiles) {
    for (std::size_t cat = 0; cat < lex.size(); ++cat) {
      const CategoryAccommodation& s = profile.scores[cat];
      if (s.acc) {
        acc_sum[cat] += *s.acc;
        ++group.scores[cat].n_acc;
      }
      if (s.baseline) {
        base_sum[cat] += *s.baseline;
        ++group.scores[cat].n_baseline;
      }
    }
  }
  for (std::size_t cat = 0; cat < lex.size(); ++cat) {
    GroupCategoryScore& s = group.scores[cat];
    if (s.n_acc > 0) s.mean_acc = acc_sum[cat] / static_cast<double>(s.n_acc);
    if (s.n_baseline > 0)
      s.mean_baseline = base_sum[cat] / static_cast<double>(s.n_baseline);
  }
  return group;
}

// ---------------------------------------------------------------------------
// Alignment report: group scores for both perspectives, one row per
// (perspective, category), ready for plotting.
// ---------------------------------------------------------------------------

struct AlignmentRow {
  Speaker perspective = Speaker::Human;
  std::string category;
  std::optional<double> group_acc;
  std::optional<double> group_baseline;
  std::size_t n_contributing = 0;  // dialogues contributing to group_acc
};

struct AlignmentReport {
  std::vector<AlignmentRow> rows;
};

inline AlignmentReport alignment_report(const CorpusSet& c, const Lexicon& lex,
                                        unsigned threads = 1) {
  AlignmentReport report;
  for (Speaker responder : {Speaker::Human, Speaker::Unknown}) {
    GroupAccommodationProfile group =
        group_accommodation(c, lex, Perspective{responder}, threads);
    for (std::size_t cat = 0; cat < group.categories.size(); ++cat) {
      AlignmentRow row;
      row.perspective = responder;
      row.category = group.categories[cat];
      row.group_acc = group.scores[cat].mean_acc;
      row.group_baseline = group.scores[cat].mean_baseline;
      row.n_contributing = group.scores[cat].n_acc;
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

// Shortest round-trip decimal form; deterministic for a given bit pattern.
inline std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void write_alignment_csv(const AlignmentReport& report, std::ostream& out) {
  out << "perspective,category,group_acc,group_baseline,n_contributing\n";
  for (const auto& row : report.rows) {
    out << to_string(row.perspective) << ',' << row.category << ',';
    if (row.group_acc) out << format_double(*row.group_acc);
    out << ',';
    if (row.group_baseline) out << format_double(*row.group_baseline);
    out << ',' << row.n_contributing << '\n';
  }
}

}  // namespace dialign
