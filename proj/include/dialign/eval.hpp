#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dialign/corpus.hpp"
#include "dialign/error.hpp"
#include "dialign/features.hpp"
#include "dialign/lexicon.hpp"
#include "dialign/models.hpp"

namespace dialign {

// ---------------------------------------------------------------------------
// Metrics. Zero-denominator precision/recall/F1 fall to 0; macro F1 always
// averages over both classes, even when one is absent from the data.
// ---------------------------------------------------------------------------

inline std::size_t label_index(Label l) { return l == Label::HumanHuman ? 0 : 1; }

struct ConfusionMatrix {
  // counts[actual][predicted], index 0 = HumanHuman, 1 = HumanBot
  std::size_t counts[2][2] = {{0, 0}, {0, 0}};
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct Evaluation {
  ConfusionMatrix confusion;
  ClassScores human_human;
  ClassScores human_bot;
  double macro_f1 = 0.0;
};

inline Evaluation evaluate(const std::vector<Label>& y_true,
                           const std::vector<Label>& y_pred) {
  if (y_true.size() != y_pred.size())
    throw DataError("evaluate: label vectors differ in length");
  if (y_true.empty()) throw DataError("evaluate: no labels");
  Evaluation ev;
  for (std::size_t i = 0; i < y_true.size(); ++i)
    ++ev.confusion.counts[label_index(y_true[i])][label_index(y_pred[i])];
  auto scores = [&](std::size_t c) {
    ClassScores s;
    const double tp = static_cast<double>(ev.confusion.counts[c][c]);
    const double fp = static_cast<double>(ev.confusion.counts[1 - c][c]);
    const double fn = static_cast<double>(ev.confusion.counts[c][1 - c]);
    s.precision = tp + fp > 0.0 ? tp / (tp + fp) : 0.0;
    s.recall = tp + fn > 0.0 ? tp / (tp + fn) : 0.0;
    s.f1 = s.precision + s.recall > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    return s;
  };
  ev.human_human = scores(0);
  ev.human_bot = scores(1);
  ev.macro_f1 = (ev.human_human.f1 + ev.human_bot.f1) / 2.0;
  return ev;
}

inline double macro_f1(const std::vector<Label>& y_true,
                       const std::vector<Label>& y_pred) {
  return evaluate(y_true, y_pred).macro_f1;
}

// ---------------------------------------------------------------------------
// Pipeline description
// ---------------------------------------------------------------------------

enum class FeatureFamily { Bow, Embedding, Liwc, Accommodation, LiwcAccommodation };
enum class ModelFamily { LogReg, Forest, Baseline };

inline const char* to_string(FeatureFamily f) {
  switch (f) {
    case FeatureFamily::Bow: return "bow";
    case FeatureFamily::Embedding: return "embedding";
    case FeatureFamily::Liwc: return "liwc";
    case FeatureFamily::Accommodation: return "accommodation";
    case FeatureFamily::LiwcAccommodation: return "liwc_accommodation";
  }
  return "?";
}

inline FeatureFamily feature_family_from_string(const std::string& s) {
  if (s == "bow") return FeatureFamily::Bow;
  if (s == "embedding") return FeatureFamily::Embedding;
  if (s == "liwc") return FeatureFamily::Liwc;
  if (s == "accommodation") return FeatureFamily::Accommodation;
  if (s == "liwc_accommodation") return FeatureFamily::LiwcAccommodation;
  throw DataError("unknown feature family \"" + s + "\"");
}

inline const char* to_string(ModelFamily m) {
  switch (m) {
    case ModelFamily::LogReg: return "logreg";
    case ModelFamily::Forest: return "forest";
    case ModelFamily::Baseline: return "baseline";
  }
  return "?";
}

inline ModelFamily model_family_from_string(const std::string& s) {
  if (s == "logreg") return ModelFamily::LogReg;
  if (s == "forest") return ModelFamily::Forest;
  if (s == "baseline") return ModelFamily::Baseline;
  throw DataError("unknown model family \"" + s + "\"");
}

inline bool is_content_family(FeatureFamily f) {
  return f == FeatureFamily::Bow || f == FeatureFamily::Embedding;
}

struct PipelineSpec {
  FeatureFamily features = FeatureFamily::Accommodation;
  Variant variant = Variant::HumanOnly;
  ModelFamily model = ModelFamily::Forest;
  BaselineKind baseline = BaselineKind::MostFrequent;  // model == Baseline only
  bool allow_mismatched_pairing = false;
  std::string embeddings_path;  // features == Embedding only
  std::size_t n_trees = 1000;
  std::uint64_t model_seed = 7;
  unsigned threads = 1;
  // empty grids mean "use the standard sweep"
  std::vector<LogRegConfig> logreg_grid;
  std::vector<ForestConfig> forest_grid;
};

// Content features ride the linear model, stylistic features the forest;
// crossing them is opt-in so accidental config edits fail loudly.
inline void validate_pairing(const PipelineSpec& spec) {
  if (spec.model == ModelFamily::Baseline || spec.allow_mismatched_pairing) return;
  const bool content = is_content_family(spec.features);
  if (content && spec.model != ModelFamily::LogReg)
    throw DataError(std::string("pipeline: ") + to_string(spec.features) +
                    " features pair with logreg (set allow_mismatched to override)");
  if (!content && spec.model != ModelFamily::Forest)
    throw DataError(std::string("pipeline: ") + to_string(spec.features) +
                    " features pair with forest (set allow_mismatched to override)");
  if (spec.features == FeatureFamily::Embedding && spec.embeddings_path.empty())
    throw DataError("pipeline: embedding features need an embeddings sidecar path");
}

// Standard sweeps, enumerated with the rightmost knob moving fastest. Ties in
// validation score resolve to the earlier entry, so this order is part of the
// contract.
inline std::vector<LogRegConfig> standard_logreg_grid() {
  std::vector<LogRegConfig> grid;
  for (double c : {0.0001, 0.001, 0.01, 0.1, 1.0, 10.0})
    for (ClassWeight w : {ClassWeight::None, ClassWeight::Balanced})
      for (Normalization n : {Normalization::Standardize, Normalization::UnitNormalize,
                              Normalization::None}) {
        LogRegConfig cfg;
        cfg.c_value = c;
        cfg.class_weight = w;
        cfg.normalization = n;
        grid.push_back(cfg);
      }
  return grid;
}

inline std::vector<ForestConfig> standard_forest_grid(std::size_t n_trees,
                                                      std::uint64_t seed) {
  std::vector<ForestConfig> grid;
  for (ClassWeight w : {ClassWeight::None, ClassWeight::Balanced,
                        ClassWeight::BalancedSubsample})
    for (Criterion c : {Criterion::Gini, Criterion::Entropy})
      for (MaxFeatures m : {MaxFeatures::Sqrt, MaxFeatures::Log2, MaxFeatures::All})
        for (bool b : {true, false}) {
          ForestConfig cfg;
          cfg.n_trees = n_trees;
          cfg.class_weight = w;
          cfg.criterion = c;
          cfg.max_features = m;
          cfg.bootstrap = b;
          cfg.seed = seed;
          grid.push_back(cfg);
        }
  return grid;
}

inline std::string describe(const LogRegConfig& c) {
  return std::string("logreg C=") + format_double(c.c_value) +
         " class_weight=" + to_string(c.class_weight) +
         " normalization=" + to_string(c.normalization);
}

inline std::string describe(const ForestConfig& c) {
  return std::string("forest class_weight=") + to_string(c.class_weight) +
         " criterion=" + to_string(c.criterion) +
         " max_features=" + to_string(c.max_features) +
         " bootstrap=" + (c.bootstrap ? "true" : "false");
}

// ---------------------------------------------------------------------------
// Feature assembly. Fitted artifacts (TF-IDF vocabulary, embedding table)
// come from the source training split only, never validation or test.
// ---------------------------------------------------------------------------

struct Artifacts {
  std::optional<TfidfModel> tfidf;
  std::optional<EmbeddingTable> embeddings;
};

inline Artifacts fit_artifacts(const CorpusSet& source_train, const PipelineSpec& spec,
                               const std::unordered_set<std::string>& all_ids) {
  Artifacts a;
  if (spec.model == ModelFamily::Baseline) return a;
  if (spec.features == FeatureFamily::Bow)
    a.tfidf = tfidf_fit(source_train, spec.variant);
  else if (spec.features == FeatureFamily::Embedding)
    a.embeddings = load_embeddings_file(spec.embeddings_path, spec.variant, all_ids);
  return a;
}

inline FeatureMatrix build_features(const CorpusSet& c, const PipelineSpec& spec,
                                    const Lexicon& lex, const Artifacts& art) {
  switch (spec.features) {
    case FeatureFamily::Bow:
      return bow_matrix(*art.tfidf, c);
    case FeatureFamily::Embedding:
      return embedding_matrix(*art.embeddings, c);
    case FeatureFamily::Liwc:
      return liwc_matrix(c, lex, spec.variant);
    case FeatureFamily::Accommodation:
      return accommodation_matrix(c, lex, spec.variant);
    case FeatureFamily::LiwcAccommodation:
      return liwc_plus_accommodation_matrix(c, lex, spec.variant);
  }
  throw DataError("unreachable feature family");
}

inline std::vector<Label> corpus_labels(const CorpusSet& c) {
  std::vector<Label> y;
  y.reserve(c.dialogues.size());
  for (const auto& d : c.dialogues) y.push_back(d.label);
  return y;
}

// ---------------------------------------------------------------------------
// Grid search on the source validation split. Ties keep the earlier config.
// ---------------------------------------------------------------------------

struct GridEntry {
  std::string config;
  double validation_macro_f1 = 0.0;
};

using AnyModel = std::variant<LogRegModel, ForestModel, BaselineModel>;

struct GridOutcome {
  std::size_t best_index = 0;
  std::vector<GridEntry> log;
};

namespace detail {

template <typename Config, typename TrainFn>
GridOutcome sweep(const std::vector<Config>& grid, const FeatureMatrix& train,
                  const FeatureMatrix& val, TrainFn&& fit) {
  if (grid.empty()) throw DataError("grid search: empty configuration grid");
  if (val.n_rows() == 0)
    throw DataError(
        "grid search: validation split is empty; the source corpus is too small "
        "to carve a 70/10/20 split from");
  GridOutcome out;
  double best = -1.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    auto model = fit(grid[i], train);
    const Prediction pred = predict(model, val.rows);
    const double score = macro_f1(val.labels, pred.labels);
    out.log.push_back({describe(grid[i]), score});
    if (score > best) {  // strict: first best wins
      best = score;
      out.best_index = i;
    }
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Pipeline training: fit artifacts on the source train split, sweep the grid
// against the validation split, retrain the winner on the train split.
// `extra_ids` widens the embedding sidecar filter so a later evaluation
// corpus is covered; it never influences fitting.
// ---------------------------------------------------------------------------

struct TrainedPipeline {
  PipelineSpec spec;
  std::string chosen_config;
  std::vector<GridEntry> grid_log;
  Artifacts artifacts;
  AnyModel model;
};

inline TrainedPipeline train_pipeline(
    const SplitSets& source, const PipelineSpec& spec, const Lexicon& lex,
    const std::unordered_set<std::string>& extra_ids = {}) {
  validate_pairing(spec);
  TrainedPipeline tp;
  tp.spec = spec;

  if (spec.model == ModelFamily::Baseline) {
    tp.model =
        train_baseline(corpus_labels(source.train), spec.baseline, spec.model_seed);
    tp.chosen_config = std::string("baseline ") + to_string(spec.baseline);
    return tp;
  }

  std::unordered_set<std::string> all_ids = extra_ids;
  for (const CorpusSet* c : {&source.train, &source.validation})
    for (const auto& d : c->dialogues) all_ids.insert(d.id);

  tp.artifacts = fit_artifacts(source.train, spec, all_ids);
  const FeatureMatrix train = build_features(source.train, spec, lex, tp.artifacts);
  const FeatureMatrix val =
      build_features(source.validation, spec, lex, tp.artifacts);
  if (train.n_rows() == 0) throw DataError("experiment: source train split is empty");

  if (spec.model == ModelFamily::LogReg) {
    const auto grid =
        spec.logreg_grid.empty() ? standard_logreg_grid() : spec.logreg_grid;
    const GridOutcome sweep = detail::sweep(
        grid, train, val, [](const LogRegConfig& c, const FeatureMatrix& tr) {
          return train_logreg(tr.rows, tr.labels, c);
        });
    tp.model = train_logreg(train.rows, train.labels, grid[sweep.best_index]);
    tp.chosen_config = describe(grid[sweep.best_index]);
    tp.grid_log = sweep.log;
    return tp;
  }

  const auto grid = spec.forest_grid.empty()
                        ? standard_forest_grid(spec.n_trees, spec.model_seed)
                        : spec.forest_grid;
  const GridOutcome sweep = detail::sweep(
      grid, train, val, [&](const ForestConfig& c, const FeatureMatrix& tr) {
        return train_forest(tr.rows, tr.labels, c, spec.threads);
      });
  tp.model = train_forest(train.rows, train.labels, grid[sweep.best_index],
                          spec.threads);
  tp.chosen_config = describe(grid[sweep.best_index]);
  tp.grid_log = sweep.log;
  return tp;
}

inline Prediction predict_pipeline(const TrainedPipeline& tp, const CorpusSet& c,
                                   const Lexicon& lex) {
  if (const auto* b = std::get_if<BaselineModel>(&tp.model))
    return predict(*b, c.dialogues.size());
  const FeatureMatrix m = build_features(c, tp.spec, lex, tp.artifacts);
  if (const auto* lr = std::get_if<LogRegModel>(&tp.model))
    return predict(*lr, m.rows);
  return predict(std::get<ForestModel>(tp.model), m.rows);
}

inline nlohmann::json to_json(const PipelineSpec& spec);

// Self-contained model bundle: everything needed to rebuild the pipeline
// except the lexicon and (for embeddings) the sidecar file, which travel by
// path.
inline nlohmann::json to_json(const TrainedPipeline& tp) {
  nlohmann::json j;
  j["version"] = kFormatVersion;
  j["bundle"] = "pipeline";
  j["pipeline"] = to_json(tp.spec);
  j["chosen_config"] = tp.chosen_config;
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : tp.grid_log)
    log.push_back({{"config", e.config}, {"validation_macro_f1", e.validation_macro_f1}});
  j["grid"] = std::move(log);
  if (tp.artifacts.tfidf) j["tfidf"] = to_json(*tp.artifacts.tfidf);
  if (const auto* lr = std::get_if<LogRegModel>(&tp.model))
    j["model"] = to_json(*lr);
  else if (const auto* f = std::get_if<ForestModel>(&tp.model))
    j["model"] = to_json(*f);
  else
    j["model"] = to_json(std::get<BaselineModel>(tp.model));
  return j;
}

// ---------------------------------------------------------------------------
// One transfer experiment: tune on the source's train/validation splits,
// retrain the winner on source train, score on the target's test split.
// ---------------------------------------------------------------------------

struct EvalReport {
  std::string source;
  std::string target;
  PipelineSpec spec;
  std::string chosen_config;
  std::vector<GridEntry> grid_log;
  Evaluation result;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
  std::size_t n_test = 0;
  std::uint64_t split_seed = 0;
};

inline EvalReport run_experiment(const std::string& source_name,
                                 const SplitSets& source,
                                 const std::string& target_name,
                                 const SplitSets& target, const PipelineSpec& spec,
                                 const Lexicon& lex, std::uint64_t split_seed) {
  if (target.test.dialogues.empty())
    throw DataError("experiment: target test split is empty");

  std::unordered_set<std::string> test_ids;
  for (const auto& d : target.test.dialogues) test_ids.insert(d.id);
  const TrainedPipeline tp = train_pipeline(source, spec, lex, test_ids);
  const Prediction pred = predict_pipeline(tp, target.test, lex);

  EvalReport report;
  report.source = source_name;
  report.target = target_name;
  report.spec = spec;
  report.chosen_config = tp.chosen_config;
  report.grid_log = tp.grid_log;
  report.result = evaluate(corpus_labels(target.test), pred.labels);
  report.n_train = source.train.dialogues.size();
  report.n_validation = source.validation.dialogues.size();
  report.n_test = target.test.dialogues.size();
  report.split_seed = split_seed;
  return report;
}

// ---------------------------------------------------------------------------
// Cross-corpus matrix: one experiment per requested (source, target) cell.
// The headline transfer number averages the off-diagonal cells only.
// ---------------------------------------------------------------------------

struct CrossReport {
  std::vector<EvalReport> cells;
  std::optional<double> avg_transfer;
};

inline CrossReport cross_matrix(const std::map<std::string, SplitSets>& groups,
                                const std::vector<std::pair<std::string, std::string>>& cells,
                                const PipelineSpec& spec, const Lexicon& lex,
                                std::uint64_t split_seed) {
  if (cells.empty()) throw DataError("cross: no cells requested");
  CrossReport report;
  double sum = 0.0;
  std::size_t n_off = 0;
  for (const auto& [src, tgt] : cells) {
    auto s_it = groups.find(src);
    auto t_it = groups.find(tgt);
    if (s_it == groups.end()) throw DataError("cross: unknown group \"" + src + "\"");
    if (t_it == groups.end()) throw DataError("cross: unknown group \"" + tgt + "\"");
    report.cells.push_back(run_experiment(src, s_it->second, tgt, t_it->second, spec,
                                          lex, split_seed));
    if (src != tgt) {
      sum += report.cells.back().result.macro_f1;
      ++n_off;
    }
  }
  if (n_off > 0) report.avg_transfer = sum / static_cast<double>(n_off);
  return report;
}

// ---------------------------------------------------------------------------
// Report serialization. Reports carry no timestamps: byte-identical reruns
// are part of the contract. Wall-clock context lives in the run manifest.
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const Evaluation& ev) {
  nlohmann::json j;
  j["confusion"] = {
      {"human-human", {{"human-human", ev.confusion.counts[0][0]},
                       {"human-bot", ev.confusion.counts[0][1]}}},
      {"human-bot", {{"human-human", ev.confusion.counts[1][0]},
                     {"human-bot", ev.confusion.counts[1][1]}}}};
  j["per_class"] = {
      {"human-human", {{"precision", ev.human_human.precision},
                       {"recall", ev.human_human.recall},
                       {"f1", ev.human_human.f1}}},
      {"human-bot", {{"precision", ev.human_bot.precision},
                     {"recall", ev.human_bot.recall},
                     {"f1", ev.human_bot.f1}}}};
  j["macro_f1"] = ev.macro_f1;
  return j;
}

inline nlohmann::json to_json(const PipelineSpec& spec) {
  nlohmann::json j;
  j["features"] = to_string(spec.features);
  j["variant"] = to_string(spec.variant);
  j["model"] = to_string(spec.model);
  if (spec.model == ModelFamily::Baseline) j["baseline"] = to_string(spec.baseline);
  if (spec.model == ModelFamily::Forest) j["n_trees"] = spec.n_trees;
  if (!spec.embeddings_path.empty()) j["embeddings"] = spec.embeddings_path;
  j["model_seed"] = spec.model_seed;
  return j;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j;
  j["source"] = r.source;
  j["target"] = r.target;
  j["pipeline"] = to_json(r.spec);
  j["chosen_config"] = r.chosen_config;
  nlohmann::json log = nlohmann::json::array();
  for (const auto& e : r.grid_log)
    log.push_back({{"config", e.config}, {"validation_macro_f1", e.validation_macro_f1}});
  j["grid"] = std::move(log);
  j["evaluation"] = to_json(r.result);
  j["n_train"] = r.n_train;
  j["n_validation"] = r.n_validation;
  j["n_test"] = r.n_test;
  j["split_seed"] = r.split_seed;
  return j;
}

inline nlohmann::json to_json(const CrossReport& r) {
  nlohmann::json j;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : r.cells) cells.push_back(to_json(c));
  j["cells"] = std::move(cells);
  if (r.avg_transfer)
    j["avg_transfer_macro_f1"] = *r.avg_transfer;
  else
    j["avg_transfer_macro_f1"] = nullptr;
  return j;
}

inline void write_eval_markdown(const EvalReport& r, std::ostream& out) {
  out << "# Transfer evaluation: " << r.source << " to " << r.target << "\n\n";
  out << "Pipeline: " << to_string(r.spec.features) << " features ("
      << to_string(r.spec.variant) << " side), " << to_string(r.spec.model)
      << " model\n\n";
  out << "Chosen configuration: " << r.chosen_config << "\n\n";
  out << "| metric | value |\n|---|---|\n";
  out << "| macro F1 | " << format_double(r.result.macro_f1) << " |\n";
  out << "| F1 human-human | " << format_double(r.result.human_human.f1) << " |\n";
  out << "| F1 human-bot | " << format_double(r.result.human_bot.f1) << " |\n";
  out << "| train / validation / test | " << r.n_train << " / " << r.n_validation
      << " / " << r.n_test << " |\n\n";
  out << "Confusion (rows actual, columns predicted):\n\n";
  out << "| | human-human | human-bot |\n|---|---|---|\n";
  out << "| human-human | " << r.result.confusion.counts[0][0] << " | "
      << r.result.confusion.counts[0][1] << " |\n";
  out << "| human-bot | " << r.result.confusion.counts[1][0] << " | "
      << r.result.confusion.counts[1][1] << " |\n";
}

inline void write_cross_markdown(const CrossReport& r, std::ostream& out) {
  out << "# Cross-corpus transfer\n\n";
  out << "| source | target | macro F1 | chosen configuration |\n|---|---|---|---|\n";
  for (const auto& c : r.cells)
    out << "| " << c.source << " | " << c.target << " | "
        << format_double(c.result.macro_f1) << " | " << c.chosen_config << " |\n";
  out << "\n";
  if (r.avg_transfer)
    out << "Average transfer macro F1 (off-diagonal cells): "
        << format_double(*r.avg_transfer) << "\n";
  else
    out << "No off-diagonal cells requested; no transfer average.\n";
}

}  // namespace dialign
