// dialign: bot-or-human conversation analysis from the command line.
//
// Subcommands: import, align, synth, train, eval, cross. Every run writes a
// <out>.manifest.json sidecar with input/output hashes and a timestamp; the
// result files themselves are byte-identical across reruns of the same
// command.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dialign/dialign.hpp"

namespace {

struct GlobalArgs {
  std::string lexicon_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
  unsigned threads = 1;
};

std::string join_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

// The seed and thread flags are config overrides and execution knobs; the
// numbers in any result file depend only on the effective config, never on
// how many workers computed them.
dialign::Lexicon load_lexicon(const GlobalArgs& g, const std::string& config_path,
                              dialign::RunManifest& manifest) {
  std::string path = g.lexicon_path;
  if (path.empty()) path = config_path;
  if (path.empty()) path = "data/core17.dic";
  dialign::Lexicon lex = dialign::load_dic_file(path);
  if (!lex.has_core_categories())
    throw dialign::DataError(path + ": dictionary is missing core categories");
  dialign::add_input(manifest, path);
  return lex;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dialign::DataError("cannot write output file: " + path);
  out << content;
}

void finish(dialign::RunManifest& manifest, const std::string& out_path) {
  dialign::add_output(manifest, out_path);
  dialign::write_manifest_file(out_path + ".manifest.json", manifest);
}

// ---------------------------------------------------------------------------

int cmd_import(const GlobalArgs& g, dialign::RunManifest& manifest,
               const std::string& format, const std::string& input,
               const std::string& source_tag, const std::string& label,
               const std::string& out_path) {
  (void)g;
  const dialign::ImportFormat fmt = dialign::import_format_from_string(format);
  const dialign::Label lbl = dialign::label_from_string(label);
  dialign::add_input(manifest, input);
  dialign::CorpusSet corpus =
      dialign::import_adapter_file(fmt, input, lbl, source_tag);
  dialign::save_canonical_file(corpus, out_path);
  const dialign::CorpusStats st = dialign::stats(corpus);
  std::cerr << "imported " << st.n_dialogues << " dialogues, " << st.n_utterances
            << " utterances (" << st.n_empty_utterances << " empty)\n";
  finish(manifest, out_path);
  return 0;
}

int cmd_align(const GlobalArgs& g, dialign::RunManifest& manifest,
              const std::vector<std::string>& inputs, const std::string& out_path,
              const std::string& format) {
  dialign::Lexicon lex = load_lexicon(g, "", manifest);
  dialign::CorpusSet corpus;
  corpus.name = "align";
  for (const auto& path : inputs) {
    dialign::add_input(manifest, path);
    dialign::CorpusSet part = dialign::load_canonical_file(path);
    for (auto& d : part.dialogues) corpus.dialogues.push_back(std::move(d));
  }
  dialign::detail::check_unique_ids(corpus);
  const dialign::AlignmentReport report =
      dialign::alignment_report(corpus, lex, g.threads);

  std::ostringstream body;
  if (format == "csv") {
    dialign::write_alignment_csv(report, body);
  } else if (format == "md") {
    body << "| perspective | category | group_acc | group_baseline | "
            "n_contributing |\n|---|---|---|---|---|\n";
    for (const auto& row : report.rows) {
      body << "| " << dialign::to_string(row.perspective) << " | " << row.category
           << " | " << (row.group_acc ? dialign::format_double(*row.group_acc) : "")
           << " | "
           << (row.group_baseline ? dialign::format_double(*row.group_baseline) : "")
           << " | " << row.n_contributing << " |\n";
    }
  } else {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) {
      nlohmann::json r;
      r["perspective"] = dialign::to_string(row.perspective);
      r["category"] = row.category;
      r["group_acc"] =
          row.group_acc ? nlohmann::json(*row.group_acc) : nlohmann::json(nullptr);
      r["group_baseline"] = row.group_baseline ? nlohmann::json(*row.group_baseline)
                                               : nlohmann::json(nullptr);
      r["n_contributing"] = row.n_contributing;
      rows.push_back(std::move(r));
    }
    body << nlohmann::json{{"rows", std::move(rows)}}.dump(2) << '\n';
  }
  write_text_file(out_path, body.str());
  finish(manifest, out_path);
  return 0;
}

int cmd_synth(const GlobalArgs& g, dialign::RunManifest& manifest,
              const std::string& config_path, const std::string& config_b_path,
              const std::string& out_path) {
  dialign::add_input(manifest, config_path);
  dialign::SynthConfig cfg = dialign::load_synth_config_file(config_path);
  if (g.seed_set) cfg.seed = g.seed;
  dialign::CorpusSet corpus;
  if (config_b_path.empty()) {
    corpus = dialign::generate(cfg);
  } else {
    dialign::add_input(manifest, config_b_path);
    dialign::SynthConfig cfg_b = dialign::load_synth_config_file(config_b_path);
    if (g.seed_set) cfg_b.seed = g.seed + 1;  // sides must not share a stream
    corpus = dialign::make_detection_benchmark(cfg, cfg_b);
  }
  dialign::save_canonical_file(corpus, out_path);
  std::cerr << "generated " << corpus.dialogues.size() << " dialogues\n";
  finish(manifest, out_path);
  return 0;
}

dialign::ExperimentConfig load_experiment(const GlobalArgs& g,
                                          dialign::RunManifest& manifest,
                                          const std::string& config_path) {
  dialign::add_input(manifest, config_path);
  dialign::ExperimentConfig cfg = dialign::load_experiment_config_file(config_path);
  if (g.seed_set) cfg.pipeline.model_seed = g.seed;
  cfg.pipeline.threads = g.threads;
  for (const auto& [group, files] : cfg.sources)
    for (const auto& f : files) dialign::add_input(manifest, f);
  return cfg;
}

int cmd_train(const GlobalArgs& g, dialign::RunManifest& manifest,
              const std::string& config_path, const std::string& source,
              const std::string& out_path) {
  dialign::ExperimentConfig cfg = load_experiment(g, manifest, config_path);
  dialign::Lexicon lex = load_lexicon(g, cfg.lexicon_path, manifest);
  const dialign::SplitSets splits = dialign::build_group_splits(cfg, source);
  const dialign::TrainedPipeline tp =
      dialign::train_pipeline(splits, cfg.pipeline, lex);
  dialign::save_model_file(out_path, dialign::to_json(tp));
  std::cerr << "trained on " << splits.train.dialogues.size() << " dialogues; "
            << tp.chosen_config << '\n';
  finish(manifest, out_path);
  return 0;
}

int cmd_eval(const GlobalArgs& g, dialign::RunManifest& manifest,
             const std::string& config_path, const std::string& source,
             const std::string& target, const std::string& out_path,
             const std::string& format) {
  dialign::ExperimentConfig cfg = load_experiment(g, manifest, config_path);
  dialign::Lexicon lex = load_lexicon(g, cfg.lexicon_path, manifest);
  const dialign::SplitSets src = dialign::build_group_splits(cfg, source);
  const dialign::SplitSets tgt = source == target
                                     ? src
                                     : dialign::build_group_splits(cfg, target);
  const dialign::EvalReport report = dialign::run_experiment(
      source, src, target, tgt, cfg.pipeline, lex, cfg.split_seed);

  std::ostringstream body;
  if (format == "md") {
    dialign::write_eval_markdown(report, body);
  } else {
    body << dialign::to_json(report).dump(2) << '\n';
  }
  write_text_file(out_path, body.str());
  std::cerr << "macro F1 " << dialign::format_double(report.result.macro_f1)
            << " (" << source << " to " << target << ")\n";
  finish(manifest, out_path);
  return 0;
}

int cmd_cross(const GlobalArgs& g, dialign::RunManifest& manifest,
              const std::string& config_path, const std::string& out_path,
              const std::string& format) {
  dialign::ExperimentConfig cfg = load_experiment(g, manifest, config_path);
  dialign::Lexicon lex = load_lexicon(g, cfg.lexicon_path, manifest);
  if (cfg.cells.empty())
    throw dialign::DataError(config_path + ": cross needs a \"cells\" list");
  const auto groups = dialign::build_all_groups(cfg);
  const dialign::CrossReport report =
      dialign::cross_matrix(groups, cfg.cells, cfg.pipeline, lex, cfg.split_seed);

  std::ostringstream body;
  if (format == "md") {
    dialign::write_cross_markdown(report, body);
  } else {
    body << dialign::to_json(report).dump(2) << '\n';
  }
  write_text_file(out_path, body.str());
  if (report.avg_transfer)
    std::cerr << "avg transfer macro F1 "
              << dialign::format_double(*report.avg_transfer) << '\n';
  finish(manifest, out_path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conversation accommodation analysis and bot detection"};
  app.require_subcommand(1);

  GlobalArgs g;
  app.add_option("--lexicon", g.lexicon_path,
                 "category dictionary (.dic); default data/core17.dic");
  auto* seed_opt =
      app.add_option("--seed", g.seed, "override the config's model/generator seed");
  app.add_option("--threads", g.threads,
                 "worker threads; never changes numerical results");

  std::string out_path, format = "json";
  std::string input, source_tag = "corpus", label = "human-human";
  std::string import_format;
  std::vector<std::string> align_inputs;
  std::string config_path, config_b_path;
  std::string source_group, target_group;

  auto add_out = [&](CLI::App* sub) {
    sub->add_option("--out", out_path, "output file")->required();
  };

  CLI::App* import_cmd =
      app.add_subcommand("import", "convert a raw corpus to canonical JSONL");
  import_cmd->add_option("--format", import_format, "dailydialog_text|convai2_json")
      ->required();
  import_cmd->add_option("--source-tag", source_tag, "id prefix and source field");
  import_cmd->add_option("--label", label, "human-human|human-bot");
  import_cmd->add_option("input", input, "raw corpus file")->required();
  add_out(import_cmd);

  CLI::App* align_cmd =
      app.add_subcommand("align", "accommodation profile of a corpus");
  align_cmd->add_option("inputs", align_inputs, "canonical JSONL files")
      ->required();
  align_cmd->add_option("--format", format, "json|csv|md")
      ->check(CLI::IsMember({"json", "csv", "md"}));
  add_out(align_cmd);

  CLI::App* synth_cmd =
      app.add_subcommand("synth", "generate a synthetic corpus");
  synth_cmd->add_option("--config", config_path, "generator config JSON")
      ->required();
  synth_cmd->add_option("--config-b", config_b_path,
                        "second config: emit a two-class benchmark");
  add_out(synth_cmd);

  CLI::App* train_cmd =
      app.add_subcommand("train", "fit a pipeline on one source group");
  train_cmd->add_option("--config", config_path, "experiment config JSON")
      ->required();
  train_cmd->add_option("--source", source_group, "source group name")->required();
  add_out(train_cmd);

  CLI::App* eval_cmd =
      app.add_subcommand("eval", "train on source, evaluate on target test split");
  eval_cmd->add_option("--config", config_path, "experiment config JSON")
      ->required();
  eval_cmd->add_option("--source", source_group, "source group name")->required();
  eval_cmd->add_option("--target", target_group, "target group name")->required();
  eval_cmd->add_option("--format", format, "json|md")
      ->check(CLI::IsMember({"json", "md"}));
  add_out(eval_cmd);

  CLI::App* cross_cmd =
      app.add_subcommand("cross", "run every (source, target) cell in the config");
  cross_cmd->add_option("--config", config_path, "experiment config JSON")
      ->required();
  cross_cmd->add_option("--format", format, "json|md")
      ->check(CLI::IsMember({"json", "md"}));
  add_out(cross_cmd);

  for (CLI::App* sub :
       {import_cmd, align_cmd, synth_cmd, train_cmd, eval_cmd, cross_cmd})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  g.seed_set = seed_opt->count() > 0;

  dialign::RunManifest manifest;
  manifest.command_line = join_args(argc, argv);
  manifest.seed = g.seed;
  manifest.threads = g.threads;

  try {
    if (import_cmd->parsed()) {
      manifest.subcommand = "import";
      return cmd_import(g, manifest, import_format, input, source_tag, label,
                        out_path);
    }
    if (align_cmd->parsed()) {
      manifest.subcommand = "align";
      return cmd_align(g, manifest, align_inputs, out_path, format);
    }
    if (synth_cmd->parsed()) {
      manifest.subcommand = "synth";
      return cmd_synth(g, manifest, config_path, config_b_path, out_path);
    }
    if (train_cmd->parsed()) {
      manifest.subcommand = "train";
      return cmd_train(g, manifest, config_path, source_group, out_path);
    }
    if (eval_cmd->parsed()) {
      manifest.subcommand = "eval";
      return cmd_eval(g, manifest, config_path, source_group, target_group,
                      out_path, format);
    }
    manifest.subcommand = "cross";
    return cmd_cross(g, manifest, config_path, out_path, format);
  } catch (const dialign::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
}
