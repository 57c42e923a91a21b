#pragma once

#include <fstream>
#include <map>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dialign/corpus.hpp"
#include "dialign/error.hpp"
#include "dialign/eval.hpp"

namespace dialign {

// Experiment description as read from a JSON config file:
//   {
//     "lexicon": "data/core17.dic",
//     "split_seed": 13,
//     "sources": {"U": ["u.jsonl"], "C": ["c1.jsonl", "c2.jsonl"]},
//     "pipeline": {"features": "accommodation", "variant": "human",
//                  "model": "forest", "n_trees": 1000, "model_seed": 7},
//     "cells": [["U", "C"], ["C", "U"]]
//   }
// A source file listed under two groups is split once per file with the
// shared seed, so its dialogues land in the same train/validation/test
// membership everywhere.
struct ExperimentConfig {
  std::string lexicon_path;
  std::uint64_t split_seed = 13;
  std::map<std::string, std::vector<std::string>> sources;
  std::vector<std::pair<std::string, std::string>> cells;
  PipelineSpec pipeline;
};

inline PipelineSpec pipeline_from_json(const nlohmann::json& j,
                                       const std::string& origin) {
  PipelineSpec spec;
  try {
    spec.features = feature_family_from_string(j.at("features").get<std::string>());
    spec.variant = j.contains("variant")
                       ? variant_from_string(j["variant"].get<std::string>())
                       : Variant::HumanOnly;
    if (j.contains("model")) {
      spec.model = model_family_from_string(j["model"].get<std::string>());
    } else {
      spec.model =
          is_content_family(spec.features) ? ModelFamily::LogReg : ModelFamily::Forest;
    }
    if (j.contains("baseline"))
      spec.baseline = baseline_from_string(j["baseline"].get<std::string>());
    if (j.contains("allow_mismatched"))
      spec.allow_mismatched_pairing = j["allow_mismatched"].get<bool>();
    if (j.contains("embeddings"))
      spec.embeddings_path = j["embeddings"].get<std::string>();
    if (j.contains("n_trees")) spec.n_trees = j["n_trees"].get<std::size_t>();
    if (j.contains("model_seed"))
      spec.model_seed = j["model_seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(origin + ": bad pipeline section (" + e.what() + ")");
  }
  return spec;
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j,
                                                    const std::string& origin) {
  ExperimentConfig cfg;
  try {
    if (j.contains("lexicon")) cfg.lexicon_path = j["lexicon"].get<std::string>();
    if (j.contains("split_seed"))
      cfg.split_seed = j["split_seed"].get<std::uint64_t>();
    if (!j.contains("sources") || !j["sources"].is_object())
      throw DataError(origin + ": config needs a \"sources\" object");
    for (const auto& [group, files] : j["sources"].items()) {
      if (!files.is_array() || files.empty())
        throw DataError(origin + ": group \"" + group +
                        "\" must list at least one corpus file");
      cfg.sources[group] = files.get<std::vector<std::string>>();
    }
    if (!j.contains("pipeline"))
      throw DataError(origin + ": config needs a \"pipeline\" section");
    cfg.pipeline = pipeline_from_json(j["pipeline"], origin);
    if (j.contains("cells")) {
      for (const auto& cell : j["cells"]) {
        if (!cell.is_array() || cell.size() != 2)
          throw DataError(origin + ": each cell must be a [source, target] pair");
        cfg.cells.emplace_back(cell[0].get<std::string>(),
                               cell[1].get<std::string>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(origin + ": bad experiment config (" + e.what() + ")");
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open experiment config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": malformed JSON (" + e.what() + ")");
  }
  return experiment_config_from_json(j, path);
}

// Loads, normalizes and splits one group's source files. Dropped dialogue
// counts are summed into `dropped` when the caller wants to report them.
inline SplitSets build_group_splits(const ExperimentConfig& cfg,
                                    const std::string& group,
                                    std::size_t* dropped = nullptr) {
  auto it = cfg.sources.find(group);
  if (it == cfg.sources.end())
    throw DataError("config has no source group \"" + group + "\"");
  std::vector<CorpusSet> parts;
  for (const auto& path : it->second) {
    NormalizeResult nr = normalize_corpus(load_canonical_file(path));
    if (dropped) *dropped += nr.dropped;
    parts.push_back(std::move(nr.corpus));
  }
  SplitSets splits = split_grouped(parts, group, cfg.split_seed);
  // ids must also be unique across the three splits, or a dialogue could sit
  // in one source's train and another's test
  std::unordered_set<std::string> seen;
  for (const CorpusSet* c : {&splits.train, &splits.validation, &splits.test})
    for (const auto& d : c->dialogues)
      if (!seen.insert(d.id).second)
        throw DataError("group \"" + group + "\": dialogue id \"" + d.id +
                        "\" appears in more than one source file");
  return splits;
}

inline std::map<std::string, SplitSets> build_all_groups(const ExperimentConfig& cfg,
                                                         std::size_t* dropped = nullptr) {
  std::map<std::string, SplitSets> groups;
  for (const auto& [name, files] : cfg.sources)
    groups.emplace(name, build_group_splits(cfg, name, dropped));
  return groups;
}

}  // namespace dialign
