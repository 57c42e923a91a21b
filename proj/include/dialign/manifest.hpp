#pragma once

#include <ctime>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dialign/error.hpp"
#include "dialign/hash.hpp"
#include "dialign/version.hpp"

namespace dialign {

// Provenance sidecar written next to every CLI output. This is the only
// artifact that carries a wall-clock timestamp; result files must be
// byte-identical across reruns.
struct RunManifest {
  std::string command_line;
  std::string subcommand;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, content hash
  std::vector<std::pair<std::string, std::string>> outputs;
};

inline std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void add_input(RunManifest& m, const std::string& path) {
  m.inputs.emplace_back(path, hash_file(path));
}

inline void add_output(RunManifest& m, const std::string& path) {
  m.outputs.emplace_back(path, hash_file(path));
}

inline nlohmann::json to_json(const RunManifest& m) {
  nlohmann::json j;
  j["version"] = kFormatVersion;
  j["tool_version"] = kVersion;
  j["timestamp_utc"] = utc_timestamp();
  j["command_line"] = m.command_line;
  j["subcommand"] = m.subcommand;
  j["seed"] = m.seed;
  j["threads"] = m.threads;
  auto files = [](const std::vector<std::pair<std::string, std::string>>& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [path, digest] : v)
      arr.push_back({{"path", path}, {"fnv1a64", digest}});
    return arr;
  };
  j["inputs"] = files(m.inputs);
  j["outputs"] = files(m.outputs);
  return j;
}

inline void write_manifest_file(const std::string& path, const RunManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << to_json(m).dump(2) << '\n';
}

}  // namespace dialign
