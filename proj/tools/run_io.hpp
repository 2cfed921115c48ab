#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gesturelab/resolver.hpp"
#include "gesturelab/synth.hpp"

namespace gesturelab::tools {

// One config file per run; command-line flags override individual fields.
// Unknown keys are rejected so typos surface as exit-status-2 diagnostics.
struct RunConfig {
  std::filesystem::path config_dir;  // for resolving relative paths
  std::optional<std::string> data;   // dataset manifest path
  std::optional<std::string> out;
  std::optional<uint64_t> seed;
  std::optional<std::string> checkpoint;
  std::optional<std::string> embeddings;  // embedding-store directory
  std::vector<double> sigmas{0.0, 0.2, 1.0, 15.0};
  std::string clock = "real";  // "real" | "zero" (reproducible metrics)
  nlohmann::json pipeline;     // forwarded to pipeline_config_from_json
  SynthConfig synth;
  ResolverConfig resolver;

  std::filesystem::path resolve(const std::string& path) const;
};

RunConfig load_run_config(const std::filesystem::path& path);  // "" -> defaults

// Collects everything a command writes under its --out directory and ends the
// run with files.json: the echoed config, the seed, and a content hash per
// produced file (sorted paths, deterministic formatting).
class RunOutput {
 public:
  RunOutput(std::filesystem::path dir, nlohmann::json config_echo, uint64_t seed);

  const std::filesystem::path& dir() const { return dir_; }
  void write_text(const std::string& relative, const std::string& content);
  void finalize();  // scans dir_, writes files.json

 private:
  std::filesystem::path dir_;
  nlohmann::json config_echo_;
  uint64_t seed_;
};

}  // namespace gesturelab::tools
