#include "run_io.hpp"

#include <algorithm>

#include "gesturelab/error.hpp"
#include "gesturelab/io.hpp"

namespace gesturelab::tools {

using nlohmann::json;

namespace {

[[noreturn]] void bad_field(const std::string& where, const std::string& key) {
  throw_error(ErrorKind::Config, "unknown config field " + where + "." + key);
}

void parse_synth(const json& j, SynthConfig& out) {
  check(j.is_object(), ErrorKind::Config, "config: synth must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "referents") out.referents = value.get<int>();
    else if (key == "samples_per_referent") out.samples_per_referent = value.get<int>();
    else if (key == "dialogues") out.dialogues = value.get<int>();
    else if (key == "rounds") out.rounds = value.get<int>();
    else if (key == "fps") out.fps = value.get<int>();
    else if (key == "frames") out.frames = value.get<int>();
    else if (key == "moving_joints") out.moving_joints = value.get<int>();
    else if (key == "motion_noise_px") out.motion_noise_px = value.get<double>();
    else if (key == "semantic_informativeness") out.semantic_informativeness = value.get<double>();
    else if (key == "drift_px") out.drift_px = value.get<double>();
    else if (key == "nuisance_phase") out.nuisance_phase = value.get<double>();
    else if (key == "nuisance_amp") out.nuisance_amp = value.get<double>();
    else if (key == "nuisance_speed") out.nuisance_speed = value.get<double>();
    else if (key == "semantic_dim") out.semantic_dim = value.get<int>();
    else if (key == "pairs_per_referent") out.pairs_per_referent = value.get<int>();
    else if (key == "seed") out.seed = value.get<uint64_t>();
    else bad_field("synth", key);
  }
}

void parse_resolver(const json& j, ResolverConfig& out) {
  check(j.is_object(), ErrorKind::Config, "config: resolver must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "hidden1") out.hidden1 = value.get<int>();
    else if (key == "hidden2") out.hidden2 = value.get<int>();
    else if (key == "batch_size") out.batch_size = value.get<int>();
    else if (key == "learning_rate") out.learning_rate = value.get<double>();
    else if (key == "epochs") out.epochs = value.get<int>();
    else bad_field("resolver", key);
  }
}

}  // namespace

std::filesystem::path RunConfig::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  if (p.is_absolute() || config_dir.empty()) return p;
  return config_dir / p;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig cfg;
  if (path.empty()) return cfg;
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw_error(ErrorKind::Config, "config " + path.string() + ": " + e.what());
  }
  check(j.is_object(), ErrorKind::Config, "config root must be an object");
  cfg.config_dir = path.parent_path();
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "data") cfg.data = value.get<std::string>();
      else if (key == "out") cfg.out = value.get<std::string>();
      else if (key == "seed") cfg.seed = value.get<uint64_t>();
      else if (key == "checkpoint") cfg.checkpoint = value.get<std::string>();
      else if (key == "embeddings") cfg.embeddings = value.get<std::string>();
      else if (key == "sigmas") cfg.sigmas = value.get<std::vector<double>>();
      else if (key == "clock") cfg.clock = value.get<std::string>();
      else if (key == "pipeline") cfg.pipeline = value;
      else if (key == "synth") parse_synth(value, cfg.synth);
      else if (key == "resolver") parse_resolver(value, cfg.resolver);
      else bad_field("config", key);
    }
  } catch (const json::exception& e) {
    throw_error(ErrorKind::Config, "config " + path.string() + ": " + e.what());
  }
  check(cfg.clock == "real" || cfg.clock == "zero", ErrorKind::Config,
        "config: clock must be \"real\" or \"zero\"");
  return cfg;
}

RunOutput::RunOutput(std::filesystem::path dir, json config_echo, uint64_t seed)
    : dir_(std::move(dir)), config_echo_(std::move(config_echo)), seed_(seed) {
  check_arg(!dir_.empty(), "--out directory is required");
  std::filesystem::create_directories(dir_);
}

void RunOutput::write_text(const std::string& relative, const std::string& content) {
  write_text_file(dir_ / relative, content);
}

void RunOutput::finalize() {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir_)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), dir_);
    if (rel == "files.json") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());

  json listing = json::array();
  for (const auto& rel : files) {
    json f;
    f["path"] = rel.generic_string();
    f["fnv1a"] = fnv1a_hex(read_text_file(dir_ / rel));
    listing.push_back(std::move(f));
  }
  json root;
  root["seed"] = seed_;
  root["config"] = config_echo_;
  root["files"] = std::move(listing);
  write_text_file(dir_ / "files.json", root.dump(2) + "\n");
}

}  // namespace gesturelab::tools
