#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gesturelab/pipeline.hpp"

namespace gesturelab {

// Checkpoint container: magic "GLCK", format version, a JSON header carrying
// the pipeline config, epoch, monitor value, optimizer scalars and the tensor
// directory, then float64 little-endian payloads. Doubles are stored exactly
// so a resumed run continues the same trajectory bit for bit.
struct CheckpointMeta {
  int epoch = 0;
  double monitor_rho = std::numeric_limits<double>::quiet_NaN();
};

void save_checkpoint(const std::filesystem::path& path, const TrainablePipeline& pipeline,
                     const Adam* optimizer, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  PipelineConfig config;
  CheckpointMeta meta;
  std::unique_ptr<TrainablePipeline> pipeline;

  // Present when the checkpoint was saved with optimizer state.
  bool has_optimizer = false;
  Adam::Config optimizer_config;
  int64_t optimizer_steps = 0;
  std::vector<Tensor> adam_m, adam_v;  // registry order

  // Copies the stored moments and step count into an optimizer built over
  // the restored pipeline's registry.
  void restore_optimizer(Adam& optimizer) const;
};

// Accepts either a container file or a best-reference record (resolved
// relative to the record's directory).
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// best.ckpt is a small JSON record pointing at the winning epoch file, a
// symlink equivalent that works on any filesystem.
void write_best_record(const std::filesystem::path& dir, int epoch, double monitor_rho,
                       const std::string& filename);
struct BestRecord {
  int epoch = 0;
  double monitor_rho = 0.0;
  std::string filename;
};
std::optional<BestRecord> read_best_record(const std::filesystem::path& dir);

std::string checkpoint_filename(int epoch);  // epoch-NNN.ckpt

}  // namespace gesturelab
