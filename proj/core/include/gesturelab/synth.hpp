#pragma once

#include <cstdint>
#include <filesystem>

#include "gesturelab/dataset.hpp"

namespace gesturelab {

// Synthetic corpus with planted structure: each referent owns a sinusoidal
// joint-trajectory prototype, each (dialogue, referent) pair drifts away from
// it a little more every round, and the verbal features encode the referent
// with a configurable reliability. Everything is deterministic under seed.
struct SynthConfig {
  int referents = 10;  // K
  int samples_per_referent = 200;
  int dialogues = 4;
  int rounds = 6;
  int fps = 25;
  int frames = 25;        // 1-second windows
  int moving_joints = 8;  // trailing joints carry the identity motion
  double motion_noise_px = 2.0;            // per-coordinate Gaussian noise
  double semantic_informativeness = 0.9;   // p_s: P(verbal encodes the referent)
  double drift_px = 0.0;                   // per-dialogue drift at the final round
  double nuisance_phase = 0.3;             // per-sample phase shift bound (rad)
  double nuisance_amp = 0.1;               // per-sample amplitude scale spread
  double nuisance_speed = 0.05;            // per-sample frequency scale spread
  int semantic_dim = 768;
  int pairs_per_referent = 8;  // form-similarity pairs drawn per referent
  uint64_t seed = 0;

  void validate() const;
};

// Writes manifest.json, skeletons/, and a semantic feature store under
// out_dir, then reloads the manifest (so the returned value has passed the
// full schema/integrity validation).
DatasetManifest generate_corpus(const SynthConfig& config,
                                const std::filesystem::path& out_dir);

struct AccuracyBounds {
  double gesture_ceiling = 0.0;   // nearest generating prototype, Monte Carlo
  double semantic_ceiling = 0.0;  // p_s + (1 - p_s) / K
};

AccuracyBounds oracle_accuracy_bounds(const SynthConfig& config);

}  // namespace gesturelab
