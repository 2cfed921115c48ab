#pragma once

#include "gesturelab/encoder.hpp"
#include "gesturelab/tape.hpp"
#include "gesturelab/topology.hpp"

namespace gesturelab {

struct LossConfig {
  double temperature = 0.1;
  double w_keypoint = 1.0;
  double w_bone = 1.0;
  double w_motion = 1.0;

  void validate() const;
};

// Masked reconstruction composite. The keypoint term is the weighted squared
// error over masked tokens; the bone term compares adjacent-joint distances
// and the motion term frame-to-frame displacement magnitudes, both restricted
// to token pairs that are entirely masked (so the loss is zero exactly when
// the masked predictions match the truth). total = weighted mean of the three.
struct ReconParts {
  Var total, keypoint, bone, motion;
};

ReconParts reconstruction_loss(Tape& tape, Var pred, Var truth, const MaskSpec& spec,
                               const SkeletonTopology& topology,
                               const LossConfig& config = LossConfig{});

// Batch variant: per-sample specs over row-concatenated (b*T*J, 2) matrices;
// component sums are averaged over the batch.
ReconParts reconstruction_loss_batch(Tape& tape, Var pred, Var truth,
                                     const std::vector<MaskSpec>& specs,
                                     const SkeletonTopology& topology,
                                     const LossConfig& config = LossConfig{});

// Normalized temperature-scaled cross entropy over the pooled 2b views
// [anchors; positives], cosine similarity, self excluded, averaged over all
// 2b anchors. Requires b >= 2.
Var ntxent(Tape& tape, Var anchors, Var positives, double temperature);

// Symmetric in-batch cross entropy between matched rows of the two modality
// matrices, averaged over the 2b (anchor, direction) terms. b = 1 gives 0.
Var clip_loss(Tape& tape, Var gesture, Var verbal, double temperature);

// Alignment of the self-only and cross-attention-fused encodings of the same
// samples; identical in form to ntxent over (unimodal, fused) view pairs.
Var crossmodal_loss(Tape& tape, Var unimodal, Var fused, double temperature);

// Value-only conveniences for tests and diagnostics.
double ntxent_value(const Tensor& anchors, const Tensor& positives, double temperature);
double clip_loss_value(const Tensor& gesture, const Tensor& verbal, double temperature);

}  // namespace gesturelab
