#include "gesturelab/losses.hpp"

#include <cmath>
#include <utility>
#include <vector>

#include "gesturelab/error.hpp"

namespace gesturelab {

void LossConfig::validate() const {
  check_config(temperature > 0.0, "loss config: temperature must be positive");
  check_config(w_keypoint >= 0.0 && w_bone >= 0.0 && w_motion >= 0.0,
               "loss config: negative component weight");
}

namespace {

Var zero_scalar(Tape& tape) { return tape.input(Tensor::scalar(0.0)); }

// Sum of (|pred pair distance| - |truth pair distance|)^2 over the pairs.
Var distance_gap(Tape& tape, Var pred, Var truth,
                 std::vector<std::pair<int64_t, int64_t>> pairs) {
  if (pairs.empty()) return zero_scalar(tape);
  Var dp = tape.pair_distance(pred, pairs);
  Var dt = tape.pair_distance(truth, std::move(pairs));
  Var gap = tape.sub(dp, dt);
  return tape.sum_all(tape.mul(gap, gap));
}

ReconParts reconstruction_terms(Tape& tape, Var pred, Var truth, const MaskSpec& spec,
                                const SkeletonTopology& topology, int64_t row0) {
  const int64_t frames = spec.frames;
  const int joints = spec.joints;

  std::vector<int64_t> masked_rows;
  std::vector<double> masked_weights;
  for (int64_t t = 0; t < frames; ++t)
    for (int j = 0; j < joints; ++j)
      if (spec.masked(t, j)) {
        masked_rows.push_back(row0 + t * joints + j);
        masked_weights.push_back(spec.weights[static_cast<size_t>(t * joints + j)]);
      }

  ReconParts parts;
  if (masked_rows.empty()) {
    parts.keypoint = zero_scalar(tape);
  } else {
    Var diff = tape.sub(tape.gather_rows(pred, masked_rows),
                        tape.gather_rows(truth, std::move(masked_rows)));
    Var sq = tape.row_sum(tape.mul(diff, diff));
    parts.keypoint = tape.dot_const(
        sq, Tensor::from({static_cast<int64_t>(masked_weights.size())}, masked_weights));
  }

  std::vector<std::pair<int64_t, int64_t>> bone_pairs;
  for (int64_t t = 0; t < frames; ++t)
    for (const auto& [a, b] : topology.edges)
      if (spec.masked(t, a) && spec.masked(t, b))
        bone_pairs.emplace_back(row0 + t * joints + a, row0 + t * joints + b);
  parts.bone = distance_gap(tape, pred, truth, std::move(bone_pairs));

  std::vector<std::pair<int64_t, int64_t>> motion_pairs;
  for (int64_t t = 1; t < frames; ++t)
    for (int j = 0; j < joints; ++j)
      if (spec.masked(t, j) && spec.masked(t - 1, j))
        motion_pairs.emplace_back(row0 + t * joints + j, row0 + (t - 1) * joints + j);
  parts.motion = distance_gap(tape, pred, truth, std::move(motion_pairs));

  return parts;
}

ReconParts finish_recon(Tape& tape, ReconParts parts, const LossConfig& config) {
  Var weighted = tape.add(tape.scale(parts.keypoint, config.w_keypoint),
                          tape.add(tape.scale(parts.bone, config.w_bone),
                                   tape.scale(parts.motion, config.w_motion)));
  parts.total = tape.scale(weighted, 1.0 / 3.0);
  return parts;
}

void check_recon_shapes(const Tape& tape, Var pred, Var truth, int64_t rows) {
  const Tensor& pv = tape.value(pred);
  const Tensor& tv = tape.value(truth);
  check_arg(pv.rank() == 2 && pv.size(1) == 2, "reconstruction: pred must be (rows, 2)");
  check_arg(tv.same_shape(pv), "reconstruction: pred/truth shape mismatch");
  check_arg(pv.size(0) == rows, "reconstruction: rows do not match the mask spec");
}

// Similarity logits over the pooled [a; b] views with the diagonal removed,
// then the mean positive-pair cross entropy. Shared by ntxent and clip.
Var view_pool_loss(Tape& tape, Var anchors, Var positives, double temperature) {
  const Tensor& av = tape.value(anchors);
  const int64_t b = av.size(0);
  Var z = tape.normalize_rows(tape.concat_rows({anchors, positives}));
  Var s = tape.mask_diag(tape.scale(tape.matmul_nt(z, z), 1.0 / temperature), -1e30);
  Var logp = tape.log_softmax_rows(s);
  std::vector<std::pair<int64_t, int64_t>> pos;
  pos.reserve(static_cast<size_t>(2 * b));
  for (int64_t i = 0; i < b; ++i) pos.emplace_back(i, i + b);
  for (int64_t i = 0; i < b; ++i) pos.emplace_back(i + b, i);
  return tape.scale(tape.mean_all(tape.take_elements(logp, std::move(pos))), -1.0);
}

}  // namespace

ReconParts reconstruction_loss(Tape& tape, Var pred, Var truth, const MaskSpec& spec,
                               const SkeletonTopology& topology, const LossConfig& config) {
  config.validate();
  spec.validate();
  check_arg(spec.joints == topology.joint_count, "reconstruction: topology joint count mismatch");
  check_recon_shapes(tape, pred, truth, spec.frames * spec.joints);
  return finish_recon(tape, reconstruction_terms(tape, pred, truth, spec, topology, 0), config);
}

ReconParts reconstruction_loss_batch(Tape& tape, Var pred, Var truth,
                                     const std::vector<MaskSpec>& specs,
                                     const SkeletonTopology& topology,
                                     const LossConfig& config) {
  config.validate();
  check_arg(!specs.empty(), "reconstruction: empty batch");
  int64_t rows = 0;
  for (const MaskSpec& spec : specs) {
    spec.validate();
    check_arg(spec.joints == topology.joint_count,
              "reconstruction: topology joint count mismatch");
    rows += spec.frames * spec.joints;
  }
  check_recon_shapes(tape, pred, truth, rows);
  ReconParts sum;
  sum.keypoint = zero_scalar(tape);
  sum.bone = zero_scalar(tape);
  sum.motion = zero_scalar(tape);
  int64_t row0 = 0;
  for (const MaskSpec& spec : specs) {
    ReconParts p = reconstruction_terms(tape, pred, truth, spec, topology, row0);
    sum.keypoint = tape.add(sum.keypoint, p.keypoint);
    sum.bone = tape.add(sum.bone, p.bone);
    sum.motion = tape.add(sum.motion, p.motion);
    row0 += spec.frames * spec.joints;
  }
  const double inv_b = 1.0 / static_cast<double>(specs.size());
  sum.keypoint = tape.scale(sum.keypoint, inv_b);
  sum.bone = tape.scale(sum.bone, inv_b);
  sum.motion = tape.scale(sum.motion, inv_b);
  return finish_recon(tape, sum, config);
}

Var ntxent(Tape& tape, Var anchors, Var positives, double temperature) {
  check_arg(temperature > 0.0, "ntxent: temperature must be positive");
  const Tensor& av = tape.value(anchors);
  const Tensor& pv = tape.value(positives);
  check_arg(av.rank() == 2 && pv.same_shape(av), "ntxent: views must be equal-shape matrices");
  check_arg(av.size(0) >= 2, "ntxent: batch must have at least 2 pairs");
  return view_pool_loss(tape, anchors, positives, temperature);
}

Var clip_loss(Tape& tape, Var gesture, Var verbal, double temperature) {
  check_arg(temperature > 0.0, "clip: temperature must be positive");
  const Tensor& gv = tape.value(gesture);
  const Tensor& vv = tape.value(verbal);
  check_arg(gv.rank() == 2 && vv.same_shape(gv), "clip: modalities must be equal-shape matrices");
  check_arg(gv.size(0) >= 1, "clip: empty batch");
  const int64_t b = gv.size(0);
  Var g = tape.normalize_rows(gesture);
  Var v = tape.normalize_rows(verbal);
  Var s = tape.scale(tape.matmul_nt(g, v), 1.0 / temperature);
  Var fwd = tape.take_diag(tape.log_softmax_rows(s));
  Var bwd = tape.take_diag(tape.log_softmax_rows(tape.transpose(s)));
  Var total = tape.add(tape.sum_all(fwd), tape.sum_all(bwd));
  return tape.scale(total, -1.0 / static_cast<double>(2 * b));
}

Var crossmodal_loss(Tape& tape, Var unimodal, Var fused, double temperature) {
  return ntxent(tape, unimodal, fused, temperature);
}

double ntxent_value(const Tensor& anchors, const Tensor& positives, double temperature) {
  Tape tape(false);
  return tape.value(ntxent(tape, tape.input(anchors), tape.input(positives), temperature)).item();
}

double clip_loss_value(const Tensor& gesture, const Tensor& verbal, double temperature) {
  Tape tape(false);
  return tape.value(clip_loss(tape, tape.input(gesture), tape.input(verbal), temperature)).item();
}

}  // namespace gesturelab
