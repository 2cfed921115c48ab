#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "gesturelab/topology.hpp"

namespace gesturelab {

// T x J x 3 sequence of 2D keypoints (x px, y px, confidence in [0,1]).
// norm_scale records the units-per-pixel factor applied by normalization
// (0 while still in pixel space) so that pixel-denominated noise magnitudes
// can be converted for normalized sequences.
struct SkeletonSequence {
  int fps = 25;
  int64_t frames = 0;
  int joint_count = 27;
  std::vector<double> data;  // frames * joint_count * 3, row-major
  double norm_scale = 0.0;

  double& x(int64_t t, int j) { return data[idx(t, j)]; }
  double& y(int64_t t, int j) { return data[idx(t, j) + 1]; }
  double& conf(int64_t t, int j) { return data[idx(t, j) + 2]; }
  double x(int64_t t, int j) const { return data[idx(t, j)]; }
  double y(int64_t t, int j) const { return data[idx(t, j) + 1]; }
  double conf(int64_t t, int j) const { return data[idx(t, j) + 2]; }

  double duration_seconds() const {
    return static_cast<double>(frames) / static_cast<double>(fps);
  }

  static SkeletonSequence zeros(int64_t frames, int joint_count = 27, int fps = 25);
  void validate() const;  // invariants: J, conf range, T >= 1

 private:
  size_t idx(int64_t t, int j) const {
    return static_cast<size_t>((t * joint_count + j) * 3);
  }
};

SkeletonSequence load_skeleton(const std::filesystem::path& path, int fps);
void save_skeleton(const std::filesystem::path& path, const SkeletonSequence& seq);

// Fixed-length window centered on `center` seconds; out-of-range frames are
// edge-replicated so the frame count is always round(duration * fps).
SkeletonSequence extract_window(const SkeletonSequence& seq, double center_s,
                                double duration_s);

// Centers of all stride-spaced windows whose overlap with any gesture
// interval strictly exceeds threshold * window.
std::vector<double> oversample_windows(
    const std::vector<std::pair<double, double>>& gesture_intervals, double window_s,
    double stride_s, double overlap_threshold);

struct NormalizeReport {
  bool degenerate_scale = false;  // zero torso span; unit scale fallback used
};

// Root-centers on the middle frame's neck and scales so the median
// shoulder-span over the window is 1. Confidence untouched.
SkeletonSequence normalize_skeleton(const SkeletonSequence& seq,
                                    const SkeletonTopology& topology,
                                    NormalizeReport* report = nullptr);

struct AugmentSpec {
  bool mirror = true;
  double shift_max_fraction = 0.10;  // of the sequence bounding box
  double scale_min = 0.9, scale_max = 1.1;
  double rotation_min_deg = -15.0, rotation_max_deg = 15.0;
  double jitter_sigma_px = 1.0;
  double shear_min = -0.1, shear_max = 0.1;

  static AugmentSpec disabled();
  void validate() const;  // ranges well-ordered, jitter >= 0
};

// Applies the enabled transforms with parameters drawn deterministically from
// seed. Geometric transforms are composed about the sequence bounding-box
// center; jitter is added last. Confidence channel passes through unchanged.
SkeletonSequence augment(const SkeletonSequence& seq, const AugmentSpec& spec, uint64_t seed);

// I.i.d. Gaussian noise on x/y. sigma is in pixels; for normalized sequences
// it is converted through the recorded norm_scale.
SkeletonSequence add_gaussian_jitter(const SkeletonSequence& seq, double sigma_px,
                                     uint64_t seed);

}  // namespace gesturelab
