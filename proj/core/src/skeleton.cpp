#include "gesturelab/skeleton.hpp"

#include <algorithm>
#include <cmath>

#include "gesturelab/error.hpp"
#include "gesturelab/io.hpp"
#include "gesturelab/rng.hpp"

namespace gesturelab {

SkeletonSequence SkeletonSequence::zeros(int64_t frames, int joint_count, int fps) {
  SkeletonSequence s;
  s.fps = fps;
  s.frames = frames;
  s.joint_count = joint_count;
  s.data.assign(static_cast<size_t>(frames * joint_count * 3), 0.0);
  return s;
}

void SkeletonSequence::validate() const {
  check_arg(frames >= 1, "skeleton sequence must have at least one frame");
  check_arg(fps >= 1, "fps must be positive");
  check_arg(joint_count >= 1, "joint count must be positive");
  check_arg(data.size() == static_cast<size_t>(frames * joint_count * 3),
            "skeleton data size does not match frames*joints*3");
  for (int64_t t = 0; t < frames; ++t)
    for (int j = 0; j < joint_count; ++j) {
      double c = conf(t, j);
      check(c >= 0.0 && c <= 1.0, ErrorKind::Integrity,
            "confidence out of [0,1] at frame " + std::to_string(t) + " joint " +
                std::to_string(j));
    }
}

SkeletonSequence load_skeleton(const std::filesystem::path& path, int fps) {
  ArrayFile a = load_array(path);
  check(a.shape.size() == 3 && a.shape[2] == 3, ErrorKind::Integrity,
        "skeleton array must have shape (T, J, 3): " + path.string());
  SkeletonSequence s;
  s.fps = fps;
  s.frames = a.shape[0];
  s.joint_count = static_cast<int>(a.shape[1]);
  s.data.assign(a.data.begin(), a.data.end());
  s.validate();
  return s;
}

void save_skeleton(const std::filesystem::path& path, const SkeletonSequence& seq) {
  ArrayFile a;
  a.shape = {seq.frames, seq.joint_count, 3};
  a.data.assign(seq.data.begin(), seq.data.end());
  save_array(path, a);
}

SkeletonSequence extract_window(const SkeletonSequence& seq, double center_s,
                                double duration_s) {
  check_arg(duration_s > 0.0, "window duration must be positive");
  check_arg(center_s >= 0.0 && center_s <= seq.duration_seconds(),
            "window center outside the sequence");
  int64_t t_out = llround(duration_s * seq.fps);
  check_arg(t_out >= 1, "window shorter than one frame");
  int64_t start = llround(center_s * seq.fps - (static_cast<double>(t_out) - 1.0) / 2.0);
  SkeletonSequence out = SkeletonSequence::zeros(t_out, seq.joint_count, seq.fps);
  out.norm_scale = seq.norm_scale;
  size_t frame_bytes = static_cast<size_t>(seq.joint_count) * 3;
  for (int64_t i = 0; i < t_out; ++i) {
    int64_t src = std::clamp(start + i, int64_t{0}, seq.frames - 1);  // edge replication
    std::copy_n(seq.data.begin() + static_cast<int64_t>(frame_bytes) * src, frame_bytes,
                out.data.begin() + static_cast<int64_t>(frame_bytes) * i);
  }
  return out;
}

std::vector<double> oversample_windows(
    const std::vector<std::pair<double, double>>& gesture_intervals, double window_s,
    double stride_s, double overlap_threshold) {
  check_arg(window_s > 0.0, "window must be positive");
  check_arg(stride_s > 0.0, "stride must be positive");
  check_arg(overlap_threshold > 0.0 && overlap_threshold <= 1.0,
            "overlap threshold must be in (0, 1]");
  std::vector<double> centers;
  if (gesture_intervals.empty()) return centers;
  double max_end = 0.0;
  for (auto [s, e] : gesture_intervals) {
    check_arg(e >= s, "gesture interval end before start");
    max_end = std::max(max_end, e);
  }
  double needed = overlap_threshold * window_s;
  // Stride-aligned candidate centers from the first full window onward; any
  // window starting past the last gesture end cannot overlap.
  for (int64_t i = 0;; ++i) {
    double c = window_s / 2.0 + static_cast<double>(i) * stride_s;
    double lo = c - window_s / 2.0;
    double hi = c + window_s / 2.0;
    if (lo > max_end) break;
    double overlap = 0.0;
    for (auto [s, e] : gesture_intervals)
      overlap = std::max(overlap, std::min(hi, e) - std::max(lo, s));
    if (overlap > needed) centers.push_back(c);
  }
  return centers;
}

namespace {

struct Bounds {
  double cx, cy, w, h;
};

Bounds bounding_box(const SkeletonSequence& seq) {
  double min_x = seq.x(0, 0), max_x = min_x;
  double min_y = seq.y(0, 0), max_y = min_y;
  for (int64_t t = 0; t < seq.frames; ++t)
    for (int j = 0; j < seq.joint_count; ++j) {
      min_x = std::min(min_x, seq.x(t, j));
      max_x = std::max(max_x, seq.x(t, j));
      min_y = std::min(min_y, seq.y(t, j));
      max_y = std::max(max_y, seq.y(t, j));
    }
  return {(min_x + max_x) / 2.0, (min_y + max_y) / 2.0, max_x - min_x, max_y - min_y};
}

}  // namespace

SkeletonSequence normalize_skeleton(const SkeletonSequence& seq,
                                    const SkeletonTopology& topology,
                                    NormalizeReport* report) {
  seq.validate();
  check_arg(seq.joint_count == topology.joint_count,
            "topology joint count does not match sequence");
  int64_t mid = seq.frames / 2;
  double ox = seq.x(mid, topology.root);
  double oy = seq.y(mid, topology.root);

  std::vector<double> spans(static_cast<size_t>(seq.frames));
  for (int64_t t = 0; t < seq.frames; ++t) {
    double dx = seq.x(t, topology.scale_pair[0]) - seq.x(t, topology.scale_pair[1]);
    double dy = seq.y(t, topology.scale_pair[0]) - seq.y(t, topology.scale_pair[1]);
    spans[static_cast<size_t>(t)] = std::hypot(dx, dy);
  }
  std::sort(spans.begin(), spans.end());
  double median = seq.frames % 2 == 1
                      ? spans[static_cast<size_t>(seq.frames / 2)]
                      : 0.5 * (spans[static_cast<size_t>(seq.frames / 2 - 1)] +
                               spans[static_cast<size_t>(seq.frames / 2)]);
  bool degenerate = !(median > 1e-9);
  if (report) report->degenerate_scale = degenerate;

  SkeletonSequence out = seq;
  for (int64_t t = 0; t < out.frames; ++t)
    for (int j = 0; j < out.joint_count; ++j) {
      double nx = out.x(t, j) - ox;
      double ny = out.y(t, j) - oy;
      // Dividing (not multiplying by a reciprocal) keeps idempotence tight.
      out.x(t, j) = degenerate ? nx : nx / median;
      out.y(t, j) = degenerate ? ny : ny / median;
    }
  double applied = degenerate ? 1.0 : 1.0 / median;
  out.norm_scale = seq.norm_scale > 0.0 ? seq.norm_scale * applied : applied;
  return out;
}

AugmentSpec AugmentSpec::disabled() {
  AugmentSpec s;
  s.mirror = false;
  s.shift_max_fraction = 0.0;
  s.scale_min = s.scale_max = 1.0;
  s.rotation_min_deg = s.rotation_max_deg = 0.0;
  s.jitter_sigma_px = 0.0;
  s.shear_min = s.shear_max = 0.0;
  return s;
}

void AugmentSpec::validate() const {
  check_arg(shift_max_fraction >= 0.0, "shift fraction must be >= 0");
  check_arg(scale_min <= scale_max && scale_min > 0.0, "scale range must be well-ordered");
  check_arg(rotation_min_deg <= rotation_max_deg, "rotation range must be well-ordered");
  check_arg(jitter_sigma_px >= 0.0, "jitter sigma must be >= 0");
  check_arg(shear_min <= shear_max, "shear range must be well-ordered");
}

SkeletonSequence augment(const SkeletonSequence& seq, const AugmentSpec& spec, uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  Bounds bb = bounding_box(seq);
  double unit_w = bb.w > 0.0 ? bb.w : (bb.h > 0.0 ? bb.h : 1.0);
  double unit_h = bb.h > 0.0 ? bb.h : unit_w;

  // Fixed draw order: mirror, shift, scale, rotation, shear, then jitter.
  bool do_mirror = spec.mirror && rng.coin(0.5);
  double dx = 0.0, dy = 0.0;
  if (spec.shift_max_fraction > 0.0) {
    dx = rng.uniform(-spec.shift_max_fraction, spec.shift_max_fraction) * unit_w;
    dy = rng.uniform(-spec.shift_max_fraction, spec.shift_max_fraction) * unit_h;
  }
  double s = spec.scale_min == spec.scale_max ? spec.scale_min
                                              : rng.uniform(spec.scale_min, spec.scale_max);
  double theta = spec.rotation_min_deg == spec.rotation_max_deg
                     ? spec.rotation_min_deg
                     : rng.uniform(spec.rotation_min_deg, spec.rotation_max_deg);
  theta *= M_PI / 180.0;
  double shear = spec.shear_min == spec.shear_max
                     ? spec.shear_min
                     : rng.uniform(spec.shear_min, spec.shear_max);

  // Affine applied about the bounding-box center, composed in the fixed
  // order mirror -> scale -> rotate -> shear: p' = H * R * (s * M) * p.
  double ms = do_mirror ? -1.0 : 1.0;
  double ct = std::cos(theta), st = std::sin(theta);
  double a = s * ms * (ct + shear * st);
  double b = s * (shear * ct - st);
  double c = s * ms * st;
  double d = s * ct;

  double sigma = spec.jitter_sigma_px;
  if (sigma > 0.0 && seq.norm_scale > 0.0) sigma *= seq.norm_scale;

  SkeletonSequence out = seq;
  for (int64_t t = 0; t < out.frames; ++t)
    for (int j = 0; j < out.joint_count; ++j) {
      double px = seq.x(t, j) - bb.cx;
      double py = seq.y(t, j) - bb.cy;
      out.x(t, j) = a * px + b * py + bb.cx + dx;
      out.y(t, j) = c * px + d * py + bb.cy + dy;
    }
  if (sigma > 0.0) {
    for (int64_t t = 0; t < out.frames; ++t)
      for (int j = 0; j < out.joint_count; ++j) {
        out.x(t, j) += rng.gaussian(0.0, sigma);
        out.y(t, j) += rng.gaussian(0.0, sigma);
      }
  }
  return out;
}

SkeletonSequence add_gaussian_jitter(const SkeletonSequence& seq, double sigma_px,
                                     uint64_t seed) {
  check_arg(sigma_px >= 0.0, "jitter sigma must be >= 0");
  if (sigma_px == 0.0) return seq;
  double sigma = seq.norm_scale > 0.0 ? sigma_px * seq.norm_scale : sigma_px;
  Rng rng(seed);
  SkeletonSequence out = seq;
  for (int64_t t = 0; t < out.frames; ++t)
    for (int j = 0; j < out.joint_count; ++j) {
      out.x(t, j) += rng.gaussian(0.0, sigma);
      out.y(t, j) += rng.gaussian(0.0, sigma);
    }
  return out;
}

}  // namespace gesturelab
