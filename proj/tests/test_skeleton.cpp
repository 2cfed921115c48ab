#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "gesturelab/skeleton.hpp"
#include "gesturelab/topology.hpp"
#include "helpers.hpp"

using namespace gesturelab;

TEST_CASE("sequence basics and validation") {
  SkeletonSequence s = SkeletonSequence::zeros(4, 27, 25);
  CHECK(s.frames == 4);
  CHECK(s.duration_seconds() == doctest::Approx(0.16));
  s.validate();

  s.conf(1, 3) = 1.5;
  CHECK(gltest::thrown_kind([&] { s.validate(); }).has_value());
  s.conf(1, 3) = 0.5;
  s.validate();

  SkeletonSequence empty;
  CHECK(gltest::thrown_kind([&] { empty.validate(); }).has_value());
}

TEST_CASE("skeleton files round-trip through f32") {
  gltest::TempDir dir("skel");
  SkeletonSequence s = gltest::random_sequence(5, 27, 71, 30);
  save_skeleton(dir / "a.skel", s);
  SkeletonSequence back = load_skeleton(dir / "a.skel", 30);
  REQUIRE(back.frames == 5);
  REQUIRE(back.joint_count == 27);
  CHECK(back.fps == 30);
  for (int64_t t = 0; t < 5; ++t)
    for (int j = 0; j < 27; ++j) {
      CHECK(back.x(t, j) == doctest::Approx(s.x(t, j)).epsilon(1e-6));
      CHECK(back.conf(t, j) == doctest::Approx(s.conf(t, j)).epsilon(1e-6));
    }

  // Exact values survive when f32-representable.
  SkeletonSequence exact = SkeletonSequence::zeros(2, 27, 25);
  exact.x(1, 5) = 640.25;
  exact.conf(1, 5) = 0.5;
  save_skeleton(dir / "b.skel", exact);
  CHECK(load_skeleton(dir / "b.skel", 25).x(1, 5) == 640.25);
}

TEST_CASE("window extraction replicates edges") {
  SkeletonSequence s = SkeletonSequence::zeros(10, 27, 10);  // 1 second
  for (int64_t t = 0; t < 10; ++t) s.x(t, 0) = static_cast<double>(t);

  SkeletonSequence w = extract_window(s, 0.5, 0.4);
  CHECK(w.frames == 4);

  // A window centered at the very start replicates the first frame.
  SkeletonSequence left = extract_window(s, 0.0, 0.6);
  CHECK(left.frames == 6);
  CHECK(left.x(0, 0) == 0.0);
  CHECK(left.x(1, 0) == 0.0);

  SkeletonSequence right = extract_window(s, 1.0, 0.6);
  CHECK(right.x(5, 0) == 9.0);

  CHECK(gltest::thrown_kind([&] { extract_window(s, 2.0, 0.4); }).has_value());
  CHECK(gltest::thrown_kind([&] { extract_window(s, 0.5, 0.0); }).has_value());
}

TEST_CASE("oversampled window centers obey the overlap threshold") {
  // One gesture interval [1.0, 2.0]; 1-second windows on a 0.5 s stride.
  const auto centers = oversample_windows({{1.0, 2.0}}, 1.0, 0.5, 0.5);
  // Windows [0.75,1.75] and [1.25,2.25] overlap by 0.75; [0.25,1.25] and
  // [1.75,2.75] overlap by exactly 0.5 which is not strictly greater.
  REQUIRE(centers.size() >= 2);
  for (double c : centers) {
    const double overlap =
        std::min(c + 0.5, 2.0) - std::max(c - 0.5, 1.0);
    CHECK(overlap > 0.5);
  }
  CHECK(oversample_windows({}, 1.0, 0.5, 0.5).empty());
}

TEST_CASE("normalization centers the root and unit-scales the shoulder span") {
  const SkeletonTopology& topo = SkeletonTopology::upperbody27();
  SkeletonSequence s = gltest::random_sequence(5, 27, 72);
  NormalizeReport report;
  SkeletonSequence n = normalize_skeleton(s, topo, &report);
  CHECK_FALSE(report.degenerate_scale);

  // Root joint of the middle frame sits at the origin.
  CHECK(n.x(2, topo.root) == doctest::Approx(0.0));
  CHECK(n.y(2, topo.root) == doctest::Approx(0.0));

  // Median shoulder span is one unit.
  std::vector<double> spans;
  for (int64_t t = 0; t < n.frames; ++t)
    spans.push_back(std::hypot(n.x(t, topo.scale_pair[0]) - n.x(t, topo.scale_pair[1]),
                               n.y(t, topo.scale_pair[0]) - n.y(t, topo.scale_pair[1])));
  std::sort(spans.begin(), spans.end());
  CHECK(spans[2] == doctest::Approx(1.0));

  // Confidence is untouched; norm_scale records units per pixel.
  for (int64_t t = 0; t < 5; ++t)
    for (int j = 0; j < 27; ++j) CHECK(n.conf(t, j) == s.conf(t, j));
  CHECK(n.norm_scale > 0.0);

  // Degenerate scale: all joints coincide.
  SkeletonSequence flat = SkeletonSequence::zeros(3, 27);
  for (int64_t t = 0; t < 3; ++t)
    for (int j = 0; j < 27; ++j) flat.conf(t, j) = 1.0;
  NormalizeReport flat_report;
  normalize_skeleton(flat, topo, &flat_report);
  CHECK(flat_report.degenerate_scale);
}

TEST_CASE("augmentation is seeded and the disabled spec is the identity") {
  SkeletonSequence s = gltest::random_sequence(4, 27, 73);

  SkeletonSequence id = augment(s, AugmentSpec::disabled(), 5);
  CHECK(id.data == s.data);

  AugmentSpec spec;  // defaults: mirror + shift + scale + rotate + jitter + shear
  SkeletonSequence a1 = augment(s, spec, 99);
  SkeletonSequence a2 = augment(s, spec, 99);
  SkeletonSequence a3 = augment(s, spec, 100);
  CHECK(a1.data == a2.data);
  CHECK(a1.data != a3.data);

  // Confidence passes through any augmentation.
  for (int64_t t = 0; t < 4; ++t)
    for (int j = 0; j < 27; ++j) CHECK(a1.conf(t, j) == s.conf(t, j));

  // A mirror-only spec flips x about the bounding-box center on the seeds
  // where the coin lands true, and is the identity otherwise.
  AugmentSpec mirror_only = AugmentSpec::disabled();
  mirror_only.mirror = true;
  bool saw_flip = false, saw_identity = false;
  double min_x = s.x(0, 0), max_x = s.x(0, 0);
  for (int64_t t = 0; t < 4; ++t)
    for (int j = 0; j < 27; ++j) {
      min_x = std::min(min_x, s.x(t, j));
      max_x = std::max(max_x, s.x(t, j));
    }
  const double cx = 0.5 * (min_x + max_x);
  for (uint64_t seed = 0; seed < 12 && !(saw_flip && saw_identity); ++seed) {
    SkeletonSequence m = augment(s, mirror_only, seed);
    if (m.data == s.data) {
      saw_identity = true;
      continue;
    }
    saw_flip = true;
    for (int64_t t = 0; t < 4; ++t)
      for (int j = 0; j < 27; ++j) {
        CHECK(m.x(t, j) == doctest::Approx(2.0 * cx - s.x(t, j)));
        CHECK(m.y(t, j) == doctest::Approx(s.y(t, j)));
      }
  }
  CHECK(saw_flip);
  CHECK(saw_identity);

  AugmentSpec bad;
  bad.scale_min = 1.2;
  bad.scale_max = 0.8;
  CHECK(gltest::thrown_kind([&] { augment(s, bad, 1); }).has_value());
}

TEST_CASE("pixel jitter converts through norm_scale") {
  SkeletonSequence s = gltest::random_sequence(3, 27, 74);

  CHECK(add_gaussian_jitter(s, 0.0, 7).data == s.data);

  SkeletonSequence j1 = add_gaussian_jitter(s, 2.0, 7);
  SkeletonSequence j2 = add_gaussian_jitter(s, 2.0, 7);
  CHECK(j1.data == j2.data);

  // The same seed on a normalized sequence draws the same unit noise scaled
  // by norm_scale.
  const SkeletonTopology& topo = SkeletonTopology::upperbody27();
  SkeletonSequence n = normalize_skeleton(s, topo);
  SkeletonSequence nj = add_gaussian_jitter(n, 2.0, 7);
  const double scale = n.norm_scale;
  for (int64_t t = 0; t < 3; ++t)
    for (int j = 0; j < 27; ++j) {
      const double raw_dx = j1.x(t, j) - s.x(t, j);
      const double norm_dx = nj.x(t, j) - n.x(t, j);
      CHECK(norm_dx == doctest::Approx(raw_dx * scale).epsilon(1e-9));
    }
}

TEST_CASE("builtin topology matches the shipped data file") {
  const SkeletonTopology& builtin = SkeletonTopology::upperbody27();
  CHECK(builtin.joint_count == 27);
  CHECK(builtin.joint_names.size() == 27);
  CHECK_FALSE(builtin.edges.empty());
  for (auto [a, b] : builtin.edges) {
    CHECK(a >= 0);
    CHECK(b >= 0);
    CHECK(a < 27);
    CHECK(b < 27);
    CHECK(a != b);
  }

  const SkeletonTopology from_file =
      SkeletonTopology::from_json_file(std::filesystem::path(GL_TEST_DATA_DIR) /
                                       "skeleton27.json");
  CHECK(from_file.version == builtin.version);
  CHECK(from_file.joint_count == builtin.joint_count);
  CHECK(from_file.root == builtin.root);
  CHECK(from_file.scale_pair == builtin.scale_pair);
  CHECK(from_file.edges == builtin.edges);
  CHECK(from_file.joint_names == builtin.joint_names);
}
