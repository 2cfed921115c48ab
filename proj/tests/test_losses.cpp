#include <cmath>
#include <vector>

#include "doctest.h"
#include "gesturelab/losses.hpp"
#include "gesturelab/topology.hpp"
#include "helpers.hpp"

using namespace gesturelab;

namespace {

Tensor randn(Shape shape, uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  return Tensor::randn(std::move(shape), rng, sd);
}

double ntxent_v(const Tensor& a, const Tensor& p, double tau) {
  return ntxent_value(a, p, tau);
}

// Three joints in a chain; enough structure for bone and motion terms.
SkeletonTopology chain3() {
  SkeletonTopology topo;
  topo.version = "test-chain3";
  topo.joint_count = 3;
  topo.root = 0;
  topo.scale_pair = {0, 2};
  topo.edges = {{0, 1}, {1, 2}};
  topo.joint_names = {"a", "b", "c"};
  return topo;
}

MaskSpec spec_from_flags(int64_t frames, int joints, std::vector<uint8_t> flags,
                         std::vector<double> weights) {
  MaskSpec spec;
  spec.frames = frames;
  spec.joints = joints;
  spec.mask = std::move(flags);
  spec.weights = std::move(weights);
  return spec;
}

double recon_total(const Tensor& pred, const Tensor& truth, const MaskSpec& spec,
                   const SkeletonTopology& topo, const LossConfig& cfg = LossConfig{}) {
  Tape tape(false);
  return tape
      .value(reconstruction_loss(tape, tape.input(pred), tape.input(truth), spec, topo, cfg)
                 .total)
      .item();
}

}  // namespace

TEST_CASE("ntxent closed forms") {
  // Identical unit embeddings, b = 2: every candidate has similarity 1, so
  // the positive sits among 3 equally likely options.
  Tensor same = Tensor::from({2, 4}, {1, 0, 0, 0, 1, 0, 0, 0});
  CHECK(std::fabs(ntxent_v(same, same, 0.1) - std::log(3.0)) < 1e-5);

  // Orthogonal negatives at tau = 0.1: loss = log(1 + 2 e^{-10}).
  Tensor ortho = Tensor::from({2, 4}, {1, 0, 0, 0, 0, 1, 0, 0});
  const double want = std::log1p(2.0 * std::exp(-10.0));
  CHECK(std::fabs(ntxent_v(ortho, ortho, 0.1) - want) < 1e-7);

  // Large temperature: similarities stop mattering; uniform over 2b-1.
  Tensor a = randn({3, 5}, 11), p = randn({3, 5}, 12);
  CHECK(std::fabs(ntxent_v(a, p, 1e6) - std::log(5.0)) < 1e-5);

  CHECK(gltest::thrown_kind([&] { ntxent_v(Tensor::from({1, 2}, {1, 0}),
                                           Tensor::from({1, 2}, {1, 0}), 0.1); })
            .has_value());
}

TEST_CASE("clip closed forms") {
  // Identical rows across the batch: uniform softmax over b candidates.
  for (int64_t b : {2, 4, 7}) {
    Tensor g({b, 3});
    for (int64_t i = 0; i < b; ++i) {
      g.at(i, 0) = 0.3;
      g.at(i, 1) = -0.4;
      g.at(i, 2) = 0.85;
    }
    CHECK(std::fabs(clip_loss_value(g, g, 0.1) - std::log(static_cast<double>(b))) < 1e-5);
  }

  // Orthogonal pairs, b = 2: log(1 + e^{-10}) per direction.
  Tensor e = Tensor::from({2, 4}, {1, 0, 0, 0, 0, 1, 0, 0});
  CHECK(std::fabs(clip_loss_value(e, e, 0.1) - std::log1p(std::exp(-10.0))) < 1e-7);

  // Single pair: the only candidate is the match.
  Tensor one = Tensor::from({1, 3}, {1.0, 2.0, 3.0});
  CHECK(clip_loss_value(one, one, 0.1) == doctest::Approx(0.0));
}

TEST_CASE("contrastive invariances") {
  Tensor a = randn({4, 6}, 21), p = randn({4, 6}, 22);
  const double base = ntxent_v(a, p, 0.1);

  // Joint permutation of the pairs.
  const std::vector<int64_t> perm{2, 0, 3, 1};
  Tensor ap({4, 6}), pp({4, 6});
  for (int64_t i = 0; i < 4; ++i)
    for (int64_t j = 0; j < 6; ++j) {
      ap.at(i, j) = a.at(perm[static_cast<size_t>(i)], j);
      pp.at(i, j) = p.at(perm[static_cast<size_t>(i)], j);
    }
  CHECK(ntxent_v(ap, pp, 0.1) == doctest::Approx(base).epsilon(1e-9));

  // Per-row positive rescaling is removed by row normalization.
  Tensor as = a, ps = p;
  Rng rng(23);
  for (int64_t i = 0; i < 4; ++i) {
    const double ca = rng.uniform(0.2, 5.0), cp = rng.uniform(0.2, 5.0);
    for (int64_t j = 0; j < 6; ++j) {
      as.at(i, j) *= ca;
      ps.at(i, j) *= cp;
    }
  }
  CHECK(ntxent_v(as, ps, 0.1) == doctest::Approx(base).epsilon(1e-9));

  // The crossmodal alignment objective is ntxent over its two views.
  Tape tape(false);
  const double cm =
      tape.value(crossmodal_loss(tape, tape.input(a), tape.input(p), 0.1)).item();
  CHECK(cm == doctest::Approx(base).epsilon(1e-12));

  // clip symmetry: swapping the modalities leaves the loss unchanged.
  Tensor g = randn({5, 4}, 24), v = randn({5, 4}, 25);
  CHECK(clip_loss_value(g, v, 0.1) == doctest::Approx(clip_loss_value(v, g, 0.1)).epsilon(1e-12));
}

TEST_CASE("reconstruction zero at the truth and masked-only support") {
  const SkeletonTopology topo = chain3();
  // Frame 0: all joints masked; frame 1: only joint 1.
  MaskSpec spec = spec_from_flags(2, 3, {1, 1, 1, 0, 1, 0},
                                  {1.0, 0.5, 2.0, 1.0, 1.5, 1.0});
  Tensor truth = randn({6, 2}, 31);

  CHECK(recon_total(truth, truth, spec, topo) == 0.0);

  // Perturbing an unmasked token's prediction cannot change the loss.
  Tensor pred = randn({6, 2}, 32);
  const double base = recon_total(pred, truth, spec, topo);
  Tensor nudged = pred;
  nudged.at(3, 0) += 0.7;  // frame 1, joint 0: unmasked
  nudged.at(5, 1) -= 1.3;  // frame 1, joint 2: unmasked
  CHECK(recon_total(nudged, truth, spec, topo) == doctest::Approx(base).epsilon(1e-12));

  Tensor moved = pred;
  moved.at(1, 0) += 0.7;  // frame 0, joint 1: masked
  CHECK(recon_total(moved, truth, spec, topo) != doctest::Approx(base).epsilon(1e-9));
}

TEST_CASE("reconstruction matches a hand-rolled oracle") {
  const SkeletonTopology topo = chain3();
  MaskSpec spec = spec_from_flags(2, 3, {1, 1, 0, 1, 1, 0},
                                  {0.8, 1.2, 1.0, 0.6, 1.4, 1.0});
  Tensor pred = randn({6, 2}, 41);
  Tensor truth = randn({6, 2}, 42);
  LossConfig cfg;
  cfg.w_keypoint = 0.7;
  cfg.w_bone = 1.3;
  cfg.w_motion = 2.1;

  auto dist = [](const Tensor& m, int64_t r0, int64_t r1) {
    const double dx = m.at(r0, 0) - m.at(r1, 0);
    const double dy = m.at(r0, 1) - m.at(r1, 1);
    return std::sqrt(dx * dx + dy * dy);
  };

  // Keypoint: weighted squared error over masked tokens 0, 1, 3, 4.
  double kp = 0.0;
  for (int64_t r : {0, 1, 3, 4}) {
    const double w = spec.weights[static_cast<size_t>(r)];
    const double dx = pred.at(r, 0) - truth.at(r, 0);
    const double dy = pred.at(r, 1) - truth.at(r, 1);
    kp += w * (dx * dx + dy * dy);
  }
  // Bone: edge (0,1) is fully masked in both frames (rows 0-1 and 3-4).
  double bone = 0.0;
  for (auto [a, b] : {std::pair<int64_t, int64_t>{0, 1}, {3, 4}}) {
    const double gap = dist(pred, a, b) - dist(truth, a, b);
    bone += gap * gap;
  }
  // Motion: joints 0 and 1 are masked in both frames.
  double motion = 0.0;
  for (auto [a, b] : {std::pair<int64_t, int64_t>{3, 0}, {4, 1}}) {
    const double gap = dist(pred, a, b) - dist(truth, a, b);
    motion += gap * gap;
  }
  const double want = (cfg.w_keypoint * kp + cfg.w_bone * bone + cfg.w_motion * motion) / 3.0;

  Tape tape(false);
  const ReconParts parts = reconstruction_loss(tape, tape.input(pred), tape.input(truth),
                                               spec, topo, cfg);
  CHECK(tape.value(parts.keypoint).item() == doctest::Approx(kp).epsilon(1e-12));
  CHECK(tape.value(parts.bone).item() == doctest::Approx(bone).epsilon(1e-12));
  CHECK(tape.value(parts.motion).item() == doctest::Approx(motion).epsilon(1e-12));
  CHECK(tape.value(parts.total).item() == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("batched reconstruction averages per-sample sums") {
  const SkeletonTopology topo = chain3();
  MaskSpec s1 = spec_from_flags(2, 3, {1, 1, 0, 0, 1, 0}, {1, 1, 1, 1, 1, 1});
  MaskSpec s2 = spec_from_flags(1, 3, {1, 0, 1}, {2, 1, 0.5});

  Tensor pred = randn({9, 2}, 51);
  Tensor truth = randn({9, 2}, 52);

  Tensor p1({6, 2}), t1({6, 2}), p2({3, 2}), t2({3, 2});
  for (int64_t r = 0; r < 6; ++r)
    for (int64_t c = 0; c < 2; ++c) {
      p1.at(r, c) = pred.at(r, c);
      t1.at(r, c) = truth.at(r, c);
    }
  for (int64_t r = 0; r < 3; ++r)
    for (int64_t c = 0; c < 2; ++c) {
      p2.at(r, c) = pred.at(6 + r, c);
      t2.at(r, c) = truth.at(6 + r, c);
    }

  const double a = recon_total(p1, t1, s1, topo);
  const double b = recon_total(p2, t2, s2, topo);

  Tape tape(false);
  const double batched =
      tape.value(reconstruction_loss_batch(tape, tape.input(pred), tape.input(truth),
                                           {s1, s2}, topo)
                     .total)
          .item();
  CHECK(batched == doctest::Approx((a + b) / 2.0).epsilon(1e-12));
}

TEST_CASE("loss gradients pass finite-difference checks") {
  Rng pick(61);
  const double tol = 1e-3;

  gltest::LeafCheck nt{{randn({3, 5}, 62, 0.8), randn({3, 5}, 63, 0.8)},
                       [](Tape& t, const std::vector<Var>& v) {
                         return ntxent(t, v[0], v[1], 0.1);
                       }};
  CHECK(gltest::max_rel_err_leaf(nt, pick, 10) < tol);

  gltest::LeafCheck cl{{randn({4, 5}, 64, 0.8), randn({4, 5}, 65, 0.8)},
                       [](Tape& t, const std::vector<Var>& v) {
                         return clip_loss(t, v[0], v[1], 0.1);
                       }};
  CHECK(gltest::max_rel_err_leaf(cl, pick, 10) < tol);

  const SkeletonTopology topo = chain3();
  MaskSpec spec = spec_from_flags(2, 3, {1, 1, 0, 1, 1, 0}, {0.8, 1.2, 1.0, 0.6, 1.4, 1.0});
  gltest::LeafCheck rc{{randn({6, 2}, 66), randn({6, 2}, 67)},
                       [&](Tape& t, const std::vector<Var>& v) {
                         return reconstruction_loss(t, v[0], v[1], spec, topo).total;
                       }};
  CHECK(gltest::max_rel_err_leaf(rc, pick, 10) < tol);
}

TEST_CASE("loss config validation") {
  LossConfig bad;
  bad.temperature = 0.0;
  CHECK(gltest::thrown_kind([&] { bad.validate(); }).has_value());
  LossConfig neg;
  neg.w_bone = -1.0;
  CHECK(gltest::thrown_kind([&] { neg.validate(); }).has_value());
}
