#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "gesturelab/params.hpp"
#include "gesturelab/tape.hpp"
#include "gesturelab/tensor.hpp"
#include "helpers.hpp"

using namespace gesturelab;
using gltest::LeafCheck;

namespace {

Tensor randn(Shape shape, uint64_t seed, double sd = 1.0) {
  Rng rng(seed);
  return Tensor::randn(std::move(shape), rng, sd);
}

// Scalarizes an op output against a fixed random weighting so every output
// element influences the root.
Var pin(Tape& t, Var x, uint64_t seed) {
  Rng rng(seed);
  return t.dot_const(x, Tensor::randn(t.value(x).shape(), rng));
}

}  // namespace

TEST_CASE("tensor basics") {
  Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.at(1, 2) == 6.0);
  CHECK(t.reshaped({3, 2}).at(2, 1) == 6.0);
  CHECK(Tensor::scalar(4.5).item() == 4.5);
  CHECK(shape_numel({2, 3, 4}) == 24);
  CHECK(Tensor::full({2, 2}, 7.0).flat().sum() == 28.0);

  Tensor a = Tensor::from({2}, {1.0, 2.0});
  a.add_(Tensor::from({2}, {0.5, 0.5}));
  CHECK(a[0] == 1.5);
  CHECK(a.all_finite());
  a[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(a.all_finite());
}

TEST_CASE("rng determinism and stream independence") {
  Rng a(123), b(123), c(124);
  for (int i = 0; i < 32; ++i) CHECK(a.next_u64() == b.next_u64());
  bool differs = false;
  Rng a2(123);
  for (int i = 0; i < 32; ++i) differs |= (a2.next_u64() != c.next_u64());
  CHECK(differs);

  // Separator property of the seed hash.
  CHECK(derive_seed(1, "ab", "c") != derive_seed(1, "a", "bc"));
  CHECK(derive_seed(1, "x", uint64_t{2}) != derive_seed(1, "x", uint64_t{3}));
  CHECK(derive_seed(1, "x") != derive_seed(2, "x"));

  Rng r(9);
  for (int i = 0; i < 1000; ++i) {
    const int64_t v = r.uniform_int(7);
    CHECK(v >= 0);
    CHECK(v < 7);
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }

  std::vector<int> perm(20);
  for (int i = 0; i < 20; ++i) perm[i] = i;
  Rng s(5);
  s.shuffle(perm);
  std::vector<int> sorted = perm;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 20; ++i) CHECK(sorted[i] == i);

  auto picked = Rng(11).sample_without_replacement(perm, 8);
  CHECK(picked.size() == 8);
  std::set<int> uniq(picked.begin(), picked.end());
  CHECK(uniq.size() == 8);
}

TEST_CASE("gaussian moments are sane") {
  Rng r(77);
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double v = r.gaussian();
    sum += v;
    sq += v * v;
  }
  CHECK(std::fabs(sum / n) < 0.03);
  CHECK(std::fabs(sq / n - 1.0) < 0.05);
}

TEST_CASE("parameter init is name-seeded, not order-seeded") {
  ParamRegistry r1(42), r2(42), r3(43);
  Parameter& a1 = r1.create("alpha", {3, 4}, Init::Normal);
  Parameter& b1 = r1.create("beta", {2, 2}, Init::Normal);
  Parameter& b2 = r2.create("beta", {2, 2}, Init::Normal);
  Parameter& a2 = r2.create("alpha", {3, 4}, Init::Normal);
  CHECK(a1.value.vec() == a2.value.vec());
  CHECK(b1.value.vec() == b2.value.vec());
  Parameter& a3 = r3.create("alpha", {3, 4}, Init::Normal);
  CHECK(a1.value.vec() != a3.value.vec());

  CHECK(r1.create("zero", {2}, Init::Zeros).value.flat().sum() == 0.0);
  CHECK(r1.create("one", {2}, Init::Ones).value.flat().sum() == 2.0);
  CHECK(r1.total_parameters() == 12 + 4 + 2 + 2);
  CHECK(r1.contains("alpha"));
  CHECK_FALSE(r1.contains("gamma"));
}

TEST_CASE("finite differences: elementwise and linear ops") {
  Rng pick(1001);
  const double tol = 1e-3;

  auto run = [&](LeafCheck check) {
    return gltest::max_rel_err_leaf(check, pick, 6);
  };

  CHECK(run({{randn({3, 4}, 1), randn({3, 4}, 2)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.add(v[0], v[1]), 50);
             }}) < tol);
  CHECK(run({{randn({3, 4}, 3), randn({3, 4}, 4)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.sub(v[0], v[1]), 51);
             }}) < tol);
  CHECK(run({{randn({3, 4}, 5), randn({3, 4}, 6)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.mul(v[0], v[1]), 52);
             }}) < tol);
  CHECK(run({{randn({3, 4}, 7)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.scale(v[0], -2.5), 53);
             }}) < tol);
  CHECK(run({{randn({3, 4}, 8)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.add_scalar(v[0], 1.25), 54);
             }}) < tol);
  CHECK(run({{randn({3, 4}, 9), randn({4, 2}, 10)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.matmul(v[0], v[1]), 55);
             }}) < tol);
  CHECK(run({{randn({3, 4}, 11), randn({2, 4}, 12)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.matmul_nt(v[0], v[1]), 56);
             }}) < tol);
  CHECK(run({{randn({3, 4}, 13), randn({1, 4}, 14)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.add_row_broadcast(v[0], v[1]), 57);
             }}) < tol);
  CHECK(run({{randn({3, 4}, 15), randn({4, 2}, 16), randn({1, 2}, 17)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.linear(v[0], v[1], v[2]), 58);
             }}) < tol);
  CHECK(run({{randn({3, 4}, 18)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.gelu(v[0]), 59);
             }}) < tol);
  CHECK(run({{randn({3, 4}, 19), randn({1, 4}, 20), randn({1, 4}, 21)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.layer_norm(v[0], v[1], v[2]), 60);
             }}) < tol);
  CHECK(run({{randn({3, 4}, 22)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.softmax_rows(v[0]), 61);
             }}) < tol);
  CHECK(run({{randn({3, 4}, 23)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.log_softmax_rows(v[0]), 62);
             }}) < tol);
  CHECK(run({{randn({4, 4}, 24)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.mask_diag(v[0], -3.0), 63);
             }}) < tol);
  CHECK(run({{randn({3, 4}, 25)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.transpose(v[0]), 64);
             }}) < tol);
}

TEST_CASE("finite differences: structural ops") {
  Rng pick(1002);
  const double tol = 1e-3;
  auto run = [&](LeafCheck check) {
    return gltest::max_rel_err_leaf(check, pick, 6);
  };

  CHECK(run({{randn({6, 3}, 30)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.reshaped(v[0], {3, 6}), 70);
             }}) < tol);
  // gather_rows with a repeated index exercises gradient accumulation.
  CHECK(run({{randn({5, 3}, 31)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.gather_rows(v[0], {4, 0, 0, 2}), 71);
             }}) < tol);
  CHECK(run({{randn({2, 3}, 32), randn({4, 3}, 33), randn({1, 3}, 34)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.concat_rows({v[0], v[1], v[2]}), 72);
             }}) < tol);
  CHECK(run({{randn({6, 3}, 35)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.group_mean_rows(v[0], 2), 73);
             }}) < tol);
  CHECK(run({{randn({4, 3}, 36)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.row_sum(v[0]), 74);
             }}) < tol);
  CHECK(run({{randn({4, 3}, 37)},
             [](Tape& t, const std::vector<Var>& v) { return t.sum_all(v[0]); }}) < tol);
  CHECK(run({{randn({4, 3}, 38)},
             [](Tape& t, const std::vector<Var>& v) { return t.mean_all(v[0]); }}) < tol);
  CHECK(run({{randn({4, 4}, 39)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.take_diag(v[0]), 75);
             }}) < tol);
  CHECK(run({{randn({4, 5}, 40)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.take_elements(v[0], {{0, 1}, {3, 4}, {2, 2}}), 76);
             }}) < tol);
  CHECK(run({{randn({3, 4}, 41)},
             [](Tape& t, const std::vector<Var>& v) {
               Rng wr(900);
               return t.dot_const(v[0], Tensor::randn({3, 4}, wr));
             }}) < tol);
  CHECK(run({{randn({4, 5}, 42)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.normalize_rows(v[0]), 77);
             }}) < tol);
  CHECK(run({{randn({5, 3}, 43)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.pair_distance(v[0], {{0, 1}, {2, 4}, {1, 3}}), 78);
             }}) < tol);
}

TEST_CASE("finite differences: fused model ops") {
  Rng pick(1003);
  const double tol = 1e-3;
  auto run = [&](LeafCheck check) {
    return gltest::max_rel_err_leaf(check, pick, 8);
  };

  // Single group, multi-head self-attention.
  CHECK(run({{randn({5, 6}, 80, 0.5), randn({5, 6}, 81, 0.5), randn({5, 6}, 82, 0.5)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.attention(v[0], v[1], v[2], {{0, 1, 5, 0, 1, 5}}, 2), 90);
             }}) < tol);
  // Strided interleaved groups (the spatial/temporal layout) with distinct
  // query and key/value row sets.
  CHECK(run({{randn({6, 4}, 83, 0.5), randn({6, 4}, 84, 0.5), randn({6, 4}, 85, 0.5)},
             [](Tape& t, const std::vector<Var>& v) {
               std::vector<AttnGroup> groups{{0, 2, 3, 0, 2, 3}, {1, 2, 3, 1, 2, 3}};
               return pin(t, t.attention(v[0], v[1], v[2], groups, 2), 91);
             }}) < tol);
  CHECK(run({{randn({4, 3}, 86), randn({4, 3}, 87), randn({2, 3}, 88)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.blend(v[0], v[1], v[2]), 92);
             }}) < tol);
  CHECK(run({{randn({6, 4}, 89), randn({3}, 93)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.weighted_layer_sum(v[0], v[1], 3), 94);
             }}) < tol);
  CHECK(run({{randn({4, 3}, 95), randn({1, 3}, 96)},
             [](Tape& t, const std::vector<Var>& v) {
               return pin(t, t.replace_rows(v[0], {1, 0, 0, 1}, v[1]), 97);
             }}) < tol);
}

TEST_CASE("attention semantics") {
  // Grouped attention equals separate per-group attention.
  Tensor q = randn({6, 4}, 200), k = randn({6, 4}, 201), v = randn({6, 4}, 202);
  Tape t(false);
  Var qa = t.input(q), ka = t.input(k), va = t.input(v);
  Var both = t.attention(qa, ka, va, {{0, 1, 3, 0, 1, 3}, {3, 1, 3, 3, 1, 3}}, 2);

  Tape t2(false);
  Var q1 = t2.input(q), k1 = t2.input(k), v1 = t2.input(v);
  Var first = t2.attention(q1, k1, v1, {{0, 1, 3, 0, 1, 3}}, 2);
  Var second = t2.attention(q1, k1, v1, {{3, 1, 3, 3, 1, 3}}, 2);

  for (int64_t r = 0; r < 3; ++r)
    for (int64_t c = 0; c < 4; ++c) {
      CHECK(t.value(both).at(r, c) == doctest::Approx(t2.value(first).at(r, c)));
      CHECK(t.value(both).at(r + 3, c) ==
            doctest::Approx(t2.value(second).at(r + 3, c)));
    }

  // Captured probability rows are simplex points.
  Tape t3(false);
  t3.capture_attention = true;
  Var qb = t3.input(q), kb = t3.input(k), vb = t3.input(v);
  t3.attention(qb, kb, vb, {{0, 1, 6, 0, 1, 6}}, 2);
  REQUIRE(t3.captured_attention.size() == 2);
  for (const auto& probs : t3.captured_attention)
    for (int64_t r = 0; r < probs.rows(); ++r) {
      CHECK(probs.row(r).sum() == doctest::Approx(1.0));
      CHECK(probs.row(r).minCoeff() >= 0.0);
    }
}

TEST_CASE("multi-seed backward equals single-root backward") {
  // Stitching a loss tape to micro tapes through leaf gradients must equal
  // the fused graph's gradients.
  Tensor x = randn({4, 3}, 300);
  Tensor w = randn({3, 3}, 301);

  // Fused: loss = sum(gelu(x*w)^2).
  Tape fused;
  Var xf = fused.leaf(x, true);
  Var wf = fused.leaf(w, true);
  Var hf = fused.gelu(fused.matmul(xf, wf));
  fused.backward(fused.sum_all(fused.mul(hf, hf)));
  const Tensor gx_fused = fused.grad(xf);
  const Tensor gw_fused = fused.grad(wf);

  // Split: micro tape computes h; loss tape consumes a detached copy.
  Tape micro;
  Var xm = micro.leaf(x, true);
  Var wm = micro.leaf(w, true);
  Var hm = micro.gelu(micro.matmul(xm, wm));

  Tape loss_tape;
  Var hl = loss_tape.leaf(micro.value(hm), true);
  loss_tape.backward(loss_tape.sum_all(loss_tape.mul(hl, hl)));

  micro.backward({{hm, loss_tape.grad(hl)}});
  const Tensor gx_split = micro.grad(xm);
  const Tensor gw_split = micro.grad(wm);

  for (int64_t i = 0; i < gx_fused.numel(); ++i)
    CHECK(gx_split[i] == doctest::Approx(gx_fused[i]).epsilon(1e-12));
  for (int64_t i = 0; i < gw_fused.numel(); ++i)
    CHECK(gw_split[i] == doctest::Approx(gw_fused[i]).epsilon(1e-12));
}

TEST_CASE("parameter gradients accumulate across tapes") {
  ParamRegistry reg(7);
  Parameter& p = reg.create("p", {2, 2}, Init::Normal, 1.0);
  reg.zero_grads();

  Tape t1;
  t1.backward(t1.sum_all(t1.param(p)));
  Tape t2;
  t2.backward(t2.sum_all(t2.scale(t2.param(p), 3.0)));

  for (int64_t i = 0; i < 4; ++i) CHECK(p.grad[i] == doctest::Approx(4.0));
  CHECK(reg.grads_finite());
}

TEST_CASE("tape argument validation") {
  Tape t;
  Var a = t.input(Tensor::from({2, 2}, {1, 2, 3, 4}));
  Var b = t.input(Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}));
  CHECK(gltest::thrown_kind([&] { t.add(a, b); }).has_value());
  CHECK(gltest::thrown_kind([&] { t.matmul(a, t.input(Tensor::from({3, 1}, {1, 2, 3}))); })
            .has_value());
  CHECK(gltest::thrown_kind([&] { t.backward(a); }).has_value());  // non-scalar root
  CHECK(gltest::thrown_kind([&] { t.group_mean_rows(b, 4); }).has_value());
}

TEST_CASE("adam matches a hand-stepped reference") {
  ParamRegistry reg(3);
  Parameter& p = reg.create("w", {2}, Init::Zeros);
  p.value[0] = 1.0;
  p.value[1] = -2.0;
  Adam opt(reg, {0.1, 0.9, 0.999, 1e-8});

  double m[2] = {0, 0}, v[2] = {0, 0}, ref[2] = {1.0, -2.0};
  const double g[2] = {0.5, -1.5};
  for (int step = 1; step <= 3; ++step) {
    reg.zero_grads();
    p.grad[0] = g[0];
    p.grad[1] = g[1];
    opt.step();
    for (int i = 0; i < 2; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * g[i];
      v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
      const double mh = m[i] / (1.0 - std::pow(0.9, step));
      const double vh = v[i] / (1.0 - std::pow(0.999, step));
      ref[i] -= 0.1 * mh / (std::sqrt(vh) + 1e-8);
      CHECK(p.value[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    }
  }
  CHECK(opt.steps_taken() == 3);
}
