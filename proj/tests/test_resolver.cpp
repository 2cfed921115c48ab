#include <cmath>
#include <map>

#include "doctest.h"
#include "gesturelab/resolver.hpp"
#include "helpers.hpp"

using namespace gesturelab;

namespace {

// Four well-separated Gaussian blobs in 8 dimensions.
void make_blobs(int per_class, uint64_t seed, Tensor* x, std::vector<int>* y) {
  Rng rng(seed);
  const int classes = 4, dim = 8;
  *x = Tensor({int64_t(classes * per_class), dim});
  y->clear();
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      const int64_t row = int64_t(c * per_class + i);
      for (int64_t d = 0; d < dim; ++d)
        x->at(row, d) = (d == c ? 4.0 : 0.0) + rng.gaussian() * 0.3;
      y->push_back(c);
    }
  }
}

ResolverConfig small_config(int classes) {
  ResolverConfig cfg;
  cfg.hidden1 = 32;
  cfg.hidden2 = 16;
  cfg.batch_size = 16;
  cfg.learning_rate = 3e-3;
  cfg.epochs = 60;
  cfg.class_count = classes;
  return cfg;
}

}  // namespace

TEST_CASE("resolver separates clean clusters") {
  Tensor train_x, test_x;
  std::vector<int> train_y, test_y;
  make_blobs(24, 900, &train_x, &train_y);
  make_blobs(12, 901, &test_x, &test_y);

  ResolverModel model = train_resolver(train_x, train_y, small_config(4), 902);
  CHECK(model.accuracy(train_x, train_y) >= 0.99);
  CHECK(model.accuracy(test_x, test_y) >= 0.95);

  Tensor logits = model.logits(test_x);
  CHECK(logits.rows() == test_x.rows());
  CHECK(logits.cols() == 4);
  auto preds = model.predict(test_x);
  REQUIRE(preds.size() == size_t(test_x.rows()));
  for (int p : preds) {
    CHECK(p >= 0);
    CHECK(p < 4);
  }
}

TEST_CASE("constant features leave the resolver at chance") {
  const int classes = 4, per = 16;
  Tensor x({int64_t(classes * per), 6});
  std::vector<int> y;
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per; ++i) {
      const int64_t row = int64_t(c * per + i);
      for (int64_t d = 0; d < 6; ++d) x.at(row, d) = 0.4;
      y.push_back(c);
    }

  ResolverModel model = train_resolver(x, y, small_config(classes), 903);
  // Identical inputs produce identical predictions: one class everywhere,
  // which on a balanced set is exactly chance.
  CHECK(model.accuracy(x, y) == doctest::Approx(1.0 / classes).epsilon(1e-12));
}

TEST_CASE("resolver training is deterministic") {
  Tensor x;
  std::vector<int> y;
  make_blobs(12, 904, &x, &y);
  ResolverConfig cfg = small_config(4);
  cfg.epochs = 10;

  ResolverModel a = train_resolver(x, y, cfg, 905);
  ResolverModel b = train_resolver(x, y, cfg, 905);
  Tensor la = a.logits(x), lb = b.logits(x);
  for (int64_t i = 0; i < la.numel(); ++i) CHECK(la[i] == lb[i]);

  ResolverModel c = train_resolver(x, y, cfg, 906);
  Tensor lc = c.logits(x);
  double diff = 0.0;
  for (int64_t i = 0; i < la.numel(); ++i) diff += std::abs(la[i] - lc[i]);
  CHECK(diff > 0.0);
}

TEST_CASE("label and shape validation") {
  Tensor x;
  std::vector<int> y;
  make_blobs(4, 907, &x, &y);
  ResolverConfig cfg = small_config(4);
  cfg.epochs = 1;

  std::vector<int> bad = y;
  bad[0] = 4;
  CHECK(gltest::thrown_kind([&] { train_resolver(x, bad, cfg, 1); }).has_value());
  bad[0] = -1;
  CHECK(gltest::thrown_kind([&] { train_resolver(x, bad, cfg, 1); }).has_value());

  std::vector<int> short_y(y.begin(), y.end() - 1);
  CHECK(gltest::thrown_kind([&] { train_resolver(x, short_y, cfg, 1); }).has_value());

  ResolverConfig zero = cfg;
  zero.class_count = 0;
  CHECK(gltest::thrown_kind([&] { train_resolver(x, y, zero, 1); }).has_value());
}

TEST_CASE("small datasets below one batch still train") {
  Rng rng(908);
  Tensor x({6, 4});
  std::vector<int> y;
  for (int64_t i = 0; i < 6; ++i) {
    for (int64_t d = 0; d < 4; ++d) x.at(i, d) = (d == i % 2 ? 2.0 : 0.0) + 0.1 * rng.gaussian();
    y.push_back(int(i % 2));
  }
  ResolverConfig cfg = small_config(2);
  cfg.batch_size = 32;  // larger than the dataset
  cfg.epochs = 80;
  ResolverModel model = train_resolver(x, y, cfg, 909);
  CHECK(model.accuracy(x, y) == doctest::Approx(1.0));
}

TEST_CASE("resolver batch loss gradients pass finite differences") {
  Tensor x;
  std::vector<int> y;
  make_blobs(3, 910, &x, &y);
  ResolverConfig cfg = small_config(4);
  ResolverModel model(8, cfg, 911);

  auto eval = [&](bool track) { return model.batch_loss(x, y, track); };
  Rng pick(912);
  CHECK(gltest::max_rel_err_params(model.params(), eval, pick, 20) < 1e-3);
}

TEST_CASE("resolver config validation") {
  ResolverConfig cfg = small_config(4);
  cfg.validate();
  cfg.hidden1 = 0;
  CHECK(gltest::thrown_kind([&] { cfg.validate(); }).has_value());
  cfg = small_config(4);
  cfg.learning_rate = 0.0;
  CHECK(gltest::thrown_kind([&] { cfg.validate(); }).has_value());
  cfg = small_config(4);
  cfg.epochs = 0;
  CHECK(gltest::thrown_kind([&] { cfg.validate(); }).has_value());
}
