#include "gesturelab/resolver.hpp"

#include <algorithm>

#include "gesturelab/error.hpp"
#include "gesturelab/rng.hpp"
#include "gesturelab/tape.hpp"

namespace gesturelab {

void ResolverConfig::validate() const {
  check_config(hidden1 > 0 && hidden2 > 0, "resolver: hidden sizes must be positive");
  check_config(batch_size >= 1, "resolver: batch_size must be >= 1");
  check_config(learning_rate > 0.0, "resolver: learning_rate must be positive");
  check_config(epochs >= 1, "resolver: epochs must be >= 1");
  check_config(class_count >= 2, "resolver: class_count must be >= 2");
}

ResolverModel::ResolverModel(int input_width, const ResolverConfig& config, uint64_t seed)
    : input_width_(input_width), config_(config), registry_(derive_seed(seed, "params")) {
  check_arg(input_width >= 1, "resolver: input width must be >= 1");
  config_.validate();
  registry_.create("resolver.w1", {input_width_, config_.hidden1}, Init::Normal);
  registry_.create("resolver.b1", {1, config_.hidden1}, Init::Zeros);
  registry_.create("resolver.w2", {config_.hidden1, config_.hidden2}, Init::Normal);
  registry_.create("resolver.b2", {1, config_.hidden2}, Init::Zeros);
  registry_.create("resolver.w3", {config_.hidden2, config_.class_count}, Init::Normal);
  registry_.create("resolver.b3", {1, config_.class_count}, Init::Zeros);
}

namespace {

Var resolver_logits(Tape& tape, ParamRegistry& registry, Var x) {
  Var h1 = tape.gelu(tape.linear(x, tape.param(*registry.find("resolver.w1")),
                                 tape.param(*registry.find("resolver.b1"))));
  Var h2 = tape.gelu(tape.linear(h1, tape.param(*registry.find("resolver.w2")),
                                 tape.param(*registry.find("resolver.b2"))));
  return tape.linear(h2, tape.param(*registry.find("resolver.w3")),
                     tape.param(*registry.find("resolver.b3")));
}

}  // namespace

Tensor ResolverModel::logits(const Tensor& embeddings) const {
  check_arg(embeddings.cols() == input_width_, "resolver: embedding width mismatch");
  Tape tape(false);
  auto& self = const_cast<ResolverModel&>(*this);
  return tape.value(resolver_logits(tape, self.registry_, tape.input(embeddings)));
}

std::vector<int> ResolverModel::predict(const Tensor& embeddings) const {
  const Tensor scores = logits(embeddings);
  std::vector<int> out(static_cast<size_t>(scores.rows()));
  for (int64_t i = 0; i < scores.rows(); ++i) {
    int64_t best = 0;
    for (int64_t k = 1; k < scores.cols(); ++k)
      if (scores.at(i, k) > scores.at(i, best)) best = k;
    out[static_cast<size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

double ResolverModel::accuracy(const Tensor& embeddings, const std::vector<int>& labels) const {
  check_arg(static_cast<int64_t>(labels.size()) == embeddings.rows(),
            "resolver: one label per embedding row required");
  check_arg(!labels.empty(), "resolver: empty evaluation set");
  const auto predicted = predict(embeddings);
  int64_t hits = 0;
  for (size_t i = 0; i < labels.size(); ++i)
    if (predicted[i] == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double ResolverModel::batch_loss(const Tensor& embeddings, const std::vector<int>& labels,
                                 bool accumulate_grads) {
  const int64_t n = embeddings.rows();
  check_arg(static_cast<int64_t>(labels.size()) == n, "resolver: label count mismatch");
  check_arg(n >= 1, "resolver: empty batch");
  check_arg(embeddings.cols() == input_width_, "resolver: embedding width mismatch");
  std::vector<std::pair<int64_t, int64_t>> positions;
  positions.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const int y = labels[static_cast<size_t>(i)];
    check_arg(y >= 0 && y < config_.class_count, "resolver: label outside vocabulary");
    positions.emplace_back(i, y);
  }
  Tape tape(accumulate_grads);
  Var logp = tape.log_softmax_rows(resolver_logits(tape, registry_, tape.input(embeddings)));
  Var loss = tape.scale(tape.sum_all(tape.take_elements(logp, positions)),
                        -1.0 / static_cast<double>(n));
  if (accumulate_grads) tape.backward(loss);
  return tape.value(loss).at(0, 0);
}

ResolverModel train_resolver(const Tensor& embeddings, const std::vector<int>& labels,
                             const ResolverConfig& config, uint64_t seed) {
  config.validate();
  const int64_t n = embeddings.rows();
  check_arg(n >= 1, "resolver: empty training set");
  check_arg(static_cast<int64_t>(labels.size()) == n, "resolver: one label per embedding row");
  for (int y : labels)
    check_arg(y >= 0 && y < config.class_count, "resolver: label outside vocabulary");

  ResolverModel model(static_cast<int>(embeddings.cols()), config, seed);
  Adam optimizer(model.params(), {config.learning_rate, 0.9, 0.999, 1e-8});

  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  const int64_t b = config.batch_size;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng rng(derive_seed(seed, "shuffle", static_cast<uint64_t>(epoch)));
    rng.shuffle(order);
    for (int64_t lo = 0; lo < n; lo += b) {
      const int64_t hi = std::min(n, lo + b);
      Tensor batch({hi - lo, embeddings.cols()});
      std::vector<int> batch_labels(static_cast<size_t>(hi - lo));
      for (int64_t i = lo; i < hi; ++i) {
        batch.mat().row(i - lo) = embeddings.mat().row(order[static_cast<size_t>(i)]);
        batch_labels[static_cast<size_t>(i - lo)] =
            labels[static_cast<size_t>(order[static_cast<size_t>(i)])];
      }
      optimizer.zero_grad();
      const double loss = model.batch_loss(batch, batch_labels, true);
      check(std::isfinite(loss), ErrorKind::Numeric, "resolver: non-finite training loss");
      optimizer.step();
    }
  }
  return model;
}

}  // namespace gesturelab
