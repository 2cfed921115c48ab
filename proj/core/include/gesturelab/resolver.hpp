#pragma once

#include <cstdint>
#include <vector>

#include "gesturelab/params.hpp"
#include "gesturelab/tensor.hpp"

namespace gesturelab {

// Referent classifier on frozen embeddings: a two-hidden-layer MLP trained
// with Adam on softmax cross-entropy.
struct ResolverConfig {
  int hidden1 = 300;
  int hidden2 = 150;
  int batch_size = 32;
  double learning_rate = 1e-4;
  int epochs = 200;
  int class_count = 0;  // vocabulary-driven

  void validate() const;
};

class ResolverModel {
 public:
  ResolverModel(int input_width, const ResolverConfig& config, uint64_t seed);

  int input_width() const { return input_width_; }
  int class_count() const { return config_.class_count; }
  const ResolverConfig& config() const { return config_; }
  ParamRegistry& params() { return registry_; }

  Tensor logits(const Tensor& embeddings) const;  // (n, d) -> (n, K)
  std::vector<int> predict(const Tensor& embeddings) const;
  double accuracy(const Tensor& embeddings, const std::vector<int>& labels) const;

  // One pass over a batch: mean cross-entropy, gradients accumulated when
  // requested. Exposed for training and tests.
  double batch_loss(const Tensor& embeddings, const std::vector<int>& labels,
                    bool accumulate_grads);

 private:
  int input_width_;
  ResolverConfig config_;
  ParamRegistry registry_;
};

// Trains a fresh model on (n, d) embeddings with class-index labels.
// Deterministic under seed; labels outside [0, class_count) are rejected.
ResolverModel train_resolver(const Tensor& embeddings, const std::vector<int>& labels,
                             const ResolverConfig& config, uint64_t seed);

}  // namespace gesturelab
