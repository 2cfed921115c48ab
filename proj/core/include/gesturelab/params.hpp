#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gesturelab/tensor.hpp"

namespace gesturelab {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;  // same shape as value, zero-filled
};

enum class Init { Zeros, Ones, Normal };

// Ordered collection of named trainable parameters. Creation order is the
// canonical iteration order (used by the optimizer and checkpoint format);
// initialization draws from a stream derived from (seed, name) so values do
// not depend on creation order.
class ParamRegistry {
 public:
  explicit ParamRegistry(uint64_t init_seed = 0) : init_seed_(init_seed) {}

  Parameter& create(const std::string& name, Shape shape, Init init, double stddev = 0.02);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  std::vector<std::string> names() const;

  int64_t total_parameters() const;
  void zero_grads();
  bool grads_finite() const;
  uint64_t init_seed() const { return init_seed_; }

 private:
  uint64_t init_seed_;
  std::vector<std::unique_ptr<Parameter>> params_;
  std::map<std::string, size_t> index_;
};

// Adam with bias correction; state is serialized into checkpoints so resumed
// training continues the exact trajectory.
class Adam {
 public:
  struct Config {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(ParamRegistry& registry, Config config);

  void step();
  void zero_grad() { registry_.zero_grads(); }
  int64_t steps_taken() const { return t_; }
  const Config& config() const { return config_; }

  // Checkpoint access: first- and second-moment buffers in registry order.
  std::vector<Tensor>& moment1() { return m_; }
  std::vector<Tensor>& moment2() { return v_; }
  const std::vector<Tensor>& moment1() const { return m_; }
  const std::vector<Tensor>& moment2() const { return v_; }
  void set_steps_taken(int64_t t) { t_ = t; }

 private:
  ParamRegistry& registry_;
  Config config_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  int64_t t_ = 0;
};

}  // namespace gesturelab
