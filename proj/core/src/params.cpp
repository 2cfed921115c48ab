#include "gesturelab/params.hpp"

#include <cmath>

#include "gesturelab/rng.hpp"

namespace gesturelab {

Parameter& ParamRegistry::create(const std::string& name, Shape shape, Init init,
                                 double stddev) {
  check_arg(!name.empty(), "parameter name must not be empty");
  check_arg(index_.find(name) == index_.end(), "duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  switch (init) {
    case Init::Zeros:
      p->value = Tensor::zeros(shape);
      break;
    case Init::Ones:
      p->value = Tensor::full(shape, 1.0);
      break;
    case Init::Normal: {
      Rng rng(derive_seed(init_seed_, "param-init", name));
      p->value = Tensor::randn(shape, rng, stddev);
      break;
    }
  }
  p->grad = Tensor::zeros(shape);
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParamRegistry::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

const Parameter* ParamRegistry::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

std::vector<Parameter*> ParamRegistry::all() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const Parameter*> ParamRegistry::all() const {
  std::vector<const Parameter*> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<std::string> ParamRegistry::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (auto& p : params_) out.push_back(p->name);
  return out;
}

int64_t ParamRegistry::total_parameters() const {
  int64_t n = 0;
  for (auto& p : params_) n += p->value.numel();
  return n;
}

void ParamRegistry::zero_grads() {
  for (auto& p : params_) p->grad.fill(0.0);
}

bool ParamRegistry::grads_finite() const {
  for (auto& p : params_) {
    if (!p->grad.all_finite()) return false;
  }
  return true;
}

Adam::Adam(ParamRegistry& registry, Config config) : registry_(registry), config_(config) {
  for (Parameter* p : registry_.all()) {
    m_.push_back(Tensor::zeros(p->value.shape()));
    v_.push_back(Tensor::zeros(p->value.shape()));
  }
}

void Adam::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  auto params = registry_.all();
  check_arg(params.size() == m_.size(), "optimizer state does not match registry");
  for (size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    double* m = m_[i].data();
    double* v = v_[i].data();
    double* g = p.grad.data();
    double* w = p.value.data();
    int64_t n = p.value.numel();
    for (int64_t j = 0; j < n; ++j) {
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g[j];
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g[j] * g[j];
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      w[j] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

}  // namespace gesturelab
