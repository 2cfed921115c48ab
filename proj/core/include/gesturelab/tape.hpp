#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gesturelab/tensor.hpp"

namespace gesturelab {

struct Parameter;

// Handle to a node on a Tape.
struct Var {
  int32_t idx = -1;
  bool valid() const { return idx >= 0; }
};

// Row-group specification for the attention operation. Query rows
// {q_start + i*q_stride} attend over key/value rows {kv_start + i*kv_stride}.
// Groups must not share query rows; key/value rows may be shared.
struct AttnGroup {
  int64_t q_start = 0;
  int64_t q_stride = 1;
  int64_t q_count = 0;
  int64_t kv_start = 0;
  int64_t kv_stride = 1;
  int64_t kv_count = 0;
};

// Eager reverse-mode autodiff over Tensor. Values are computed when an
// operation is recorded; backward() runs a single reverse sweep and can be
// seeded at several nodes at once. Gradients for parameter leaves accumulate
// into Parameter::grad so separate tapes can contribute to one optimizer
// step. Tapes are not movable: backward closures refer into the node vector.
class Tape {
 public:
  explicit Tape(bool track = true) : track_(track) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool tracking() const { return track_; }
  size_t size() const { return nodes_.size(); }

  // Leaves.
  Var input(Tensor value);                   // constant
  Var leaf(Tensor value, bool needs_grad);   // gradient kept on the node
  Var param(Parameter& p);                   // gradient forwarded to p.grad

  const Tensor& value(Var v) const;
  // Gradient buffer of a node after backward(); empty tensor if untouched.
  const Tensor& grad(Var v) const;

  // Elementwise and linear algebra.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var matmul(Var a, Var b);     // (m,k) x (k,n)
  Var matmul_nt(Var a, Var b);  // (m,k) x (n,k)^T
  Var add_row_broadcast(Var x, Var bias);
  Var linear(Var x, Var weight, Var bias);  // x*W + b
  Var gelu(Var x);
  Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
  Var softmax_rows(Var x);
  Var log_softmax_rows(Var x);
  Var mask_diag(Var x, double fill);
  Var transpose(Var x);

  // Structure.
  Var reshaped(Var x, Shape shape);
  Var gather_rows(Var x, std::vector<int64_t> indices);
  Var concat_rows(const std::vector<Var>& parts);
  Var group_mean_rows(Var x, int64_t groups);
  Var row_sum(Var x);
  Var sum_all(Var x);
  Var mean_all(Var x);
  Var take_diag(Var x);
  Var take_elements(Var x, std::vector<std::pair<int64_t, int64_t>> positions);
  Var dot_const(Var x, Tensor weights);
  Var normalize_rows(Var x, double min_norm = 1e-12);
  Var pair_distance(Var x, std::vector<std::pair<int64_t, int64_t>> pairs);

  // Fused model blocks.
  Var attention(Var q, Var k, Var v, std::vector<AttnGroup> groups, int heads);
  Var blend(Var a, Var b, Var logits);  // logits (2,d); convex per-feature mix
  Var weighted_layer_sum(Var stacked, Var logits, int64_t layers);
  Var replace_rows(Var x, std::vector<uint8_t> flags, Var token);

  // Reverse sweep from one scalar root (seed 1.0).
  void backward(Var root);
  // Reverse sweep seeded at several nodes at once.
  void backward(const std::vector<std::pair<Var, Tensor>>& seeds);

  // Test hook: when enabled, attention() appends its post-softmax probability
  // matrices (one per group and head) here.
  bool capture_attention = false;
  std::vector<MatrixRM> captured_attention;

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    Parameter* parameter = nullptr;
    std::function<void(Tape&, int32_t)> backward;
  };

  Var push(Tensor value, bool needs_grad, std::function<void(Tape&, int32_t)> bwd);
  Node& node(Var v);
  const Node& node(Var v) const;
  bool wants_grad(Var v) const { return track_ && node(v).needs_grad; }
  Tensor& grad_buffer(int32_t idx);

  std::vector<Node> nodes_;
  bool track_;
};

}  // namespace gesturelab
