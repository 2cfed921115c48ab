#include "gesturelab/tape.hpp"

#include <algorithm>
#include <cmath>

#include "gesturelab/params.hpp"

namespace gesturelab {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

using StridedMap = Eigen::Map<MatrixRM, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const MatrixRM, 0, Eigen::OuterStride<>>;

StridedMap strided(double* base, int64_t row_start, int64_t row_stride, int64_t rows,
                   int64_t col_start, int64_t cols, int64_t full_cols) {
  return StridedMap(base + row_start * full_cols + col_start, rows, cols,
                    Eigen::OuterStride<>(row_stride * full_cols));
}

ConstStridedMap strided(const double* base, int64_t row_start, int64_t row_stride, int64_t rows,
                        int64_t col_start, int64_t cols, int64_t full_cols) {
  return ConstStridedMap(base + row_start * full_cols + col_start, rows, cols,
                         Eigen::OuterStride<>(row_stride * full_cols));
}

void softmax_rows_inplace(MatrixRM& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    double mx = row.maxCoeff();
    row = (row.array() - mx).exp();
    row /= row.sum();
  }
}

}  // namespace

Var Tape::push(Tensor value, bool needs_grad, std::function<void(Tape&, int32_t)> bwd) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = track_ && needs_grad;
  if (n.needs_grad) n.backward = std::move(bwd);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int32_t>(nodes_.size() - 1)};
}

Tape::Node& Tape::node(Var v) {
  check_arg(v.idx >= 0 && static_cast<size_t>(v.idx) < nodes_.size(), "invalid tape handle");
  return nodes_[static_cast<size_t>(v.idx)];
}

const Tape::Node& Tape::node(Var v) const {
  check_arg(v.idx >= 0 && static_cast<size_t>(v.idx) < nodes_.size(), "invalid tape handle");
  return nodes_[static_cast<size_t>(v.idx)];
}

Tensor& Tape::grad_buffer(int32_t idx) {
  Node& n = nodes_[static_cast<size_t>(idx)];
  if (n.grad.empty() && n.value.numel() > 0) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

const Tensor& Tape::grad(Var v) const { return node(v).grad; }

Var Tape::input(Tensor value) { return push(std::move(value), false, nullptr); }

Var Tape::leaf(Tensor value, bool needs_grad) {
  return push(std::move(value), needs_grad, nullptr);
}

Var Tape::param(Parameter& p) {
  Var v = push(p.value, true, nullptr);
  node(v).parameter = &p;
  return v;
}

Var Tape::add(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check_arg(ta.same_shape(tb), "add: shape mismatch " + shape_str(ta.shape()) + " vs " +
                                   shape_str(tb.shape()));
  Tensor out = ta;
  out.flat() += tb.flat();
  return push(std::move(out), wants_grad(a) || wants_grad(b),
              [a, b](Tape& t, int32_t self) {
                const Tensor& g = t.nodes_[self].grad;
                if (t.wants_grad(a)) t.grad_buffer(a.idx).flat() += g.flat();
                if (t.wants_grad(b)) t.grad_buffer(b.idx).flat() += g.flat();
              });
}

Var Tape::sub(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check_arg(ta.same_shape(tb), "sub: shape mismatch");
  Tensor out = ta;
  out.flat() -= tb.flat();
  return push(std::move(out), wants_grad(a) || wants_grad(b),
              [a, b](Tape& t, int32_t self) {
                const Tensor& g = t.nodes_[self].grad;
                if (t.wants_grad(a)) t.grad_buffer(a.idx).flat() += g.flat();
                if (t.wants_grad(b)) t.grad_buffer(b.idx).flat() -= g.flat();
              });
}

Var Tape::mul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check_arg(ta.same_shape(tb), "mul: shape mismatch");
  Tensor out = ta;
  out.flat().array() *= tb.flat().array();
  return push(std::move(out), wants_grad(a) || wants_grad(b),
              [a, b](Tape& t, int32_t self) {
                const Tensor& g = t.nodes_[self].grad;
                if (t.wants_grad(a))
                  t.grad_buffer(a.idx).flat().array() +=
                      g.flat().array() * t.value(b).flat().array();
                if (t.wants_grad(b))
                  t.grad_buffer(b.idx).flat().array() +=
                      g.flat().array() * t.value(a).flat().array();
              });
}

Var Tape::scale(Var a, double c) {
  Tensor out = value(a);
  out.flat() *= c;
  return push(std::move(out), wants_grad(a), [a, c](Tape& t, int32_t self) {
    if (t.wants_grad(a)) t.grad_buffer(a.idx).flat() += c * t.nodes_[self].grad.flat();
  });
}

Var Tape::add_scalar(Var a, double c) {
  Tensor out = value(a);
  out.flat().array() += c;
  return push(std::move(out), wants_grad(a), [a](Tape& t, int32_t self) {
    if (t.wants_grad(a)) t.grad_buffer(a.idx).flat() += t.nodes_[self].grad.flat();
  });
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check_arg(ta.cols() == tb.rows(), "matmul: inner dimensions differ");
  Tensor out(Shape{ta.rows(), tb.cols()});
  out.mat().noalias() = ta.mat() * tb.mat();
  return push(std::move(out), wants_grad(a) || wants_grad(b),
              [a, b](Tape& t, int32_t self) {
                const Tensor& g = t.nodes_[self].grad;
                if (t.wants_grad(a))
                  t.grad_buffer(a.idx).mat().noalias() += g.mat() * t.value(b).mat().transpose();
                if (t.wants_grad(b))
                  t.grad_buffer(b.idx).mat().noalias() += t.value(a).mat().transpose() * g.mat();
              });
}

Var Tape::matmul_nt(Var a, Var b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check_arg(ta.cols() == tb.cols(), "matmul_nt: inner dimensions differ");
  Tensor out(Shape{ta.rows(), tb.rows()});
  out.mat().noalias() = ta.mat() * tb.mat().transpose();
  return push(std::move(out), wants_grad(a) || wants_grad(b),
              [a, b](Tape& t, int32_t self) {
                const Tensor& g = t.nodes_[self].grad;
                if (t.wants_grad(a))
                  t.grad_buffer(a.idx).mat().noalias() += g.mat() * t.value(b).mat();
                if (t.wants_grad(b))
                  t.grad_buffer(b.idx).mat().noalias() += g.mat().transpose() * t.value(a).mat();
              });
}

Var Tape::add_row_broadcast(Var x, Var bias) {
  const Tensor& tx = value(x);
  const Tensor& tb = value(bias);
  check_arg(tb.numel() == tx.cols(), "add_row_broadcast: bias size must equal column count");
  Tensor out = tx;
  out.mat().rowwise() += tb.flat().transpose();
  return push(std::move(out), wants_grad(x) || wants_grad(bias),
              [x, bias](Tape& t, int32_t self) {
                const Tensor& g = t.nodes_[self].grad;
                if (t.wants_grad(x)) t.grad_buffer(x.idx).flat() += g.flat();
                if (t.wants_grad(bias))
                  t.grad_buffer(bias.idx).flat() += g.mat().colwise().sum().transpose();
              });
}

Var Tape::linear(Var x, Var weight, Var bias) {
  return add_row_broadcast(matmul(x, weight), bias);
}

Var Tape::gelu(Var x) {
  const Tensor& tx = value(x);
  Tensor out = tx;
  for (int64_t i = 0; i < out.numel(); ++i) {
    double v = out[i];
    out[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  return push(std::move(out), wants_grad(x), [x](Tape& t, int32_t self) {
    if (!t.wants_grad(x)) return;
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& tx = t.value(x);
    Tensor& gx = t.grad_buffer(x.idx);
    for (int64_t i = 0; i < tx.numel(); ++i) {
      double v = tx[i];
      double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      gx[i] += g[i] * (cdf + v * pdf);
    }
  });
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& tx = value(x);
  const Tensor& tg = value(gamma);
  const Tensor& tb = value(beta);
  int64_t d = tx.cols();
  check_arg(tg.numel() == d && tb.numel() == d, "layer_norm: gamma/beta size mismatch");
  Tensor out(tx.shape());
  int64_t n = tx.rows();
  // Cache per-row inverse stddev and normalized activations for backward.
  auto xhat = std::make_shared<MatrixRM>(n, d);
  auto inv_sd = std::make_shared<Eigen::VectorXd>(n);
  for (int64_t i = 0; i < n; ++i) {
    auto row = tx.mat().row(i);
    double mean = row.mean();
    double var = (row.array() - mean).square().mean();
    double isd = 1.0 / std::sqrt(var + eps);
    (*inv_sd)(i) = isd;
    xhat->row(i) = ((row.array() - mean) * isd).matrix();
    out.mat().row(i) =
        (xhat->row(i).array() * tg.flat().transpose().array() + tb.flat().transpose().array())
            .matrix();
  }
  bool ng = wants_grad(x) || wants_grad(gamma) || wants_grad(beta);
  return push(std::move(out), ng, [x, gamma, beta, xhat, inv_sd](Tape& t, int32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    int64_t n = g.rows();
    int64_t d = g.cols();
    if (t.wants_grad(gamma)) {
      auto gg = t.grad_buffer(gamma.idx).flat();
      for (int64_t i = 0; i < n; ++i)
        gg.array() += (g.mat().row(i).array() * xhat->row(i).array()).transpose();
    }
    if (t.wants_grad(beta))
      t.grad_buffer(beta.idx).flat() += g.mat().colwise().sum().transpose();
    if (t.wants_grad(x)) {
      auto gx = t.grad_buffer(x.idx).mat();
      const auto tg = t.value(gamma).flat();
      for (int64_t i = 0; i < n; ++i) {
        Eigen::RowVectorXd gy =
            (g.mat().row(i).array() * tg.transpose().array()).matrix();
        double m1 = gy.mean();
        double m2 = (gy.array() * xhat->row(i).array()).mean();
        gx.row(i).array() +=
            (*inv_sd)(i) * (gy.array() - m1 - xhat->row(i).array() * m2);
      }
      (void)d;
    }
  });
}

Var Tape::softmax_rows(Var x) {
  Tensor out = value(x);
  {
    MatrixRM m = out.mat();
    softmax_rows_inplace(m);
    out.mat() = m;
  }
  return push(std::move(out), wants_grad(x), [x](Tape& t, int32_t self) {
    if (!t.wants_grad(x)) return;
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& y = t.nodes_[self].value;
    auto gx = t.grad_buffer(x.idx).mat();
    for (int64_t i = 0; i < y.rows(); ++i) {
      auto yi = y.mat().row(i).array();
      auto gi = g.mat().row(i).array();
      double s = (gi * yi).sum();
      gx.row(i).array() += yi * (gi - s);
    }
  });
}

Var Tape::log_softmax_rows(Var x) {
  const Tensor& tx = value(x);
  Tensor out(tx.shape());
  for (int64_t i = 0; i < tx.rows(); ++i) {
    auto row = tx.mat().row(i);
    double mx = row.maxCoeff();
    double lse = std::log((row.array() - mx).exp().sum()) + mx;
    out.mat().row(i) = (row.array() - lse).matrix();
  }
  return push(std::move(out), wants_grad(x), [x](Tape& t, int32_t self) {
    if (!t.wants_grad(x)) return;
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& y = t.nodes_[self].value;
    auto gx = t.grad_buffer(x.idx).mat();
    for (int64_t i = 0; i < y.rows(); ++i) {
      double s = g.mat().row(i).sum();
      gx.row(i).array() += g.mat().row(i).array() - y.mat().row(i).array().exp() * s;
    }
  });
}

Var Tape::mask_diag(Var x, double fill) {
  const Tensor& tx = value(x);
  check_arg(tx.rows() == tx.cols(), "mask_diag: square matrix required");
  Tensor out = tx;
  for (int64_t i = 0; i < tx.rows(); ++i) out.at(i, i) = fill;
  return push(std::move(out), wants_grad(x), [x](Tape& t, int32_t self) {
    if (!t.wants_grad(x)) return;
    Tensor g = t.nodes_[self].grad;
    for (int64_t i = 0; i < g.rows(); ++i) g.at(i, i) = 0.0;
    t.grad_buffer(x.idx).flat() += g.flat();
  });
}

Var Tape::transpose(Var x) {
  const Tensor& tx = value(x);
  Tensor out(Shape{tx.cols(), tx.rows()});
  out.mat() = tx.mat().transpose();
  return push(std::move(out), wants_grad(x), [x](Tape& t, int32_t self) {
    if (t.wants_grad(x))
      t.grad_buffer(x.idx).mat() += t.nodes_[self].grad.mat().transpose();
  });
}

Var Tape::reshaped(Var x, Shape shape) {
  Tensor out = value(x).reshaped(std::move(shape));
  return push(std::move(out), wants_grad(x), [x](Tape& t, int32_t self) {
    if (t.wants_grad(x)) t.grad_buffer(x.idx).flat() += t.nodes_[self].grad.flat();
  });
}

Var Tape::gather_rows(Var x, std::vector<int64_t> indices) {
  const Tensor& tx = value(x);
  int64_t d = tx.cols();
  Tensor out(Shape{static_cast<int64_t>(indices.size()), d});
  for (size_t i = 0; i < indices.size(); ++i) {
    check_arg(indices[i] >= 0 && indices[i] < tx.rows(), "gather_rows: index out of range");
    out.mat().row(static_cast<int64_t>(i)) = tx.mat().row(indices[i]);
  }
  auto idx = std::make_shared<std::vector<int64_t>>(std::move(indices));
  return push(std::move(out), wants_grad(x), [x, idx](Tape& t, int32_t self) {
    if (!t.wants_grad(x)) return;
    const Tensor& g = t.nodes_[self].grad;
    auto gx = t.grad_buffer(x.idx).mat();
    for (size_t i = 0; i < idx->size(); ++i)
      gx.row((*idx)[i]) += g.mat().row(static_cast<int64_t>(i));
  });
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  check_arg(!parts.empty(), "concat_rows: empty input");
  int64_t d = value(parts[0]).cols();
  int64_t n = 0;
  bool ng = false;
  for (Var p : parts) {
    check_arg(value(p).cols() == d, "concat_rows: column mismatch");
    n += value(p).rows();
    ng = ng || wants_grad(p);
  }
  Tensor out(Shape{n, d});
  int64_t row = 0;
  for (Var p : parts) {
    const Tensor& tp = value(p);
    out.mat().middleRows(row, tp.rows()) = tp.mat();
    row += tp.rows();
  }
  auto parts_copy = std::make_shared<std::vector<Var>>(parts);
  return push(std::move(out), ng, [parts_copy](Tape& t, int32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    int64_t row = 0;
    for (Var p : *parts_copy) {
      int64_t r = t.value(p).rows();
      if (t.wants_grad(p)) t.grad_buffer(p.idx).mat() += g.mat().middleRows(row, r);
      row += r;
    }
  });
}

Var Tape::group_mean_rows(Var x, int64_t groups) {
  const Tensor& tx = value(x);
  check_arg(groups > 0 && tx.rows() % groups == 0,
            "group_mean_rows: row count not divisible by group count");
  int64_t per = tx.rows() / groups;
  Tensor out(Shape{groups, tx.cols()});
  for (int64_t gi = 0; gi < groups; ++gi)
    out.mat().row(gi) = tx.mat().middleRows(gi * per, per).colwise().mean();
  return push(std::move(out), wants_grad(x), [x, groups, per](Tape& t, int32_t self) {
    if (!t.wants_grad(x)) return;
    const Tensor& g = t.nodes_[self].grad;
    auto gx = t.grad_buffer(x.idx).mat();
    double inv = 1.0 / static_cast<double>(per);
    for (int64_t gi = 0; gi < groups; ++gi)
      gx.middleRows(gi * per, per).rowwise() += inv * g.mat().row(gi);
  });
}

Var Tape::row_sum(Var x) {
  const Tensor& tx = value(x);
  Tensor out(Shape{tx.rows()});
  out.flat() = tx.mat().rowwise().sum();
  return push(std::move(out), wants_grad(x), [x](Tape& t, int32_t self) {
    if (!t.wants_grad(x)) return;
    const Tensor& g = t.nodes_[self].grad;
    t.grad_buffer(x.idx).mat().colwise() += g.flat();
  });
}

Var Tape::sum_all(Var x) {
  Tensor out = Tensor::scalar(value(x).flat().sum());
  return push(std::move(out), wants_grad(x), [x](Tape& t, int32_t self) {
    if (t.wants_grad(x))
      t.grad_buffer(x.idx).flat().array() += t.nodes_[self].grad[0];
  });
}

Var Tape::mean_all(Var x) {
  int64_t n = value(x).numel();
  check_arg(n > 0, "mean_all: empty tensor");
  Tensor out = Tensor::scalar(value(x).flat().sum() / static_cast<double>(n));
  return push(std::move(out), wants_grad(x), [x, n](Tape& t, int32_t self) {
    if (t.wants_grad(x))
      t.grad_buffer(x.idx).flat().array() +=
          t.nodes_[self].grad[0] / static_cast<double>(n);
  });
}

Var Tape::take_diag(Var x) {
  const Tensor& tx = value(x);
  check_arg(tx.rows() == tx.cols(), "take_diag: square matrix required");
  Tensor out(Shape{tx.rows()});
  for (int64_t i = 0; i < tx.rows(); ++i) out[i] = tx.at(i, i);
  return push(std::move(out), wants_grad(x), [x](Tape& t, int32_t self) {
    if (!t.wants_grad(x)) return;
    const Tensor& g = t.nodes_[self].grad;
    Tensor& gx = t.grad_buffer(x.idx);
    for (int64_t i = 0; i < g.numel(); ++i) gx.at(i, i) += g[i];
  });
}

Var Tape::take_elements(Var x, std::vector<std::pair<int64_t, int64_t>> positions) {
  const Tensor& tx = value(x);
  Tensor out(Shape{static_cast<int64_t>(positions.size())});
  for (size_t i = 0; i < positions.size(); ++i) {
    auto [r, c] = positions[i];
    check_arg(r >= 0 && r < tx.rows() && c >= 0 && c < tx.cols(),
              "take_elements: position out of range");
    out[static_cast<int64_t>(i)] = tx.at(r, c);
  }
  auto pos = std::make_shared<std::vector<std::pair<int64_t, int64_t>>>(std::move(positions));
  return push(std::move(out), wants_grad(x), [x, pos](Tape& t, int32_t self) {
    if (!t.wants_grad(x)) return;
    const Tensor& g = t.nodes_[self].grad;
    Tensor& gx = t.grad_buffer(x.idx);
    for (size_t i = 0; i < pos->size(); ++i)
      gx.at((*pos)[i].first, (*pos)[i].second) += g[static_cast<int64_t>(i)];
  });
}

Var Tape::dot_const(Var x, Tensor weights) {
  const Tensor& tx = value(x);
  check_arg(tx.numel() == weights.numel(), "dot_const: size mismatch");
  Tensor out = Tensor::scalar(tx.flat().dot(weights.flat()));
  auto w = std::make_shared<Tensor>(std::move(weights));
  return push(std::move(out), wants_grad(x), [x, w](Tape& t, int32_t self) {
    if (t.wants_grad(x))
      t.grad_buffer(x.idx).flat() += t.nodes_[self].grad[0] * w->flat();
  });
}

Var Tape::normalize_rows(Var x, double min_norm) {
  const Tensor& tx = value(x);
  Tensor out(tx.shape());
  auto norms = std::make_shared<Eigen::VectorXd>(tx.rows());
  for (int64_t i = 0; i < tx.rows(); ++i) {
    double nrm = tx.mat().row(i).norm();
    check(nrm >= min_norm, ErrorKind::Numeric,
          "normalize_rows: row " + std::to_string(i) + " has near-zero norm");
    (*norms)(i) = nrm;
    out.mat().row(i) = tx.mat().row(i) / nrm;
  }
  return push(std::move(out), wants_grad(x), [x, norms](Tape& t, int32_t self) {
    if (!t.wants_grad(x)) return;
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& y = t.nodes_[self].value;
    auto gx = t.grad_buffer(x.idx).mat();
    for (int64_t i = 0; i < y.rows(); ++i) {
      double d = g.mat().row(i).dot(y.mat().row(i));
      gx.row(i) += (g.mat().row(i) - d * y.mat().row(i)) / (*norms)(i);
    }
  });
}

Var Tape::pair_distance(Var x, std::vector<std::pair<int64_t, int64_t>> pairs) {
  const Tensor& tx = value(x);
  Tensor out(Shape{static_cast<int64_t>(pairs.size())});
  for (size_t i = 0; i < pairs.size(); ++i) {
    auto [a, b] = pairs[i];
    check_arg(a >= 0 && a < tx.rows() && b >= 0 && b < tx.rows(),
              "pair_distance: row index out of range");
    out[static_cast<int64_t>(i)] = (tx.mat().row(a) - tx.mat().row(b)).norm();
  }
  auto ps = std::make_shared<std::vector<std::pair<int64_t, int64_t>>>(std::move(pairs));
  return push(std::move(out), wants_grad(x), [x, ps](Tape& t, int32_t self) {
    if (!t.wants_grad(x)) return;
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& dist = t.nodes_[self].value;
    const Tensor& tx = t.value(x);
    auto gx = t.grad_buffer(x.idx).mat();
    for (size_t i = 0; i < ps->size(); ++i) {
      double d = dist[static_cast<int64_t>(i)];
      if (d <= 1e-12) continue;  // subgradient 0 at coincident points
      auto [a, b] = (*ps)[i];
      Eigen::RowVectorXd dir = (tx.mat().row(a) - tx.mat().row(b)) / d;
      double gi = g[static_cast<int64_t>(i)];
      gx.row(a) += gi * dir;
      gx.row(b) -= gi * dir;
    }
  });
}

Var Tape::attention(Var q, Var k, Var v, std::vector<AttnGroup> groups, int heads) {
  const Tensor& tq = value(q);
  const Tensor& tk = value(k);
  const Tensor& tv = value(v);
  int64_t w = tq.cols();
  check_arg(heads > 0 && w % heads == 0, "attention: width must divide by head count");
  check_arg(tk.cols() == w && tv.cols() == w, "attention: q/k/v width mismatch");
  int64_t dh = w / heads;
  double sc = 1.0 / std::sqrt(static_cast<double>(dh));

  Tensor out(tq.shape());
  auto probs = std::make_shared<std::vector<MatrixRM>>();
  probs->reserve(groups.size() * static_cast<size_t>(heads));
  for (const AttnGroup& g : groups) {
    check_arg(g.q_start >= 0 && g.q_count > 0 &&
                  g.q_start + (g.q_count - 1) * g.q_stride < tq.rows(),
              "attention: query group out of range");
    check_arg(g.kv_start >= 0 && g.kv_count > 0 &&
                  g.kv_start + (g.kv_count - 1) * g.kv_stride < tk.rows(),
              "attention: key group out of range");
    for (int h = 0; h < heads; ++h) {
      auto Q = strided(tq.data(), g.q_start, g.q_stride, g.q_count, h * dh, dh, w);
      auto K = strided(tk.data(), g.kv_start, g.kv_stride, g.kv_count, h * dh, dh, w);
      auto V = strided(tv.data(), g.kv_start, g.kv_stride, g.kv_count, h * dh, dh, w);
      MatrixRM S = sc * (Q * K.transpose());
      softmax_rows_inplace(S);
      strided(out.data(), g.q_start, g.q_stride, g.q_count, h * dh, dh, w).noalias() = S * V;
      if (capture_attention) captured_attention.push_back(S);
      probs->push_back(std::move(S));
    }
  }

  bool ng = wants_grad(q) || wants_grad(k) || wants_grad(v);
  auto gs = std::make_shared<std::vector<AttnGroup>>(std::move(groups));
  return push(std::move(out), ng, [q, k, v, gs, probs, heads, dh, sc, w](Tape& t, int32_t self) {
    const Tensor& go = t.nodes_[self].grad;
    const Tensor& tq = t.value(q);
    const Tensor& tk = t.value(k);
    const Tensor& tv = t.value(v);
    bool nq = t.wants_grad(q), nk = t.wants_grad(k), nv = t.wants_grad(v);
    double* gq = nq ? t.grad_buffer(q.idx).data() : nullptr;
    double* gk = nk ? t.grad_buffer(k.idx).data() : nullptr;
    double* gv = nv ? t.grad_buffer(v.idx).data() : nullptr;
    size_t pi = 0;
    for (const AttnGroup& g : *gs) {
      for (int h = 0; h < heads; ++h, ++pi) {
        const MatrixRM& A = (*probs)[pi];
        auto dO = strided(go.data(), g.q_start, g.q_stride, g.q_count, h * dh, dh, w);
        auto V = strided(tv.data(), g.kv_start, g.kv_stride, g.kv_count, h * dh, dh, w);
        if (nv)
          strided(gv, g.kv_start, g.kv_stride, g.kv_count, h * dh, dh, w).noalias() +=
              A.transpose() * dO;
        if (!nq && !nk) continue;
        MatrixRM dA = dO * V.transpose();
        Eigen::VectorXd rs = (dA.array() * A.array()).rowwise().sum().matrix();
        MatrixRM dS = sc * (A.array() * (dA.colwise() - rs).array()).matrix();
        auto Q = strided(tq.data(), g.q_start, g.q_stride, g.q_count, h * dh, dh, w);
        auto K = strided(tk.data(), g.kv_start, g.kv_stride, g.kv_count, h * dh, dh, w);
        if (nq)
          strided(gq, g.q_start, g.q_stride, g.q_count, h * dh, dh, w).noalias() += dS * K;
        if (nk)
          strided(gk, g.kv_start, g.kv_stride, g.kv_count, h * dh, dh, w).noalias() +=
              dS.transpose() * Q;
      }
    }
  });
}

Var Tape::blend(Var a, Var b, Var logits) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  const Tensor& tl = value(logits);
  check_arg(ta.same_shape(tb), "blend: input shape mismatch");
  check_arg(tl.rows() == 2 && tl.cols() == ta.cols(), "blend: logits must be (2, d)");
  int64_t d = ta.cols();
  // Per-feature convex weights: softmax over the two logits columns.
  auto w0 = std::make_shared<Eigen::VectorXd>(d);
  for (int64_t j = 0; j < d; ++j)
    (*w0)(j) = 1.0 / (1.0 + std::exp(tl.at(1, j) - tl.at(0, j)));
  Eigen::VectorXd w1 = Eigen::VectorXd::Ones(d) - *w0;
  Tensor out(ta.shape());
  out.mat().noalias() = ta.mat() * w0->asDiagonal();
  out.mat().noalias() += tb.mat() * w1.asDiagonal();
  bool ng = wants_grad(a) || wants_grad(b) || wants_grad(logits);
  return push(std::move(out), ng, [a, b, logits, w0](Tape& t, int32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    int64_t d = g.cols();
    Eigen::VectorXd w1 = Eigen::VectorXd::Ones(d) - *w0;
    if (t.wants_grad(a))
      t.grad_buffer(a.idx).mat().noalias() += g.mat() * w0->asDiagonal();
    if (t.wants_grad(b))
      t.grad_buffer(b.idx).mat().noalias() += g.mat() * w1.asDiagonal();
    if (t.wants_grad(logits)) {
      Eigen::RowVectorXd s =
          (g.mat().array() * (t.value(a).mat() - t.value(b).mat()).array())
              .colwise()
              .sum()
              .matrix();
      Eigen::RowVectorXd dl0 =
          (s.array() * w0->transpose().array() * w1.transpose().array()).matrix();
      auto gl = t.grad_buffer(logits.idx).mat();
      gl.row(0) += dl0;
      gl.row(1) -= dl0;
    }
  });
}

Var Tape::weighted_layer_sum(Var stacked, Var logits, int64_t layers) {
  const Tensor& tx = value(stacked);
  const Tensor& tl = value(logits);
  check_arg(tl.numel() == layers, "weighted_layer_sum: logits size must equal layer count");
  check_arg(layers > 0 && tx.rows() % layers == 0,
            "weighted_layer_sum: rows not divisible by layer count");
  int64_t n = tx.rows() / layers;
  int64_t d = tx.cols();
  auto wts = std::make_shared<Eigen::VectorXd>(layers);
  {
    double mx = tl.flat().maxCoeff();
    *wts = (tl.flat().array() - mx).exp().matrix();
    *wts /= wts->sum();
  }
  Tensor out(Shape{n, d});
  for (int64_t l = 0; l < layers; ++l)
    out.mat() += (*wts)(l)*tx.mat().middleRows(l * n, n);
  bool ng = wants_grad(stacked) || wants_grad(logits);
  return push(std::move(out), ng, [stacked, logits, layers, n, wts](Tape& t, int32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    const Tensor& tx = t.value(stacked);
    if (t.wants_grad(stacked)) {
      auto gx = t.grad_buffer(stacked.idx).mat();
      for (int64_t l = 0; l < layers; ++l)
        gx.middleRows(l * n, n) += (*wts)(l)*g.mat();
    }
    if (t.wants_grad(logits)) {
      Eigen::VectorXd dw(layers);
      for (int64_t l = 0; l < layers; ++l)
        dw(l) = (g.mat().array() * tx.mat().middleRows(l * n, n).array()).sum();
      double s = wts->dot(dw);
      t.grad_buffer(logits.idx).flat() += (wts->array() * (dw.array() - s)).matrix();
    }
  });
}

Var Tape::replace_rows(Var x, std::vector<uint8_t> flags, Var token) {
  const Tensor& tx = value(x);
  const Tensor& tt = value(token);
  check_arg(static_cast<int64_t>(flags.size()) == tx.rows(),
            "replace_rows: flag count must equal row count");
  check_arg(tt.numel() == tx.cols(), "replace_rows: token size must equal column count");
  Tensor out = tx;
  for (int64_t i = 0; i < tx.rows(); ++i)
    if (flags[static_cast<size_t>(i)]) out.mat().row(i) = tt.flat().transpose();
  auto fl = std::make_shared<std::vector<uint8_t>>(std::move(flags));
  bool ng = wants_grad(x) || wants_grad(token);
  return push(std::move(out), ng, [x, token, fl](Tape& t, int32_t self) {
    const Tensor& g = t.nodes_[self].grad;
    if (t.wants_grad(x)) {
      auto gx = t.grad_buffer(x.idx).mat();
      for (int64_t i = 0; i < g.rows(); ++i)
        if (!(*fl)[static_cast<size_t>(i)]) gx.row(i) += g.mat().row(i);
    }
    if (t.wants_grad(token)) {
      auto gt = t.grad_buffer(token.idx).flat();
      for (int64_t i = 0; i < g.rows(); ++i)
        if ((*fl)[static_cast<size_t>(i)]) gt += g.mat().row(i).transpose();
    }
  });
}

void Tape::backward(Var root) {
  check_arg(value(root).numel() == 1, "backward(root) requires a scalar root");
  backward({{root, Tensor::scalar(1.0)}});
}

void Tape::backward(const std::vector<std::pair<Var, Tensor>>& seeds) {
  check_arg(track_, "backward on a non-tracking tape");
  int32_t top = -1;
  for (const auto& [v, seed] : seeds) {
    const Node& n = node(v);
    check_arg(n.value.numel() == seed.numel(), "backward: seed shape mismatch");
    if (!n.needs_grad) continue;
    grad_buffer(v.idx).flat() += seed.flat();
    top = std::max(top, v.idx);
  }
  for (int32_t i = top; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (!n.needs_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, i);
    if (n.parameter) n.parameter->grad.flat() += n.grad.flat();
  }
}

}  // namespace gesturelab
