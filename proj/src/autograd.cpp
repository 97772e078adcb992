// SPDX-License-Identifier: Apache-2.0
#include "hnlg/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "hnlg/error.hpp"

namespace hnlg::numkit {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

const Tensor& Var::value() const { return graph->value(id); }

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return {this, nodes_.size() - 1};
}

Var Graph::param(Tensor& parameter) {
  if (auto it = param_ids_.find(&parameter); it != param_ids_.end()) return {this, it->second};
  nodes_.push_back(Node{Tensor(parameter.shape(), std::vector<double>(parameter.data().begin(), parameter.data().end())),
                        {}, {}, &parameter, record_});
  std::size_t id = nodes_.size() - 1;
  param_ids_.emplace(&parameter, id);
  return {this, id};
}

Var Graph::push(Tensor value, std::span<const std::size_t> inputs, BackwardFn backward) {
  bool needs = false;
  if (record_)
    for (auto in : inputs) needs = needs || nodes_[in].requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{}, nullptr, needs});
  return {this, nodes_.size() - 1};
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw ContractError("backward: loss belongs to another graph");
  if (nodes_[loss.id].value.size() != 1)
    throw ContractError("backward: loss must be scalar, got shape " + shape_str(nodes_[loss.id].value.shape()));
  if (!record_) throw ContractError("backward: graph was built without recording");
  for (std::size_t i = 0; i <= loss.id; ++i) {
    auto& n = nodes_[i];
    if (n.requires_grad) n.grad.assign(n.value.size(), 0.0);
  }
  if (!nodes_[loss.id].requires_grad) return;
  nodes_[loss.id].grad[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& n = nodes_[i];
    if (n.backward) n.backward(*this, i);
  }
  for (std::size_t i = 0; i <= loss.id; ++i) {
    auto& n = nodes_[i];
    if (!n.parameter || !n.requires_grad) continue;
    auto g = n.parameter->grad();
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
  }
}

namespace {

enum class Bcast { same, row, col, scalar };

Bcast classify(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Bcast::same;
  if (b.size() == 1) return Bcast::scalar;
  if (b.size() == a.cols() && b.cols() == a.cols()) return Bcast::row;
  if (b.size() == a.rows() && b.cols() == 1 && a.size() != b.size()) return Bcast::col;
  if (a.size() == b.size() && a.cols() == b.cols()) return Bcast::same;
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " +
                       shape_str(b.shape()));
}

inline std::size_t bindex(Bcast kind, std::size_t r, std::size_t c, std::size_t cols) {
  switch (kind) {
    case Bcast::same: return r * cols + c;
    case Bcast::row: return c;
    case Bcast::col: return r;
    case Bcast::scalar: return 0;
  }
  return 0;
}

bool broadcasts_left(const Tensor& a, const Tensor& b) {
  return a.size() < b.size();
}

template <typename Fwd, typename Bwd>
Var unary(Var a, Fwd fwd, Bwd bwd) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  Tensor out(av.shape());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  std::size_t in[] = {a.id};
  return g.push(std::move(out), in, [a = a.id, bwd](Graph& g, std::size_t self) {
    if (!g.requires_grad(a)) return;
    const auto& y = g.value(self);
    const auto& x = g.value(a);
    const auto& gy = g.grad(self);
    auto& gx = g.grad(a);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * bwd(x[i], y[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (bv.rank() != 2 || av.rank() > 2 || av.cols() != bv.shape()[0])
    throw DimensionError("matmul: inner dimensions disagree for " + shape_str(av.shape()) + " x " +
                         shape_str(bv.shape()));
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  Tensor out(av.rank() == 1 ? Shape{n} : Shape{m, n});
  MutMap(out.data().data(), m, n).noalias() = ConstMap(av.data().data(), m, k) * ConstMap(bv.data().data(), k, n);
  std::size_t in[] = {a.id, b.id};
  return g.push(std::move(out), in, [a = a.id, b = b.id, m, k, n](Graph& g, std::size_t self) {
    ConstMap gy(g.grad(self).data(), m, n);
    if (g.requires_grad(a)) {
      MutMap(g.grad(a).data(), m, k).noalias() += gy * ConstMap(g.value(b).data().data(), k, n).transpose();
    }
    if (g.requires_grad(b)) {
      MutMap(g.grad(b).data(), k, n).noalias() += ConstMap(g.value(a).data().data(), m, k).transpose() * gy;
    }
  });
}

Var add(Var a, Var b) {
  if (broadcasts_left(a.value(), b.value())) std::swap(a, b);
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Bcast kind = classify(av, bv, "add");
  Tensor out(av.shape());
  const std::size_t rows = av.rows(), cols = av.cols();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = av[r * cols + c] + bv[bindex(kind, r, c, cols)];
  std::size_t in[] = {a.id, b.id};
  return g.push(std::move(out), in, [a = a.id, b = b.id, kind, rows, cols](Graph& g, std::size_t self) {
    const auto& gy = g.grad(self);
    if (g.requires_grad(a)) {
      auto& ga = g.grad(a);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
    }
    if (g.requires_grad(b)) {
      auto& gb = g.grad(b);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gb[bindex(kind, r, c, cols)] += gy[r * cols + c];
    }
  });
}

Var sub(Var a, Var b) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Bcast kind = classify(av, bv, "sub");
  Tensor out(av.shape());
  const std::size_t rows = av.rows(), cols = av.cols();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = av[r * cols + c] - bv[bindex(kind, r, c, cols)];
  std::size_t in[] = {a.id, b.id};
  return g.push(std::move(out), in, [a = a.id, b = b.id, kind, rows, cols](Graph& g, std::size_t self) {
    const auto& gy = g.grad(self);
    if (g.requires_grad(a)) {
      auto& ga = g.grad(a);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
    }
    if (g.requires_grad(b)) {
      auto& gb = g.grad(b);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gb[bindex(kind, r, c, cols)] -= gy[r * cols + c];
    }
  });
}

Var mul(Var a, Var b) {
  if (broadcasts_left(a.value(), b.value())) std::swap(a, b);
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Bcast kind = classify(av, bv, "mul");
  Tensor out(av.shape());
  const std::size_t rows = av.rows(), cols = av.cols();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = av[r * cols + c] * bv[bindex(kind, r, c, cols)];
  std::size_t in[] = {a.id, b.id};
  return g.push(std::move(out), in, [a = a.id, b = b.id, kind, rows, cols](Graph& g, std::size_t self) {
    const auto& gy = g.grad(self);
    const auto& av = g.value(a);
    const auto& bv = g.value(b);
    if (g.requires_grad(a)) {
      auto& ga = g.grad(a);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += gy[r * cols + c] * bv[bindex(kind, r, c, cols)];
    }
    if (g.requires_grad(b)) {
      auto& gb = g.grad(b);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gb[bindex(kind, r, c, cols)] += gy[r * cols + c] * av[r * cols + c];
    }
  });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var one_minus(Var a) {
  return unary(a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var concat_lastdim(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_lastdim: no inputs");
  Graph& g = *parts[0].graph;
  const std::size_t rows = parts[0].rows();
  const bool vector_out = parts[0].value().rank() == 1;
  std::size_t total = 0;
  std::vector<std::size_t> ids, widths;
  for (const auto& p : parts) {
    if (p.rows() != rows)
      throw DimensionError("concat_lastdim: row count mismatch " + shape_str(parts[0].value().shape()) + " vs " +
                           shape_str(p.value().shape()));
    ids.push_back(p.id);
    widths.push_back(p.cols());
    total += p.cols();
  }
  Tensor out(vector_out ? Shape{total} : Shape{rows, total});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    const std::size_t w = v.cols();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(v.data().data() + r * w, w, out.data().data() + r * total + offset);
    offset += w;
  }
  return g.push(std::move(out), ids, [ids, widths, rows, total](Graph& g, std::size_t self) {
    const auto& gy = g.grad(self);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t w = widths[k];
      if (g.requires_grad(ids[k])) {
        auto& gx = g.grad(ids[k]);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < w; ++c) gx[r * w + c] += gy[r * total + offset + c];
      }
      offset += w;
    }
  });
}

Var slice_lastdim(Var a, std::size_t begin, std::size_t count) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  if (count == 0 || begin + count > cols)
    throw DimensionError("slice_lastdim: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") outside " + shape_str(av.shape()));
  Tensor out(av.rank() == 1 ? Shape{count} : Shape{rows, count});
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(av.data().data() + r * cols + begin, count, out.data().data() + r * count);
  std::size_t in[] = {a.id};
  return g.push(std::move(out), in, [a = a.id, begin, count, rows, cols](Graph& g, std::size_t self) {
    const auto& gy = g.grad(self);
    auto& gx = g.grad(a);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < count; ++c) gx[r * cols + begin + c] += gy[r * count + c];
  });
}

Var softmax_lastdim(Var a) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out(av.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = av.data().data() + r * cols;
    double* y = out.data().data() + r * cols;
    double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (y[c] = std::exp(x[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) y[c] /= z;
  }
  std::size_t in[] = {a.id};
  return g.push(std::move(out), in, [a = a.id, rows, cols](Graph& g, std::size_t self) {
    const auto& gy = g.grad(self);
    const auto& y = g.value(self);
    auto& gx = g.grad(a);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += gy[r * cols + c] * y[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += y[r * cols + c] * (gy[r * cols + c] - dot);
    }
  });
}

Var row_dot(Var a, Var b) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows() || av.cols() != bv.cols())
    throw DimensionError("row_dot: shape mismatch " + shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor out({rows, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += av[r * cols + c] * bv[r * cols + c];
    out[r] = s;
  }
  std::size_t in[] = {a.id, b.id};
  return g.push(std::move(out), in, [a = a.id, b = b.id, rows, cols](Graph& g, std::size_t self) {
    const auto& gy = g.grad(self);
    const auto& av = g.value(a);
    const auto& bv = g.value(b);
    if (g.requires_grad(a)) {
      auto& ga = g.grad(a);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += gy[r] * bv[r * cols + c];
    }
    if (g.requires_grad(b)) {
      auto& gb = g.grad(b);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gb[r * cols + c] += gy[r] * av[r * cols + c];
    }
  });
}

Var sum(Var a) {
  Graph& g = *a.graph;
  const Tensor& av = a.value();
  double s = 0.0;
  for (double v : av.data()) s += v;
  std::size_t in[] = {a.id};
  return g.push(Tensor::scalar(s), in, [a = a.id](Graph& g, std::size_t self) {
    const double gy = g.grad(self)[0];
    for (auto& v : g.grad(a)) v += gy;
  });
}

Var embedding(Var table, std::span<const int> ids) {
  Graph& g = *table.graph;
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw DimensionError("embedding: table must be rank 2, got " + shape_str(tv.shape()));
  const std::size_t vocab = tv.shape()[0], dim = tv.cols();
  std::vector<int> rows(ids.begin(), ids.end());
  Tensor out({rows.size(), dim});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || static_cast<std::size_t>(rows[r]) >= vocab)
      throw DimensionError("embedding: id " + std::to_string(rows[r]) + " outside table of " + std::to_string(vocab));
    std::copy_n(tv.data().data() + rows[r] * dim, dim, out.data().data() + r * dim);
  }
  std::size_t in[] = {table.id};
  return g.push(std::move(out), in, [t = table.id, rows = std::move(rows), dim](Graph& g, std::size_t self) {
    const auto& gy = g.grad(self);
    auto& gt = g.grad(t);
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < dim; ++c) gt[rows[r] * dim + c] += gy[r * dim + c];
  });
}

Var masked_nll_sum(Var logits, std::span<const int> targets, std::span<const double> mask) {
  Graph& g = *logits.graph;
  const Tensor& lv = logits.value();
  const std::size_t rows = lv.rows(), cols = lv.cols();
  if (targets.size() != rows || mask.size() != rows)
    throw DimensionError("masked_nll_sum: " + std::to_string(targets.size()) + " targets and " +
                         std::to_string(mask.size()) + " mask entries for " + std::to_string(rows) + " rows");
  Tensor probs({rows, cols});
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = lv.data().data() + r * cols;
    double* p = probs.data().data() + r * cols;
    double mx = *std::max_element(x, x + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (p[c] = std::exp(x[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) p[c] /= z;
    if (mask[r] == 0.0) continue;
    if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= cols)
      throw DimensionError("masked_nll_sum: target " + std::to_string(targets[r]) + " outside " +
                           std::to_string(cols) + " classes");
    total += mask[r] * (mx + std::log(z) - x[targets[r]]);
  }
  std::size_t in[] = {logits.id};
  return g.push(Tensor::scalar(total), in,
                [l = logits.id, probs = std::move(probs), t = std::vector<int>(targets.begin(), targets.end()),
                 m = std::vector<double>(mask.begin(), mask.end()), rows, cols](Graph& g, std::size_t self) {
                  const double gy = g.grad(self)[0];
                  auto& gl = g.grad(l);
                  for (std::size_t r = 0; r < rows; ++r) {
                    if (m[r] == 0.0) continue;
                    const double w = gy * m[r];
                    for (std::size_t c = 0; c < cols; ++c) gl[r * cols + c] += w * probs[r * cols + c];
                    gl[r * cols + t[r]] -= w;
                  }
                });
}

Var elementwise(OpKind kind, std::span<const Var> inputs) {
  auto need = [&](std::size_t n) {
    if (inputs.size() != n)
      throw DimensionError("elementwise: expected " + std::to_string(n) + " inputs, got " +
                           std::to_string(inputs.size()));
  };
  switch (kind) {
    case OpKind::sigmoid: need(1); return sigmoid(inputs[0]);
    case OpKind::tanh: need(1); return tanh(inputs[0]);
    case OpKind::softmax_lastdim: need(1); return softmax_lastdim(inputs[0]);
    case OpKind::add: need(2); return add(inputs[0], inputs[1]);
    case OpKind::mul: need(2); return mul(inputs[0], inputs[1]);
    case OpKind::concat_lastdim: return concat_lastdim(inputs);
  }
  throw ContractError("elementwise: unknown op kind");
}

std::vector<int> argmax_rows(const Tensor& t) {
  std::vector<int> out(t.rows());
  const std::size_t cols = t.cols();
  for (std::size_t r = 0; r < t.rows(); ++r) {
    const double* x = t.data().data() + r * cols;
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c)
      if (x[c] > x[best]) best = c;
    out[r] = static_cast<int>(best);
  }
  return out;
}

}  // namespace hnlg::numkit
