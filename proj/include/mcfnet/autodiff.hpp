#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mcfnet/errors.hpp"
#include "mcfnet/rng.hpp"

// Reverse-mode autodiff over dense 64-bit tensors. Ops execute eagerly and
// record a parent-pointer DAG; backward() walks the DAG in reverse
// topological order. Gradients accumulate until sgd_step() zeroes them, so a
// weighted multi-loss objective can call backward once on the combined
// scalar and shared weights collect every contribution.

namespace mcf {

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s.empty() ? "scalar" : s;
}

enum class Op {
  kLeaf,
  kAdd,
  kMul,
  kScale,
  kSum,
  kRelu,
  kFlatten,
  kConcat,
  kDense,
  kConv2d,
  kGlobalAvgPool,
  kSoftmaxCrossEntropy,
};

struct TensorNode {
  std::uint64_t id = 0;
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until backward first touches the node
  bool requires_grad = false;
  Op op = Op::kLeaf;
  std::vector<std::shared_ptr<TensorNode>> inputs;

  // Op parameters.
  int stride = 1;           // conv2d
  double factor = 1.0;      // scale
  std::vector<int> labels;  // softmax_cross_entropy targets
  std::vector<double> softmax_cache;  // row softmax saved for the CE backward
};

namespace detail {

inline std::uint64_t next_node_id() {
  static std::uint64_t counter = 0;
  return ++counter;
}

inline void ensure_grad(TensorNode& node) {
  if (node.grad.empty()) node.grad.assign(node.values.size(), 0.0);
}

}  // namespace detail

// Value-semantics handle to a node in the autodiff graph. Copies share the
// node, so a parameter tensor held by a model and referenced by many graph
// frames accumulates gradient in one place.
class Tensor {
 public:
  Tensor() = default;

  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false) {
    for (int d : shape) {
      if (d <= 0) throw Error(ErrorCode::kShapeMismatch, "non-positive extent in shape " + shape_str(shape));
    }
    if (numel(shape) != values.size()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "shape " + shape_str(shape) + " holds " + std::to_string(numel(shape)) +
                      " values, got " + std::to_string(values.size()));
    }
    node_ = std::make_shared<TensorNode>();
    node_->id = detail::next_node_id();
    node_->shape = std::move(shape);
    node_->values = std::move(values);
    node_->requires_grad = requires_grad;
  }

  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    std::vector<double> v(numel(shape), 0.0);
    return Tensor(std::move(shape), std::move(v), requires_grad);
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    std::vector<double> v(numel(shape), value);
    return Tensor(std::move(shape), std::move(v), requires_grad);
  }

  bool valid() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->values.size(); }
  std::uint64_t id() const { return node_->id; }
  bool requires_grad() const { return node_->requires_grad; }
  Op op() const { return node_->op; }

  const std::vector<double>& values() const { return node_->values; }

  // Mutable access is meant for leaves (parameter updates, input refill).
  std::vector<double>& values() { return node_->values; }

  bool has_grad() const { return !node_->grad.empty(); }

  const std::vector<double>& grad() const {
    if (node_->grad.empty()) {
      throw Error(ErrorCode::kMissingGradient, "tensor node " + std::to_string(node_->id) + " has no gradient");
    }
    return node_->grad;
  }

  double item() const {
    if (size() != 1) {
      throw Error(ErrorCode::kShapeMismatch, "item() on tensor of shape " + shape_str(shape()));
    }
    return node_->values[0];
  }

  const std::shared_ptr<TensorNode>& node() const { return node_; }

 private:
  std::shared_ptr<TensorNode> node_;
};

namespace detail {

inline Tensor make_op_node(Shape shape, std::vector<double> values, Op op,
                           std::vector<std::shared_ptr<TensorNode>> inputs) {
  Tensor out(std::move(shape), std::move(values));
  TensorNode& n = *out.node();
  n.op = op;
  n.inputs = std::move(inputs);
  for (const auto& in : n.inputs) {
    if (in->requires_grad) n.requires_grad = true;
  }
  return out;
}

inline void require_valid(const Tensor& t, const char* what) {
  if (!t.valid()) throw Error(ErrorCode::kShapeMismatch, std::string(what) + ": null tensor");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and reduction ops
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::require_valid(a, "add");
  detail::require_valid(b, "add");
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::kShapeMismatch, "add: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
  return detail::make_op_node(a.shape(), std::move(out), Op::kAdd, {a.node(), b.node()});
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::require_valid(a, "mul");
  detail::require_valid(b, "mul");
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::kShapeMismatch, "mul: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] * b.values()[i];
  return detail::make_op_node(a.shape(), std::move(out), Op::kMul, {a.node(), b.node()});
}

inline Tensor scale(const Tensor& a, double factor) {
  detail::require_valid(a, "scale");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * a.values()[i];
  Tensor t = detail::make_op_node(a.shape(), std::move(out), Op::kScale, {a.node()});
  t.node()->factor = factor;
  return t;
}

inline Tensor sum(const Tensor& a) {
  detail::require_valid(a, "sum");
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  return detail::make_op_node({1}, {acc}, Op::kSum, {a.node()});
}

inline Tensor relu(const Tensor& a) {
  detail::require_valid(a, "relu");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] > 0.0 ? a.values()[i] : 0.0;
  return detail::make_op_node(a.shape(), std::move(out), Op::kRelu, {a.node()});
}

// Batch-preserving reshape: [d0, rest...] -> [d0, prod(rest)].
inline Tensor flatten(const Tensor& a) {
  detail::require_valid(a, "flatten");
  if (a.shape().empty()) throw Error(ErrorCode::kShapeMismatch, "flatten: rank-0 tensor");
  int batch = a.shape()[0];
  int rest = static_cast<int>(a.size()) / batch;
  return detail::make_op_node({batch, rest}, a.values(), Op::kFlatten, {a.node()});
}

// Joins tensors along the last axis, in argument order. All other axes must
// agree.
inline Tensor concat_last_axis(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw Error(ErrorCode::kShapeMismatch, "concat: no inputs");
  for (const Tensor& p : parts) detail::require_valid(p, "concat");
  const Shape& first = parts[0].shape();
  int total_last = 0;
  for (const Tensor& p : parts) {
    const Shape& s = p.shape();
    if (s.size() != first.size() ||
        !std::equal(s.begin(), s.end() - 1, first.begin())) {
      throw Error(ErrorCode::kShapeMismatch,
                  "concat: " + shape_str(first) + " vs " + shape_str(s));
    }
    total_last += s.back();
  }
  Shape out_shape = first;
  out_shape.back() = total_last;

  std::size_t outer = numel(out_shape) / static_cast<std::size_t>(total_last);
  std::vector<double> out(numel(out_shape));
  std::size_t pos = 0;
  for (std::size_t o = 0; o < outer; ++o) {
    for (const Tensor& p : parts) {
      std::size_t k = static_cast<std::size_t>(p.shape().back());
      const double* src = p.values().data() + o * k;
      std::copy(src, src + k, out.begin() + static_cast<std::ptrdiff_t>(pos));
      pos += k;
    }
  }
  std::vector<std::shared_ptr<TensorNode>> ins;
  ins.reserve(parts.size());
  for (const Tensor& p : parts) ins.push_back(p.node());
  return detail::make_op_node(std::move(out_shape), std::move(out), Op::kConcat, std::move(ins));
}

// ---------------------------------------------------------------------------
// Linear algebra / convolution
// ---------------------------------------------------------------------------

// out[b,o] = sum_i x[b,i]*w[i,o] + bias[o], accumulated in ascending i so
// loop oracles can compare bit-exactly.
inline Tensor dense(const Tensor& x, const Tensor& w, const Tensor& bias) {
  detail::require_valid(x, "dense");
  detail::require_valid(w, "dense");
  detail::require_valid(bias, "dense");
  if (x.shape().size() != 2 || w.shape().size() != 2 || bias.shape().size() != 1) {
    throw Error(ErrorCode::kShapeMismatch,
                "dense: expected x[BxI], w[IxO], b[O], got " + shape_str(x.shape()) + ", " +
                    shape_str(w.shape()) + ", " + shape_str(bias.shape()));
  }
  const int batch = x.shape()[0], in = x.shape()[1];
  const int out_dim = w.shape()[1];
  if (w.shape()[0] != in || bias.shape()[0] != out_dim) {
    throw Error(ErrorCode::kShapeMismatch,
                "dense: inner dims disagree, x " + shape_str(x.shape()) + " w " +
                    shape_str(w.shape()) + " b " + shape_str(bias.shape()));
  }
  std::vector<double> out(static_cast<std::size_t>(batch) * out_dim);
  const double* xv = x.values().data();
  const double* wv = w.values().data();
  const double* bv = bias.values().data();
  for (int b = 0; b < batch; ++b) {
    for (int o = 0; o < out_dim; ++o) {
      double acc = 0.0;
      for (int i = 0; i < in; ++i) acc += xv[b * in + i] * wv[i * out_dim + o];
      out[static_cast<std::size_t>(b) * out_dim + o] = acc + bv[o];
    }
  }
  return detail::make_op_node({batch, out_dim}, std::move(out), Op::kDense,
                              {x.node(), w.node(), bias.node()});
}

// Valid-padding cross-correlation. x is [B,C,H,W], kernel is [F,C,Kh,Kw];
// the inner accumulation runs over (c, p, q) in row-major kernel order.
inline Tensor conv2d(const Tensor& x, const Tensor& kernel, int stride) {
  detail::require_valid(x, "conv2d");
  detail::require_valid(kernel, "conv2d");
  if (stride < 1) throw Error(ErrorCode::kInvalidConfig, "conv2d: stride must be >= 1");
  if (x.shape().size() != 4 || kernel.shape().size() != 4) {
    throw Error(ErrorCode::kShapeMismatch,
                "conv2d: expected x[BxCxHxW], k[FxCxKhxKw], got " + shape_str(x.shape()) + ", " +
                    shape_str(kernel.shape()));
  }
  const int batch = x.shape()[0], chans = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
  const int filters = kernel.shape()[0], kc = kernel.shape()[1];
  const int kh = kernel.shape()[2], kw = kernel.shape()[3];
  if (kc != chans) {
    throw Error(ErrorCode::kShapeMismatch,
                "conv2d: input has " + std::to_string(chans) + " channels, kernel expects " +
                    std::to_string(kc));
  }
  if (kh > h || kw > w) {
    throw Error(ErrorCode::kKernelTooLarge,
                "conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                    " exceeds input " + std::to_string(h) + "x" + std::to_string(w));
  }
  const int oh = (h - kh) / stride + 1;
  const int ow = (w - kw) / stride + 1;

  std::vector<double> out(static_cast<std::size_t>(batch) * filters * oh * ow);
  const double* xv = x.values().data();
  const double* kv = kernel.values().data();
  for (int n = 0; n < batch; ++n) {
    for (int f = 0; f < filters; ++f) {
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) {
          double acc = 0.0;
          for (int c = 0; c < chans; ++c) {
            const double* xplane = xv + (static_cast<std::size_t>(n) * chans + c) * h * w;
            const double* kplane = kv + (static_cast<std::size_t>(f) * chans + c) * kh * kw;
            for (int p = 0; p < kh; ++p) {
              const double* xrow = xplane + static_cast<std::size_t>(i * stride + p) * w + j * stride;
              const double* krow = kplane + static_cast<std::size_t>(p) * kw;
              for (int q = 0; q < kw; ++q) acc += xrow[q] * krow[q];
            }
          }
          out[(static_cast<std::size_t>(n) * filters + f) * oh * ow +
              static_cast<std::size_t>(i) * ow + j] = acc;
        }
      }
    }
  }
  Tensor t = detail::make_op_node({batch, filters, oh, ow}, std::move(out), Op::kConv2d,
                                  {x.node(), kernel.node()});
  t.node()->stride = stride;
  return t;
}

// out[b,c] = mean over the HxW plane.
inline Tensor global_avg_pool(const Tensor& x) {
  detail::require_valid(x, "global_avg_pool");
  if (x.shape().size() != 4) {
    throw Error(ErrorCode::kShapeMismatch, "global_avg_pool: expected [BxCxHxW], got " + shape_str(x.shape()));
  }
  const int batch = x.shape()[0], chans = x.shape()[1];
  const std::size_t plane = static_cast<std::size_t>(x.shape()[2]) * x.shape()[3];
  std::vector<double> out(static_cast<std::size_t>(batch) * chans);
  const double* xv = x.values().data();
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < chans; ++c) {
      const double* p = xv + (static_cast<std::size_t>(b) * chans + c) * plane;
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      out[static_cast<std::size_t>(b) * chans + c] = acc / static_cast<double>(plane);
    }
  }
  return detail::make_op_node({batch, chans}, std::move(out), Op::kGlobalAvgPool, {x.node()});
}

// Mean over the batch of -log softmax(logits)[label], stabilized by
// per-row max subtraction. Backward yields (softmax - one_hot) / B.
inline Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  detail::require_valid(logits, "softmax_cross_entropy");
  if (logits.shape().size() != 2) {
    throw Error(ErrorCode::kShapeMismatch,
                "softmax_cross_entropy: expected [BxK] logits, got " + shape_str(logits.shape()));
  }
  const int batch = logits.shape()[0], classes = logits.shape()[1];
  if (static_cast<int>(labels.size()) != batch) {
    throw Error(ErrorCode::kShapeMismatch,
                "softmax_cross_entropy: " + std::to_string(batch) + " rows vs " +
                    std::to_string(labels.size()) + " labels");
  }
  for (int y : labels) {
    if (y < 0 || y >= classes) {
      throw Error(ErrorCode::kLabelOutOfRange,
                  "label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
  }
  std::vector<double> probs(logits.size());
  const double* lv = logits.values().data();
  double total = 0.0;
  for (int b = 0; b < batch; ++b) {
    const double* row = lv + static_cast<std::size_t>(b) * classes;
    double m = row[0];
    for (int k = 1; k < classes; ++k) m = std::max(m, row[k]);
    double z = 0.0;
    double* prow = probs.data() + static_cast<std::size_t>(b) * classes;
    for (int k = 0; k < classes; ++k) {
      prow[k] = std::exp(row[k] - m);
      z += prow[k];
    }
    for (int k = 0; k < classes; ++k) prow[k] /= z;
    total += std::log(z) - (row[labels[b]] - m);
  }
  Tensor t = detail::make_op_node({1}, {total / batch}, Op::kSoftmaxCrossEntropy, {logits.node()});
  t.node()->labels = labels;
  t.node()->softmax_cache = std::move(probs);
  return t;
}

// Row softmax of plain values (inference paths; no graph node).
inline std::vector<double> softmax_rows(const std::vector<double>& logits, int classes) {
  std::vector<double> out(logits.size());
  const std::size_t rows = logits.size() / static_cast<std::size_t>(classes);
  for (std::size_t b = 0; b < rows; ++b) {
    const double* row = logits.data() + b * classes;
    double* orow = out.data() + b * classes;
    double m = row[0];
    for (int k = 1; k < classes; ++k) m = std::max(m, row[k]);
    double z = 0.0;
    for (int k = 0; k < classes; ++k) {
      orow[k] = std::exp(row[k] - m);
      z += orow[k];
    }
    for (int k = 0; k < classes; ++k) orow[k] /= z;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Backward pass
// ---------------------------------------------------------------------------

// Depth-first post-order over the DAG rooted at `root`: every input precedes
// its consumers, ids are unique, and the order is deterministic.
inline std::vector<std::shared_ptr<TensorNode>> topo_order(const Tensor& root) {
  std::vector<std::shared_ptr<TensorNode>> order;
  std::unordered_set<const TensorNode*> seen;
  // Explicit stack; (node, next input index to visit).
  std::vector<std::pair<std::shared_ptr<TensorNode>, std::size_t>> stack;
  if (!root.valid()) return order;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      auto child = node->inputs[next++];
      if (seen.insert(child.get()).second) stack.emplace_back(std::move(child), 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

namespace detail {

inline void backward_node(TensorNode& n) {
  const std::vector<double>& g = n.grad;
  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kAdd: {
      for (int s = 0; s < 2; ++s) {
        TensorNode& in = *n.inputs[s];
        if (!in.requires_grad) continue;
        ensure_grad(in);
        for (std::size_t i = 0; i < g.size(); ++i) in.grad[i] += g[i];
      }
      break;
    }
    case Op::kMul: {
      TensorNode& a = *n.inputs[0];
      TensorNode& b = *n.inputs[1];
      if (a.requires_grad) {
        ensure_grad(a);
        for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i] * b.values[i];
      }
      if (b.requires_grad) {
        ensure_grad(b);
        for (std::size_t i = 0; i < g.size(); ++i) b.grad[i] += g[i] * a.values[i];
      }
      break;
    }
    case Op::kScale: {
      TensorNode& a = *n.inputs[0];
      if (a.requires_grad) {
        ensure_grad(a);
        for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += n.factor * g[i];
      }
      break;
    }
    case Op::kSum: {
      TensorNode& a = *n.inputs[0];
      if (a.requires_grad) {
        ensure_grad(a);
        for (std::size_t i = 0; i < a.grad.size(); ++i) a.grad[i] += g[0];
      }
      break;
    }
    case Op::kRelu: {
      TensorNode& a = *n.inputs[0];
      if (a.requires_grad) {
        ensure_grad(a);
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (a.values[i] > 0.0) a.grad[i] += g[i];
        }
      }
      break;
    }
    case Op::kFlatten: {
      TensorNode& a = *n.inputs[0];
      if (a.requires_grad) {
        ensure_grad(a);
        for (std::size_t i = 0; i < g.size(); ++i) a.grad[i] += g[i];
      }
      break;
    }
    case Op::kConcat: {
      const std::size_t total_last = static_cast<std::size_t>(n.shape.back());
      const std::size_t outer = n.values.size() / total_last;
      std::size_t pos = 0;
      for (std::size_t o = 0; o < outer; ++o) {
        for (auto& inp : n.inputs) {
          TensorNode& a = *inp;
          const std::size_t k = static_cast<std::size_t>(a.shape.back());
          if (a.requires_grad) {
            ensure_grad(a);
            for (std::size_t i = 0; i < k; ++i) a.grad[o * k + i] += g[pos + i];
          }
          pos += k;
        }
      }
      break;
    }
    case Op::kDense: {
      TensorNode& x = *n.inputs[0];
      TensorNode& w = *n.inputs[1];
      TensorNode& bias = *n.inputs[2];
      const int batch = x.shape[0], in = x.shape[1], out_dim = w.shape[1];
      if (x.requires_grad) ensure_grad(x);
      if (w.requires_grad) ensure_grad(w);
      if (bias.requires_grad) ensure_grad(bias);
      for (int b = 0; b < batch; ++b) {
        for (int o = 0; o < out_dim; ++o) {
          const double go = g[static_cast<std::size_t>(b) * out_dim + o];
          if (bias.requires_grad) bias.grad[o] += go;
          for (int i = 0; i < in; ++i) {
            if (x.requires_grad) x.grad[b * in + i] += go * w.values[i * out_dim + o];
            if (w.requires_grad) w.grad[i * out_dim + o] += go * x.values[b * in + i];
          }
        }
      }
      break;
    }
    case Op::kConv2d: {
      TensorNode& x = *n.inputs[0];
      TensorNode& k = *n.inputs[1];
      const int stride = n.stride;
      const int batch = x.shape[0], chans = x.shape[1], h = x.shape[2], w = x.shape[3];
      const int filters = k.shape[0], kh = k.shape[2], kw = k.shape[3];
      const int oh = n.shape[2], ow = n.shape[3];
      if (x.requires_grad) ensure_grad(x);
      if (k.requires_grad) ensure_grad(k);
      for (int b = 0; b < batch; ++b) {
        for (int f = 0; f < filters; ++f) {
          for (int i = 0; i < oh; ++i) {
            for (int j = 0; j < ow; ++j) {
              const double go = g[(static_cast<std::size_t>(b) * filters + f) * oh * ow +
                                  static_cast<std::size_t>(i) * ow + j];
              if (go == 0.0) continue;
              for (int c = 0; c < chans; ++c) {
                const std::size_t xbase = (static_cast<std::size_t>(b) * chans + c) * h * w;
                const std::size_t kbase = (static_cast<std::size_t>(f) * chans + c) * kh * kw;
                for (int p = 0; p < kh; ++p) {
                  const std::size_t xrow = xbase + static_cast<std::size_t>(i * stride + p) * w + j * stride;
                  const std::size_t krow = kbase + static_cast<std::size_t>(p) * kw;
                  for (int q = 0; q < kw; ++q) {
                    if (x.requires_grad) x.grad[xrow + q] += go * k.values[krow + q];
                    if (k.requires_grad) k.grad[krow + q] += go * x.values[xrow + q];
                  }
                }
              }
            }
          }
        }
      }
      break;
    }
    case Op::kGlobalAvgPool: {
      TensorNode& x = *n.inputs[0];
      if (!x.requires_grad) break;
      ensure_grad(x);
      const int batch = x.shape[0], chans = x.shape[1];
      const std::size_t plane = static_cast<std::size_t>(x.shape[2]) * x.shape[3];
      const double inv = 1.0 / static_cast<double>(plane);
      for (int b = 0; b < batch; ++b) {
        for (int c = 0; c < chans; ++c) {
          const double go = g[static_cast<std::size_t>(b) * chans + c] * inv;
          double* p = x.grad.data() + (static_cast<std::size_t>(b) * chans + c) * plane;
          for (std::size_t i = 0; i < plane; ++i) p[i] += go;
        }
      }
      break;
    }
    case Op::kSoftmaxCrossEntropy: {
      TensorNode& logits = *n.inputs[0];
      if (!logits.requires_grad) break;
      ensure_grad(logits);
      const int batch = logits.shape[0], classes = logits.shape[1];
      const double go = g[0] / static_cast<double>(batch);
      for (int b = 0; b < batch; ++b) {
        const double* prow = n.softmax_cache.data() + static_cast<std::size_t>(b) * classes;
        double* grow = logits.grad.data() + static_cast<std::size_t>(b) * classes;
        for (int kk = 0; kk < classes; ++kk) {
          grow[kk] += go * (prow[kk] - (kk == n.labels[b] ? 1.0 : 0.0));
        }
      }
      break;
    }
  }
}

}  // namespace detail

// Accumulates dLoss/dTensor into every reachable requires_grad leaf.
// Leaf gradients are added to, not replaced; only sgd_step clears them.
// Interior-node gradients are scratch, reset on every call, so repeated
// backward passes over shared activations stay correct.
inline void backward(const Tensor& loss) {
  if (!loss.valid() || loss.size() != 1) {
    throw Error(ErrorCode::kNonScalarLoss,
                "backward needs a scalar loss, got " + (loss.valid() ? shape_str(loss.shape()) : "null"));
  }
  auto order = topo_order(loss);
  for (auto& n : order) {
    if (n->op != Op::kLeaf) n->grad.assign(n->values.size(), 0.0);
  }
  detail::ensure_grad(*loss.node());
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode& n = **it;
    if (n.op == Op::kLeaf || !n.requires_grad || n.grad.empty()) continue;
    detail::backward_node(n);
  }
}

// ---------------------------------------------------------------------------
// Optimizer and initialization
// ---------------------------------------------------------------------------

struct SgdConfig {
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
};

// p <- p - lr * grad(p), then gradients are zeroed. All params must carry a
// gradient before any of them is touched.
inline void sgd_step(std::vector<Tensor>& params, const SgdConfig& cfg) {
  if (!(cfg.learning_rate >= 0.0)) {
    throw Error(ErrorCode::kInvalidConfig, "sgd: learning_rate must be nonnegative");
  }
  for (const Tensor& p : params) {
    if (!p.valid() || !p.requires_grad() || !p.has_grad()) {
      throw Error(ErrorCode::kMissingGradient,
                  "sgd_step: parameter" + (p.valid() ? " node " + std::to_string(p.id()) : "") +
                      " has no gradient");
    }
  }
  for (Tensor& p : params) {
    std::vector<double>& v = p.values();
    const std::vector<double>& g = p.grad();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= cfg.learning_rate * g[i];
    std::fill(p.node()->grad.begin(), p.node()->grad.end(), 0.0);
  }
}

// Uniform init in [-s, s] with s = sqrt(6 / (fan_in + fan_out)).
inline Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out,
                             std::mt19937_64& rng) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(numel(shape));
  for (double& x : v) x = (2.0 * uniform_unit(rng) - 1.0) * s;
  return Tensor(std::move(shape), std::move(v), /*requires_grad=*/true);
}

}  // namespace mcf
