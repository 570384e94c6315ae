#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tintegrate/tensor.hpp"

namespace ti {

/// Named trainable tensor. Gradients accumulate additively into `grad`;
/// nothing zeroes them implicitly, callers reset between steps.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string name, Tensor v)
      : name(std::move(name)), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}
};

/// Flat view over the parameters of one model (plus any auxiliaries).
/// Names must be unique; order is the serialization order.
class ParamSet {
 public:
  void add(Parameter* p);
  void extend(const ParamSet& other);
  Parameter* find(const std::string& name) const;
  const std::vector<Parameter*>& items() const { return params_; }
  std::size_t size() const { return params_.size(); }
  long scalar_count() const;
  void zero_grad();

 private:
  std::vector<Parameter*> params_;
};

using NodeId = std::int32_t;
inline constexpr NodeId kNoNode = -1;

/// Append-only record of forward operations with reverse-mode accumulation.
///
/// Nodes are topologically ordered by construction (inputs always precede
/// users). A record is built fresh per training step, consumed by one
/// backward() call, and discarded; it is confined to a single execution
/// stream.
class Tape {
 public:
  Tape();

  /// Leaf that never receives a gradient (inputs, targets, grids).
  NodeId constant(Tensor v);
  /// Leaf bound to a Parameter; backward() accumulates into p.grad.
  NodeId param(Parameter& p);

  NodeId matmul(NodeId a, NodeId b);
  /// a @ bᵀ without materializing the transpose.
  NodeId matmul_nt(NodeId a, NodeId b);
  /// Equal shapes, or b a vector broadcast across the rows of matrix a.
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  /// Elementwise product. Equal shapes, or b of shape [B,1] broadcast across
  /// the columns of a [B,n].
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double c);
  NodeId tanh(NodeId a);
  NodeId sin(NodeId a);
  NodeId gelu(NodeId a);
  NodeId relu(NodeId a);
  /// Max-shifted softmax over the last dimension (rows of a matrix).
  NodeId softmax(NodeId a);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId square(NodeId a);
  /// Concatenate two matrices along columns.
  NodeId concat_cols(NodeId a, NodeId b);

  /// Reverse accumulation from a scalar root. Populates node gradients and
  /// scatters leaf gradients into their Parameters (additively).
  void backward(NodeId root);

  const Tensor& value(NodeId id) const;
  /// Gradient of the last backward root w.r.t. node `id` (zeros if the node
  /// was unreachable or grad-free).
  Tensor grad(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kConst, kParam, kMatmul, kMatmulNT, kAdd, kAddRow, kSub, kMul, kMulCol,
    kScale, kTanh, kSin, kGelu, kRelu, kSoftmax, kSum, kMean, kSquare, kConcat,
  };
  struct Node {
    Op op;
    NodeId a = kNoNode, b = kNoNode;
    Tensor value;
    Tensor grad;           // lazily sized
    bool needs_grad = false;
    double c = 0.0;        // scale factor
    Parameter* leaf = nullptr;
  };

  NodeId push(Node n);
  NodeId unary(Op op, NodeId a, Tensor value);
  Tensor& grad_buf(NodeId id);
  void accumulate(NodeId id, const Tensor& g);
  void check(NodeId id) const;

  std::vector<Node> nodes_;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  long worst_index = -1;
  bool finite = true;  // false when some perturbed evaluation was non-finite
};

/// Central-finite-difference check of the analytic gradient.
///
/// `loss` must rebuild the computation from the current parameter values and
/// return the scalar loss; `grads` must fill the analytic gradient for the
/// same point (typically: build tape, backward, read Parameter::grad).
/// Relative error per coordinate is |analytic - numeric| / max(1, |numeric|).
GradCheckResult grad_check(ParamSet& params, const std::function<double()>& loss,
                           const std::function<void()>& grads, double eps);

}  // namespace ti
