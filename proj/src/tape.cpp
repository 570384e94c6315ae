#include "tintegrate/tape.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ti {

namespace {
using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using CMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Rows/cols of a node treated as a matrix; vectors are 1 x n.
std::pair<long, long> as_matrix(const Tensor& t) {
  if (t.rank() == 1) return {1, t.dim(0)};
  if (t.rank() == 2) return {t.dim(0), t.dim(1)};
  throw std::invalid_argument("op expects rank <= 2, got " + t.shape_str());
}
}  // namespace

void ParamSet::add(Parameter* p) {
  if (find(p->name)) throw std::invalid_argument("duplicate parameter name: " + p->name);
  params_.push_back(p);
}

void ParamSet::extend(const ParamSet& other) {
  for (Parameter* p : other.items()) add(p);
}

Parameter* ParamSet::find(const std::string& name) const {
  for (Parameter* p : params_)
    if (p->name == name) return p;
  return nullptr;
}

long ParamSet::scalar_count() const {
  long n = 0;
  for (const Parameter* p : params_) n += p->value.numel();
  return n;
}

void ParamSet::zero_grad() {
  for (Parameter* p : params_) std::fill(p->grad.vec().begin(), p->grad.vec().end(), 0.0);
}

Tape::Tape() { nodes_.reserve(256); }

NodeId Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

void Tape::check(NodeId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
    throw std::invalid_argument("node id out of range");
}

NodeId Tape::constant(Tensor v) {
  Node n;
  n.op = Op::kConst;
  n.value = std::move(v);
  return push(std::move(n));
}

NodeId Tape::param(Parameter& p) {
  Node n;
  n.op = Op::kParam;
  n.value = p.value;
  n.needs_grad = true;
  n.leaf = &p;
  return push(std::move(n));
}

NodeId Tape::unary(Op op, NodeId a, Tensor value) {
  check(a);
  Node n;
  n.op = op;
  n.a = a;
  n.needs_grad = nodes_[a].needs_grad;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  check(a);
  check(b);
  Node n;
  n.op = Op::kMatmul;
  n.a = a;
  n.b = b;
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  n.value = matmul_value(nodes_[a].value, nodes_[b].value);
  return push(std::move(n));
}

NodeId Tape::matmul_nt(NodeId a, NodeId b) {
  check(a);
  check(b);
  Node n;
  n.op = Op::kMatmulNT;
  n.a = a;
  n.b = b;
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  n.value = matmul_nt_value(nodes_[a].value, nodes_[b].value);
  return push(std::move(n));
}

NodeId Tape::add(NodeId a, NodeId b) {
  check(a);
  check(b);
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[b].value;
  Node n;
  n.a = a;
  n.b = b;
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  if (av.same_shape(bv)) {
    n.op = Op::kAdd;
    n.value = add_value(av, bv);
  } else if (av.rank() == 2 && bv.rank() == 1 && av.dim(1) == bv.dim(0)) {
    n.op = Op::kAddRow;
    n.value = av;
    const long rows = av.dim(0), cols = av.dim(1);
    for (long i = 0; i < rows; ++i)
      for (long j = 0; j < cols; ++j) n.value.at(i, j) += bv.at(j);
  } else {
    throw std::invalid_argument("add shape mismatch: " + av.shape_str() + " + " + bv.shape_str());
  }
  return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  check(a);
  check(b);
  if (!nodes_[a].value.same_shape(nodes_[b].value))
    throw std::invalid_argument("sub shape mismatch: " + nodes_[a].value.shape_str() + " - " +
                                nodes_[b].value.shape_str());
  Node n;
  n.op = Op::kSub;
  n.a = a;
  n.b = b;
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  n.value = sub_value(nodes_[a].value, nodes_[b].value);
  return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  check(a);
  check(b);
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[b].value;
  Node n;
  n.a = a;
  n.b = b;
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  if (av.same_shape(bv)) {
    n.op = Op::kMul;
    n.value = av;
    for (long i = 0; i < av.numel(); ++i) n.value.at(i) *= bv.at(i);
  } else if (av.rank() == 2 && bv.rank() == 2 && bv.dim(1) == 1 && av.dim(0) == bv.dim(0)) {
    n.op = Op::kMulCol;
    n.value = av;
    for (long i = 0; i < av.dim(0); ++i)
      for (long j = 0; j < av.dim(1); ++j) n.value.at(i, j) *= bv.at(i, 0);
  } else {
    throw std::invalid_argument("mul shape mismatch: " + av.shape_str() + " * " + bv.shape_str());
  }
  return push(std::move(n));
}

NodeId Tape::scale(NodeId a, double c) {
  check(a);
  Tensor v = scale_value(nodes_[a].value, c);
  NodeId id = unary(Op::kScale, a, std::move(v));
  nodes_[id].c = c;
  return id;
}

NodeId Tape::tanh(NodeId a) {
  check(a);
  Tensor v = nodes_[a].value;
  for (double& x : v.vec()) x = std::tanh(x);
  return unary(Op::kTanh, a, std::move(v));
}

NodeId Tape::sin(NodeId a) {
  check(a);
  Tensor v = nodes_[a].value;
  for (double& x : v.vec()) x = std::sin(x);
  return unary(Op::kSin, a, std::move(v));
}

NodeId Tape::gelu(NodeId a) {
  check(a);
  Tensor v = nodes_[a].value;
  for (double& x : v.vec()) x = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
  return unary(Op::kGelu, a, std::move(v));
}

NodeId Tape::relu(NodeId a) {
  check(a);
  Tensor v = nodes_[a].value;
  for (double& x : v.vec()) x = x > 0.0 ? x : 0.0;
  return unary(Op::kRelu, a, std::move(v));
}

NodeId Tape::softmax(NodeId a) {
  check(a);
  const Tensor& x = nodes_[a].value;
  auto [rows, cols] = as_matrix(x);
  if (cols < 1) throw std::invalid_argument("softmax needs at least one column");
  Tensor y = x;
  double* d = y.data();
  for (long i = 0; i < rows; ++i) {
    double* row = d + i * cols;
    double m = row[0];
    for (long j = 1; j < cols; ++j) m = std::max(m, row[j]);
    double s = 0.0;
    for (long j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - m);
      s += row[j];
    }
    for (long j = 0; j < cols; ++j) row[j] /= s;
  }
  return unary(Op::kSoftmax, a, std::move(y));
}

NodeId Tape::sum(NodeId a) {
  check(a);
  double s = 0.0;
  for (double v : nodes_[a].value.vec()) s += v;
  return unary(Op::kSum, a, Tensor::scalar(s));
}

NodeId Tape::mean(NodeId a) {
  check(a);
  double s = 0.0;
  for (double v : nodes_[a].value.vec()) s += v;
  return unary(Op::kMean, a, Tensor::scalar(s / static_cast<double>(nodes_[a].value.numel())));
}

NodeId Tape::square(NodeId a) {
  check(a);
  Tensor v = nodes_[a].value;
  for (double& x : v.vec()) x *= x;
  return unary(Op::kSquare, a, std::move(v));
}

NodeId Tape::concat_cols(NodeId a, NodeId b) {
  check(a);
  check(b);
  const Tensor& av = nodes_[a].value;
  const Tensor& bv = nodes_[b].value;
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(0) != bv.dim(0))
    throw std::invalid_argument("concat_cols shape mismatch: " + av.shape_str() + " | " +
                                bv.shape_str());
  Node n;
  n.op = Op::kConcat;
  n.a = a;
  n.b = b;
  n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  const long rows = av.dim(0), ca = av.dim(1), cb = bv.dim(1);
  n.value = Tensor({rows, ca + cb});
  for (long i = 0; i < rows; ++i) {
    for (long j = 0; j < ca; ++j) n.value.at(i, j) = av.at(i, j);
    for (long j = 0; j < cb; ++j) n.value.at(i, ca + j) = bv.at(i, j);
  }
  return push(std::move(n));
}

Tensor& Tape::grad_buf(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.numel() == 0) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

void Tape::accumulate(NodeId id, const Tensor& g) {
  if (!nodes_[id].needs_grad) return;
  axpy(grad_buf(id), 1.0, g);
}

const Tensor& Tape::value(NodeId id) const {
  check(id);
  return nodes_[id].value;
}

Tensor Tape::grad(NodeId id) const {
  check(id);
  const Node& n = nodes_[id];
  if (n.grad.numel() == 0) return Tensor::zeros(n.value.shape());
  return n.grad;
}

void Tape::backward(NodeId root) {
  check(root);
  if (nodes_[root].value.numel() != 1)
    throw std::invalid_argument("backward root must be scalar, got " +
                                nodes_[root].value.shape_str());
  grad_buf(root).at(0) = 1.0;

  for (NodeId id = root; id >= 0; --id) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.grad.numel() == 0) continue;
    const Tensor& g = n.grad;
    switch (n.op) {
      case Op::kConst:
        break;
      case Op::kParam:
        axpy(n.leaf->grad, 1.0, g);
        break;
      case Op::kMatmul: {
        Node& a = nodes_[n.a];
        Node& b = nodes_[n.b];
        const long m = a.value.dim(0), k = a.value.dim(1), p = b.value.dim(1);
        CMatMap gm(g.data(), m, p);
        if (a.needs_grad)
          MatMap(grad_buf(n.a).data(), m, k).noalias() += gm * CMatMap(b.value.data(), k, p).transpose();
        if (b.needs_grad)
          MatMap(grad_buf(n.b).data(), k, p).noalias() += CMatMap(a.value.data(), m, k).transpose() * gm;
        break;
      }
      case Op::kMatmulNT: {
        Node& a = nodes_[n.a];
        Node& b = nodes_[n.b];
        const long m = a.value.dim(0), k = a.value.dim(1), p = b.value.dim(0);
        CMatMap gm(g.data(), m, p);
        if (a.needs_grad)
          MatMap(grad_buf(n.a).data(), m, k).noalias() += gm * CMatMap(b.value.data(), p, k);
        if (b.needs_grad)
          MatMap(grad_buf(n.b).data(), p, k).noalias() += gm.transpose() * CMatMap(a.value.data(), m, k);
        break;
      }
      case Op::kAdd:
        accumulate(n.a, g);
        accumulate(n.b, g);
        break;
      case Op::kAddRow: {
        accumulate(n.a, g);
        if (nodes_[n.b].needs_grad) {
          Tensor& gb = grad_buf(n.b);
          const long rows = g.dim(0), cols = g.dim(1);
          for (long i = 0; i < rows; ++i)
            for (long j = 0; j < cols; ++j) gb.at(j) += g.at(i, j);
        }
        break;
      }
      case Op::kSub: {
        accumulate(n.a, g);
        if (nodes_[n.b].needs_grad) axpy(grad_buf(n.b), -1.0, g);
        break;
      }
      case Op::kMul: {
        if (nodes_[n.a].needs_grad) {
          Tensor& ga = grad_buf(n.a);
          const Tensor& bv = nodes_[n.b].value;
          for (long i = 0; i < g.numel(); ++i) ga.at(i) += g.at(i) * bv.at(i);
        }
        if (nodes_[n.b].needs_grad) {
          Tensor& gb = grad_buf(n.b);
          const Tensor& av = nodes_[n.a].value;
          for (long i = 0; i < g.numel(); ++i) gb.at(i) += g.at(i) * av.at(i);
        }
        break;
      }
      case Op::kMulCol: {
        const Tensor& av = nodes_[n.a].value;
        const Tensor& bv = nodes_[n.b].value;
        const long rows = av.dim(0), cols = av.dim(1);
        if (nodes_[n.a].needs_grad) {
          Tensor& ga = grad_buf(n.a);
          for (long i = 0; i < rows; ++i)
            for (long j = 0; j < cols; ++j) ga.at(i, j) += g.at(i, j) * bv.at(i, 0);
        }
        if (nodes_[n.b].needs_grad) {
          Tensor& gb = grad_buf(n.b);
          for (long i = 0; i < rows; ++i) {
            double s = 0.0;
            for (long j = 0; j < cols; ++j) s += g.at(i, j) * av.at(i, j);
            gb.at(i, 0) += s;
          }
        }
        break;
      }
      case Op::kScale:
        if (nodes_[n.a].needs_grad) axpy(grad_buf(n.a), n.c, g);
        break;
      case Op::kTanh: {
        Tensor& ga = grad_buf(n.a);
        for (long i = 0; i < g.numel(); ++i) {
          const double y = n.value.at(i);
          ga.at(i) += g.at(i) * (1.0 - y * y);
        }
        break;
      }
      case Op::kSin: {
        Tensor& ga = grad_buf(n.a);
        const Tensor& x = nodes_[n.a].value;
        for (long i = 0; i < g.numel(); ++i) ga.at(i) += g.at(i) * std::cos(x.at(i));
        break;
      }
      case Op::kGelu: {
        Tensor& ga = grad_buf(n.a);
        const Tensor& x = nodes_[n.a].value;
        for (long i = 0; i < g.numel(); ++i) {
          const double xi = x.at(i);
          const double phi = 0.5 * (1.0 + std::erf(xi * kInvSqrt2));
          const double dens = kInvSqrt2Pi * std::exp(-0.5 * xi * xi);
          ga.at(i) += g.at(i) * (phi + xi * dens);
        }
        break;
      }
      case Op::kRelu: {
        Tensor& ga = grad_buf(n.a);
        const Tensor& x = nodes_[n.a].value;
        for (long i = 0; i < g.numel(); ++i) ga.at(i) += x.at(i) > 0.0 ? g.at(i) : 0.0;
        break;
      }
      case Op::kSoftmax: {
        Tensor& ga = grad_buf(n.a);
        auto [rows, cols] = as_matrix(n.value);
        for (long i = 0; i < rows; ++i) {
          double dot = 0.0;
          for (long j = 0; j < cols; ++j) dot += g.at(i * cols + j) * n.value.at(i * cols + j);
          for (long j = 0; j < cols; ++j) {
            const long idx = i * cols + j;
            ga.at(idx) += n.value.at(idx) * (g.at(idx) - dot);
          }
        }
        break;
      }
      case Op::kSum: {
        Tensor& ga = grad_buf(n.a);
        const double gs = g.at(0);
        for (long i = 0; i < ga.numel(); ++i) ga.at(i) += gs;
        break;
      }
      case Op::kMean: {
        Tensor& ga = grad_buf(n.a);
        const double gs = g.at(0) / static_cast<double>(ga.numel());
        for (long i = 0; i < ga.numel(); ++i) ga.at(i) += gs;
        break;
      }
      case Op::kSquare: {
        Tensor& ga = grad_buf(n.a);
        const Tensor& x = nodes_[n.a].value;
        for (long i = 0; i < g.numel(); ++i) ga.at(i) += 2.0 * x.at(i) * g.at(i);
        break;
      }
      case Op::kConcat: {
        const long rows = n.value.dim(0);
        const long ca = nodes_[n.a].value.dim(1), cb = nodes_[n.b].value.dim(1);
        if (nodes_[n.a].needs_grad) {
          Tensor& ga = grad_buf(n.a);
          for (long i = 0; i < rows; ++i)
            for (long j = 0; j < ca; ++j) ga.at(i, j) += g.at(i, j);
        }
        if (nodes_[n.b].needs_grad) {
          Tensor& gb = grad_buf(n.b);
          for (long i = 0; i < rows; ++i)
            for (long j = 0; j < cb; ++j) gb.at(i, j) += g.at(i, ca + j);
        }
        break;
      }
    }
  }
}

GradCheckResult grad_check(ParamSet& params, const std::function<double()>& loss,
                           const std::function<void()>& grads, double eps) {
  if (eps < 1e-7 || eps > 1e-4)
    throw std::invalid_argument("grad_check eps must lie in [1e-7, 1e-4]");

  params.zero_grad();
  grads();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (Parameter* p : params.items()) analytic.push_back(p->grad.vec());

  GradCheckResult res;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Parameter* p = params.items()[pi];
    for (long i = 0; i < p->value.numel(); ++i) {
      const double saved = p->value.at(i);
      p->value.at(i) = saved + eps;
      const double fp = loss();
      p->value.at(i) = saved - eps;
      const double fm = loss();
      p->value.at(i) = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        res.finite = false;
        res.worst_param = p->name;
        res.worst_index = i;
        res.max_rel_err = std::numeric_limits<double>::infinity();
        return res;
      }
      const double numeric = (fp - fm) / (2.0 * eps);
      const double rel =
          std::abs(analytic[pi][static_cast<std::size_t>(i)] - numeric) / std::max(1.0, std::abs(numeric));
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst_param = p->name;
        res.worst_index = i;
      }
    }
  }
  return res;
}

}  // namespace ti
