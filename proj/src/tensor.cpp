#include "tintegrate/tensor.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ti {

namespace {
using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using CMatMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
}  // namespace

long shape_numel(const std::vector<long>& shape) {
  long n = 1;
  for (long d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor extents must be positive");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<long> shape)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_numel(shape_)), 0.0) {}

Tensor::Tensor(std::vector<long> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != static_cast<long>(data_.size()))
    throw std::invalid_argument("tensor data length does not match shape " + shape_str());
}

Tensor::Tensor(std::initializer_list<double> row)
    : shape_{static_cast<long>(row.size())}, data_(row) {}

Tensor Tensor::zeros(std::vector<long> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<long> shape, double v) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), v);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
  os << ']';
  return os.str();
}

Tensor matmul_value(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw std::invalid_argument("matmul shape mismatch: " + a.shape_str() + " x " + b.shape_str());
  Tensor c({a.dim(0), b.dim(1)});
  MatMap(c.data(), a.dim(0), b.dim(1)).noalias() =
      CMatMap(a.data(), a.dim(0), a.dim(1)) * CMatMap(b.data(), b.dim(0), b.dim(1));
  return c;
}

Tensor matmul_nt_value(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
    throw std::invalid_argument("matmul_nt shape mismatch: " + a.shape_str() + " x " +
                                b.shape_str() + "^T");
  Tensor c({a.dim(0), b.dim(0)});
  MatMap(c.data(), a.dim(0), b.dim(0)).noalias() =
      CMatMap(a.data(), a.dim(0), a.dim(1)) *
      CMatMap(b.data(), b.dim(0), b.dim(1)).transpose();
  return c;
}

void axpy(Tensor& y, double alpha, const Tensor& x) {
  if (!y.same_shape(x))
    throw std::invalid_argument("axpy shape mismatch: " + y.shape_str() + " vs " + x.shape_str());
  double* yd = y.data();
  const double* xd = x.data();
  const long n = y.numel();
  for (long i = 0; i < n; ++i) yd[i] += alpha * xd[i];
}

Tensor add_value(const Tensor& a, const Tensor& b) {
  Tensor c = a;
  axpy(c, 1.0, b);
  return c;
}

Tensor sub_value(const Tensor& a, const Tensor& b) {
  Tensor c = a;
  axpy(c, -1.0, b);
  return c;
}

Tensor scale_value(const Tensor& a, double c) {
  Tensor r = a;
  for (double& v : r.vec()) v *= c;
  return r;
}

}  // namespace ti
