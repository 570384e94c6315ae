#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace ti {

/// Dense row-major float-64 tensor. Plain value type: tensors not attached to
/// a Tape are immutable-by-convention snapshots and safe to share across
/// threads.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<long> shape);
  Tensor(std::vector<long> shape, std::vector<double> data);
  Tensor(std::initializer_list<double> row);  // 1-D convenience

  static Tensor zeros(std::vector<long> shape);
  static Tensor full(std::vector<long> shape, double v);
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  const std::vector<long>& shape() const { return shape_; }
  long rank() const { return static_cast<long>(shape_.size()); }
  long dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  long numel() const { return static_cast<long>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& at(long i) { return data_[static_cast<std::size_t>(i)]; }
  double at(long i) const { return data_[static_cast<std::size_t>(i)]; }
  double& at(long i, long j) { return data_[static_cast<std::size_t>(i * dim(1) + j)]; }
  double at(long i, long j) const { return data_[static_cast<std::size_t>(i * dim(1) + j)]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  /// True when every entry is finite (the NaN/Inf checked assertion).
  bool all_finite() const;
  double max_abs() const;

  std::string shape_str() const;

 private:
  std::vector<long> shape_;
  std::vector<double> data_;
};

long shape_numel(const std::vector<long>& shape);

/// C = A·B for 2-D tensors, plain value math (no recording).
Tensor matmul_value(const Tensor& a, const Tensor& b);
/// C = A·Bᵀ.
Tensor matmul_nt_value(const Tensor& a, const Tensor& b);

void axpy(Tensor& y, double alpha, const Tensor& x);  // y += alpha*x
Tensor add_value(const Tensor& a, const Tensor& b);
Tensor sub_value(const Tensor& a, const Tensor& b);
Tensor scale_value(const Tensor& a, double c);

}  // namespace ti
