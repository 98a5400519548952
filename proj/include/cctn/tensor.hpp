#pragma once

#include <Eigen/Core>

#include <initializer_list>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cctn {

// Dense N-d array, row-major for the declared shape. Activations use
// channels x height x width; conv weights use out x in x kh x kw.
template <typename T>
class Tensor {
 public:
  using Scalar = T;
  using Storage = Eigen::Array<T, Eigen::Dynamic, 1>;

  Tensor() = default;

  explicit Tensor(std::vector<Eigen::Index> shape) : shape_(std::move(shape)) {
    data_.setZero(count());
  }

  Tensor(std::initializer_list<Eigen::Index> shape)
      : Tensor(std::vector<Eigen::Index>(shape)) {}

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const std::vector<Eigen::Index>& shape() const { return shape_; }
  Eigen::Index rank() const { return static_cast<Eigen::Index>(shape_.size()); }
  Eigen::Index extent(Eigen::Index d) const { return shape_[static_cast<size_t>(d)]; }
  Eigen::Index size() const { return data_.size(); }

  Storage& array() { return data_; }
  const Storage& array() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](Eigen::Index i) { return data_[i]; }
  const T& operator[](Eigen::Index i) const { return data_[i]; }

  // Rank-3 (c,h,w) access.
  T& operator()(Eigen::Index c, Eigen::Index y, Eigen::Index x) {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }
  const T& operator()(Eigen::Index c, Eigen::Index y, Eigen::Index x) const {
    return data_[(c * shape_[1] + y) * shape_[2] + x];
  }

  // Rank-4 (o,i,ky,kx) access.
  T& operator()(Eigen::Index o, Eigen::Index i, Eigen::Index ky, Eigen::Index kx) {
    return data_[((o * shape_[1] + i) * shape_[2] + ky) * shape_[3] + kx];
  }
  const T& operator()(Eigen::Index o, Eigen::Index i, Eigen::Index ky,
                      Eigen::Index kx) const {
    return data_[((o * shape_[1] + i) * shape_[2] + ky) * shape_[3] + kx];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  bool all_finite() const { return data_.isFinite().all(); }

  std::string shape_string() const {
    std::ostringstream os;
    os << '(';
    for (size_t i = 0; i < shape_.size(); ++i) {
      if (i) os << 'x';
      os << shape_[i];
    }
    os << ')';
    return os.str();
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    out.array() = data_.template cast<U>();
    return out;
  }

 private:
  Eigen::Index count() const {
    Eigen::Index n = 1;
    for (Eigen::Index e : shape_) {
      if (e <= 0) throw std::invalid_argument("tensor: non-positive extent");
      n *= e;
    }
    return n;
  }

  std::vector<Eigen::Index> shape_;
  Storage data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

}  // namespace cctn
