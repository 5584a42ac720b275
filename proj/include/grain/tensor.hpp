#ifndef GRAIN_TENSOR_HPP
#define GRAIN_TENSOR_HPP

#include <Eigen/Core>

#include <cmath>
#include <initializer_list>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "grain/error.hpp"
#include "grain/rng.hpp"

namespace grain {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

/// Product of the extents. Throws ShapeError on an empty list or an extent < 1.
inline Index checked_volume(const Shape& shape) {
  if (shape.empty()) throw ShapeError("shape must have at least one extent");
  Index n = 1;
  for (Index e : shape) {
    if (e < 1) throw ShapeError("extent must be >= 1 in shape " + shape_string(shape));
    n *= e;
  }
  return n;
}

/// Dense row-major N-d array. The storage is a plain Eigen column vector, so
/// any Eigen expression can be applied through vec() or a matrix() view.
template <typename Scalar_>
class Tensor {
 public:
  using Scalar = Scalar_;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatrixMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
  using ConstMatrixMap =
      Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

  Tensor() : shape_{1}, data_(Vector::Zero(1)) {}

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    data_ = Vector::Zero(checked_volume(shape_));
  }

  Tensor(Shape shape, Vector data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_volume(shape_) != data_.size())
      throw ShapeError("data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
  }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index extent(Index axis) const { return shape_[static_cast<std::size_t>(axis)]; }
  Index size() const { return data_.size(); }

  Vector& vec() { return data_; }
  const Vector& vec() const { return data_; }

  std::span<Scalar> data() { return {data_.data(), static_cast<std::size_t>(data_.size())}; }
  std::span<const Scalar> data() const {
    return {data_.data(), static_cast<std::size_t>(data_.size())};
  }

  /// Row-major 2-D view over the flat storage; rows * cols must equal size().
  MatrixMap matrix(Index rows, Index cols) {
    check_view(rows, cols);
    return MatrixMap(data_.data(), rows, cols);
  }
  ConstMatrixMap matrix(Index rows, Index cols) const {
    check_view(rows, cols);
    return ConstMatrixMap(data_.data(), rows, cols);
  }

  Scalar& operator[](Index flat) { return data_[flat]; }
  const Scalar& operator[](Index flat) const { return data_[flat]; }

  template <typename... Is>
  Scalar& operator()(Is... idx) {
    return data_[flat_index({static_cast<Index>(idx)...})];
  }
  template <typename... Is>
  const Scalar& operator()(Is... idx) const {
    return data_[flat_index({static_cast<Index>(idx)...})];
  }

  /// Row-major offset: for shape [A,B,C], (i,j,k) -> i*B*C + j*C + k.
  Index flat_index(std::initializer_list<Index> idx) const {
    if (idx.size() != shape_.size())
      throw IndexError("index rank does not match tensor rank " + std::to_string(shape_.size()));
    Index flat = 0;
    std::size_t axis = 0;
    for (Index i : idx) {
      if (i < 0 || i >= shape_[axis]) throw IndexError("index out of range on axis " + std::to_string(axis));
      flat = flat * shape_[axis] + i;
      ++axis;
    }
    return flat;
  }

  /// Same data under a different shape of equal volume.
  Tensor reshaped(Shape shape) const {
    if (checked_volume(shape) != size())
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    return Tensor(std::move(shape), data_);
  }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void check_view(Index rows, Index cols) const {
    if (rows * cols != data_.size())
      throw ShapeError("matrix view " + std::to_string(rows) + "x" + std::to_string(cols) +
                       " does not cover tensor " + shape_string(shape_));
  }

  Shape shape_;
  Vector data_;
};

using TensorXd = Tensor<double>;

template <typename Scalar = double>
Tensor<Scalar> zeros(const Shape& shape) {
  return Tensor<Scalar>(shape);
}

template <typename Scalar = double>
Tensor<Scalar> from_data(const Shape& shape, std::span<const Scalar> values) {
  const Index n = checked_volume(shape);
  if (static_cast<Index>(values.size()) != n)
    throw ShapeError("from_data: " + std::to_string(values.size()) + " values for shape " +
                     shape_string(shape));
  typename Tensor<Scalar>::Vector v(n);
  for (Index i = 0; i < n; ++i) {
    const Scalar x = values[static_cast<std::size_t>(i)];
    if (!std::isfinite(x)) throw ValueError("from_data: non-finite value at flat index " + std::to_string(i));
    v[i] = x;
  }
  return Tensor<Scalar>(shape, std::move(v));
}

template <typename Scalar = double>
Tensor<Scalar> from_data(const Shape& shape, std::initializer_list<Scalar> values) {
  return from_data<Scalar>(shape, std::span<const Scalar>(values.begin(), values.size()));
}

enum class BinaryOp { kAdd, kSub, kMul };

template <typename Scalar>
Tensor<Scalar> map_binary(const Tensor<Scalar>& a, const Tensor<Scalar>& b, BinaryOp op) {
  if (a.shape() != b.shape())
    throw ShapeError("map_binary: shapes " + shape_string(a.shape()) + " and " +
                     shape_string(b.shape()) + " differ");
  typename Tensor<Scalar>::Vector out;
  switch (op) {
    case BinaryOp::kAdd: out = a.vec() + b.vec(); break;
    case BinaryOp::kSub: out = a.vec() - b.vec(); break;
    case BinaryOp::kMul: out = a.vec().cwiseProduct(b.vec()); break;
  }
  if (!out.allFinite()) throw ValueError("map_binary: result overflowed");
  return Tensor<Scalar>(a.shape(), std::move(out));
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar c) {
  if (!std::isfinite(c)) throw ValueError("scale: non-finite factor");
  typename Tensor<Scalar>::Vector out = a.vec() * c;
  if (!out.allFinite()) throw ValueError("scale: result overflowed");
  return Tensor<Scalar>(a.shape(), std::move(out));
}

/// Elements drawn in flat order from rng, each uniform in [lo, hi).
template <typename Scalar = double>
Tensor<Scalar> rand_uniform(Rng& rng, const Shape& shape, Scalar lo, Scalar hi) {
  if (!(lo < hi)) throw RangeError("rand_uniform: require lo < hi");
  Tensor<Scalar> t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(rng.uniform(lo, hi));
  return t;
}

}  // namespace grain

#endif  // GRAIN_TENSOR_HPP
