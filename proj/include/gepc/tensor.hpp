#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>

#include "gepc/error.hpp"

namespace gepc {

struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::ptrdiff_t size() const {
    return static_cast<std::ptrdiff_t>(channels) * height * width;
  }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& shape);

/// Dense C x H x W tensor stored row-major in (c, i, j) order.
///
/// The payload is a flat Eigen column array so elementwise work composes as
/// ordinary Eigen expressions; the (c, i, j) accessors are index sugar.
template <typename Scalar>
class BasicField {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  BasicField() = default;

  explicit BasicField(const Shape& shape)
      : shape_(checked(shape)), data_(Storage::Zero(shape.size())) {}

  BasicField(const Shape& shape, Storage data)
      : shape_(checked(shape)), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "field data length " + std::to_string(data_.size()) +
                      " does not match shape " + to_string(shape_));
    }
  }

  static BasicField constant(const Shape& shape, Scalar value) {
    return BasicField(shape, Storage::Constant(shape.size(), value));
  }

  const Shape& shape() const { return shape_; }
  int channels() const { return shape_.channels; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  std::ptrdiff_t size() const { return data_.size(); }

  std::ptrdiff_t index(int c, int i, int j) const {
    return (static_cast<std::ptrdiff_t>(c) * shape_.height + i) * shape_.width + j;
  }

  Scalar operator()(int c, int i, int j) const { return data_[index(c, i, j)]; }
  Scalar& operator()(int c, int i, int j) { return data_[index(c, i, j)]; }

  const Storage& array() const { return data_; }
  Storage& array() { return data_; }

  bool all_finite() const { return data_.isFinite().all(); }

  template <typename Other>
  BasicField<Other> cast() const {
    return BasicField<Other>(shape_, data_.template cast<Other>());
  }

  BasicField& operator+=(const BasicField& rhs) {
    require_same_shape(rhs);
    data_ += rhs.data_;
    return *this;
  }
  BasicField& operator-=(const BasicField& rhs) {
    require_same_shape(rhs);
    data_ -= rhs.data_;
    return *this;
  }
  BasicField& operator*=(Scalar s) {
    data_ *= s;
    return *this;
  }

  void require_same_shape(const BasicField& rhs) const {
    if (!(shape_ == rhs.shape_)) {
      throw Error(ErrorCode::kShapeMismatch, "shape mismatch: " + to_string(shape_) +
                                                 " vs " + to_string(rhs.shape_));
    }
  }

 private:
  static const Shape& checked(const Shape& shape) {
    if (shape.channels <= 0 || shape.height <= 0 || shape.width <= 0) {
      throw Error(ErrorCode::kInvalidArgument,
                  "field dimensions must be positive, got " + to_string(shape));
    }
    return shape;
  }

  Shape shape_;
  Storage data_;
};

template <typename Scalar>
BasicField<Scalar> operator+(BasicField<Scalar> a, const BasicField<Scalar>& b) {
  a += b;
  return a;
}
template <typename Scalar>
BasicField<Scalar> operator-(BasicField<Scalar> a, const BasicField<Scalar>& b) {
  a -= b;
  return a;
}
template <typename Scalar>
BasicField<Scalar> operator*(Scalar s, BasicField<Scalar> a) {
  a *= s;
  return a;
}

/// H x W real map, e.g. a channel-averaged residual energy.
template <typename Scalar>
class BasicSpatialMap {
 public:
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  BasicSpatialMap() = default;
  BasicSpatialMap(int height, int width) : data_(Storage::Zero(height, width)) {}
  explicit BasicSpatialMap(Storage data) : data_(std::move(data)) {}

  int height() const { return static_cast<int>(data_.rows()); }
  int width() const { return static_cast<int>(data_.cols()); }
  std::ptrdiff_t size() const { return data_.size(); }

  Scalar operator()(int i, int j) const { return data_(i, j); }
  Scalar& operator()(int i, int j) { return data_(i, j); }

  const Storage& array() const { return data_; }
  Storage& array() { return data_; }

 private:
  Storage data_;
};

using Field = BasicField<double>;
using SpatialMap = BasicSpatialMap<double>;

/// Sum of squares, accumulated in (at least) double precision.
template <typename Scalar>
double sq_norm(const BasicField<Scalar>& f) {
  return f.array().template cast<double>().square().sum();
}

template <typename Scalar>
double dot(const BasicField<Scalar>& a, const BasicField<Scalar>& b) {
  a.require_same_shape(b);
  return (a.array().template cast<double>() * b.array().template cast<double>()).sum();
}

/// Pointwise squared norm over channels, averaged over channels.
template <typename Scalar>
BasicSpatialMap<double> channel_mean_energy(const BasicField<Scalar>& f) {
  BasicSpatialMap<double> out(f.height(), f.width());
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(f.height()) * f.width();
  Eigen::Map<Eigen::ArrayXd> flat(out.array().data(), plane);
  for (int c = 0; c < f.channels(); ++c) {
    flat += f.array().segment(c * plane, plane).template cast<double>().square();
  }
  flat /= static_cast<double>(f.channels());
  return out;
}

/// Pointwise |value| averaged over channels.
template <typename Scalar>
BasicSpatialMap<double> channel_mean_magnitude(const BasicField<Scalar>& f) {
  BasicSpatialMap<double> out(f.height(), f.width());
  const std::ptrdiff_t plane = static_cast<std::ptrdiff_t>(f.height()) * f.width();
  Eigen::Map<Eigen::ArrayXd> flat(out.array().data(), plane);
  for (int c = 0; c < f.channels(); ++c) {
    flat += f.array().segment(c * plane, plane).template cast<double>().abs();
  }
  flat /= static_cast<double>(f.channels());
  return out;
}

}  // namespace gepc
