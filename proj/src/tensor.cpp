#include "tfc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "tfc/errors.hpp"

namespace tfc {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += ", ";
    out += std::to_string(shape[i]);
  }
  return out + "]";
}

NumArray::NumArray(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

NumArray::NumArray(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("shape " + shape_to_string(shape_) + " needs " +
                     std::to_string(shape_size(shape_)) + " values, got " +
                     std::to_string(data_.size()));
  }
}

NumArray NumArray::vector(std::initializer_list<double> values) {
  return NumArray(Shape{values.size()}, std::vector<double>(values));
}

NumArray NumArray::from_external(Shape shape, std::vector<double> data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw DataError("non-finite value at flat index " + std::to_string(i));
    }
  }
  return NumArray(std::move(shape), std::move(data));
}

std::size_t NumArray::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_to_string(shape_));
  }
  return shape_[axis];
}

NumArray NumArray::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("cannot reshape " + shape_to_string(shape_) + " to " +
                     shape_to_string(shape));
  }
  return NumArray(std::move(shape), data_);
}

void NumArray::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool NumArray::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double dot(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeError("dot: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
  return acc;
}

double l2_norm(std::span<const double> u) { return std::sqrt(dot(u, u)); }

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw ShapeError("cosine_similarity: length mismatch (" +
                     std::to_string(u.size()) + " vs " + std::to_string(v.size()) +
                     ")");
  }
  const double nu = l2_norm(u);
  const double nv = l2_norm(v);
  if (nu == 0.0 || nv == 0.0) {
    throw DegenerateInputError("cosine_similarity: zero-norm input");
  }
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

double cosine_similarity(const NumArray& u, const NumArray& v) {
  if (u.shape() != v.shape()) {
    throw ShapeError("cosine_similarity: shapes " + shape_to_string(u.shape()) +
                     " and " + shape_to_string(v.shape()) + " differ");
  }
  return cosine_similarity(u.data(), v.data());
}

}  // namespace tfc
