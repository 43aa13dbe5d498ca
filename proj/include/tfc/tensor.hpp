#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tfc {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense row-major array of doubles. The element count always equals the
// product of the extents.
class NumArray {
 public:
  NumArray() = default;
  explicit NumArray(Shape shape, double fill = 0.0);
  NumArray(Shape shape, std::vector<double> data);

  // 1-D array holding exactly `values`.
  static NumArray vector(std::initializer_list<double> values);

  // Same as the (shape, data) constructor but rejects NaN/Inf, naming the
  // first offending flat index. Use for anything read from outside.
  static NumArray from_external(Shape shape, std::vector<double> data);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double* ptr() noexcept { return data_.data(); }
  const double* ptr() const noexcept { return data_.data(); }
  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  // Reinterprets the extents; element count must be unchanged.
  NumArray reshaped(Shape shape) const;
  void fill(double value);
  bool all_finite() const noexcept;

  friend bool operator==(const NumArray&, const NumArray&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

double dot(std::span<const double> u, std::span<const double> v);
double l2_norm(std::span<const double> u);

// u.v / (|u| |v|). Throws DegenerateInputError when either vector has zero
// norm and ShapeError on length mismatch.
double cosine_similarity(std::span<const double> u, std::span<const double> v);
double cosine_similarity(const NumArray& u, const NumArray& v);

}  // namespace tfc
