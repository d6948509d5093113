#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace pmd {

// Dense row-major array of 64-bit reals. Rank is 1 or 2 in practice; every
// quantity in the library (parameters, activations, gradients) is one of
// these, so there is no mixed-precision path anywhere.
struct RealArray {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  RealArray() = default;

  static RealArray zeros(std::vector<std::size_t> shape);
  static RealArray scalar(double v);
  static RealArray vec(std::vector<double> values);
  static RealArray matrix(std::size_t rows, std::size_t cols,
                          std::vector<double> values);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  bool is_scalar() const { return size() == 1; }

  // Rank-2 accessors; rank-1 arrays count as a single row.
  std::size_t rows() const;
  std::size_t cols() const;
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool same_shape(const RealArray& other) const {
    return shape == other.shape;
  }
  bool all_finite() const;
  std::string shape_str() const;  // e.g. "2x3"
};

}  // namespace pmd
