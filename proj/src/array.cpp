#include "pmd/array.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pmd {

RealArray RealArray::zeros(std::vector<std::size_t> shape) {
  RealArray a;
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  a.shape = std::move(shape);
  a.data.assign(n, 0.0);
  return a;
}

RealArray RealArray::scalar(double v) {
  RealArray a;
  a.shape = {1};
  a.data = {v};
  return a;
}

RealArray RealArray::vec(std::vector<double> values) {
  RealArray a;
  a.shape = {values.size()};
  a.data = std::move(values);
  return a;
}

RealArray RealArray::matrix(std::size_t rows, std::size_t cols,
                            std::vector<double> values) {
  if (values.size() != rows * cols)
    throw std::invalid_argument("matrix: value count does not match shape");
  RealArray a;
  a.shape = {rows, cols};
  a.data = std::move(values);
  return a;
}

std::size_t RealArray::rows() const { return rank() == 2 ? shape[0] : 1; }

std::size_t RealArray::cols() const {
  return rank() == 2 ? shape[1] : (shape.empty() ? 0 : shape[0]);
}

bool RealArray::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string RealArray::shape_str() const {
  if (shape.empty()) return "()";
  std::string s = std::to_string(shape[0]);
  for (std::size_t i = 1; i < shape.size(); ++i)
    s += "x" + std::to_string(shape[i]);
  return s;
}

}  // namespace pmd
