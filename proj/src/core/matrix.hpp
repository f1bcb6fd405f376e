#pragma once

#include <cstddef>
#include <vector>

namespace omniact {

/// Dense row-major matrix of doubles. Small helper, not a linear algebra
/// library; everything the pipeline needs is explicit loops anyway.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
  double at(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }
  double* row(int i) { return v.data() + static_cast<size_t>(i) * cols; }
  const double* row(int i) const { return v.data() + static_cast<size_t>(i) * cols; }
  size_t size() const { return v.size(); }
};

}  // namespace omniact
