#pragma once

#include <cstddef>
#include <vector>

#include "ualab/errors.hpp"

namespace ualab {

// Dense row-major matrix of doubles. Also used for (rows x 1) vectors.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}

  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }

  double* row(std::size_t r) { return v.data() + r * cols; }
  const double* row(std::size_t r) const { return v.data() + r * cols; }

  std::size_t size() const { return v.size(); }
  bool empty() const { return v.empty(); }

  bool same_shape(const Matrix& o) const {
    return rows == o.rows && cols == o.cols;
  }
};

inline void require_shape(const Matrix& m, std::size_t rows, std::size_t cols,
                          const char* what) {
  if (m.rows != rows || m.cols != cols) {
    throw ShapeMismatch(std::string(what) + ": expected " +
                        std::to_string(rows) + "x" + std::to_string(cols) +
                        ", got " + std::to_string(m.rows) + "x" +
                        std::to_string(m.cols));
  }
}

}  // namespace ualab
