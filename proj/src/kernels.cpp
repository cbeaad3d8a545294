#include "ualab/kernels.hpp"

#include <cmath>
#include <cstdint>

namespace ualab::kernels {

namespace {

void check_linear_shapes(const Matrix& X, const Matrix& W, const Matrix& b,
                         const Matrix& Y) {
  if (W.cols != X.cols || b.rows != W.rows || b.cols != 1 ||
      Y.rows != X.rows || Y.cols != W.rows) {
    throw ShapeMismatch("linear_forward: X " + std::to_string(X.rows) + "x" +
                        std::to_string(X.cols) + ", W " +
                        std::to_string(W.rows) + "x" + std::to_string(W.cols));
  }
}

// Row workers are deliberately out-of-line: one compiled instance serves the
// serial driver, the OpenMP driver, and the autodiff tape, which keeps all of
// their results bit-identical.

__attribute__((noinline)) void row_linear_forward(const double* x,
                                                  const double* W,
                                                  std::size_t out,
                                                  std::size_t in,
                                                  const double* b, double* y) {
  for (std::size_t o = 0; o < out; ++o) {
    const double* w = W + o * in;
    double acc = b[o];
    for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
    y[o] = acc;
  }
}

__attribute__((noinline)) void row_tanh(const double* x, double* y,
                                        std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

__attribute__((noinline)) void row_linear_backward_input(const double* dy,
                                                         const double* W,
                                                         std::size_t out,
                                                         std::size_t in,
                                                         double* dx) {
  for (std::size_t i = 0; i < in; ++i) dx[i] = 0.0;
  for (std::size_t o = 0; o < out; ++o) {
    const double* w = W + o * in;
    const double g = dy[o];
    for (std::size_t i = 0; i < in; ++i) dx[i] += w[i] * g;
  }
}

// Accumulates one output unit's parameter gradients over all samples, in
// sample order. Parallelizing over units keeps every sum sequential.
__attribute__((noinline)) void unit_param_grads(std::size_t o, const Matrix& X,
                                                const Matrix& dY, double* dw,
                                                double* db) {
  const std::size_t samples = X.rows;
  const std::size_t in = X.cols;
  double db_acc = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    const double g = dY.at(s, o);
    db_acc += g;
    const double* x = X.row(s);
    for (std::size_t i = 0; i < in; ++i) dw[i] += g * x[i];
  }
  *db += db_acc;
}

__attribute__((noinline)) void row_tanh_backward(const double* y,
                                                 const double* dy, double* dx,
                                                 std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dx[i] = dy[i] * (1.0 - y[i] * y[i]);
}

}  // namespace

void affine_row(const double* x, const double* W, std::size_t out,
                std::size_t in, const double* b, double* y) {
  row_linear_forward(x, W, out, in, b, y);
}

void affine_row_backward_input(const double* dy, const double* W,
                               std::size_t out, std::size_t in, double* dx) {
  row_linear_backward_input(dy, W, out, in, dx);
}

namespace serial {

void linear_forward(const Matrix& X, const Matrix& W, const Matrix& b,
                    Matrix& Y) {
  check_linear_shapes(X, W, b, Y);
  for (std::size_t s = 0; s < X.rows; ++s) {
    row_linear_forward(X.row(s), W.v.data(), W.rows, W.cols, b.v.data(),
                       Y.row(s));
  }
}

void tanh_forward(const Matrix& X, Matrix& Y) {
  if (!X.same_shape(Y)) throw ShapeMismatch("tanh_forward shapes differ");
  for (std::size_t s = 0; s < X.rows; ++s) {
    row_tanh(X.row(s), Y.row(s), X.cols);
  }
}

void linear_backward_input(const Matrix& dY, const Matrix& W, Matrix& dX) {
  if (dY.cols != W.rows || dX.rows != dY.rows || dX.cols != W.cols) {
    throw ShapeMismatch("linear_backward_input shapes");
  }
  for (std::size_t s = 0; s < dY.rows; ++s) {
    row_linear_backward_input(dY.row(s), W.v.data(), W.rows, W.cols,
                              dX.row(s));
  }
}

void linear_backward_params(const Matrix& X, const Matrix& dY, Matrix& dW,
                            Matrix& db) {
  if (X.rows != dY.rows || dW.rows != dY.cols || dW.cols != X.cols ||
      db.rows != dY.cols || db.cols != 1) {
    throw ShapeMismatch("linear_backward_params shapes");
  }
  for (std::size_t o = 0; o < dW.rows; ++o) {
    unit_param_grads(o, X, dY, dW.row(o), &db.v[o]);
  }
}

void tanh_backward(const Matrix& Y, const Matrix& dY, Matrix& dX) {
  if (!Y.same_shape(dY) || !Y.same_shape(dX)) {
    throw ShapeMismatch("tanh_backward shapes");
  }
  for (std::size_t s = 0; s < Y.rows; ++s) {
    row_tanh_backward(Y.row(s), dY.row(s), dX.row(s), Y.cols);
  }
}

}  // namespace serial

void linear_forward(const Matrix& X, const Matrix& W, const Matrix& b,
                    Matrix& Y) {
  check_linear_shapes(X, W, b, Y);
  const std::int64_t n = static_cast<std::int64_t>(X.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < n; ++s) {
    const auto r = static_cast<std::size_t>(s);
    row_linear_forward(X.row(r), W.v.data(), W.rows, W.cols, b.v.data(),
                       Y.row(r));
  }
}

void tanh_forward(const Matrix& X, Matrix& Y) {
  if (!X.same_shape(Y)) throw ShapeMismatch("tanh_forward shapes differ");
  const std::int64_t n = static_cast<std::int64_t>(X.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < n; ++s) {
    const auto r = static_cast<std::size_t>(s);
    row_tanh(X.row(r), Y.row(r), X.cols);
  }
}

void linear_backward_input(const Matrix& dY, const Matrix& W, Matrix& dX) {
  if (dY.cols != W.rows || dX.rows != dY.rows || dX.cols != W.cols) {
    throw ShapeMismatch("linear_backward_input shapes");
  }
  const std::int64_t n = static_cast<std::int64_t>(dY.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < n; ++s) {
    const auto r = static_cast<std::size_t>(s);
    row_linear_backward_input(dY.row(r), W.v.data(), W.rows, W.cols, dX.row(r));
  }
}

void linear_backward_params(const Matrix& X, const Matrix& dY, Matrix& dW,
                            Matrix& db) {
  if (X.rows != dY.rows || dW.rows != dY.cols || dW.cols != X.cols ||
      db.rows != dY.cols || db.cols != 1) {
    throw ShapeMismatch("linear_backward_params shapes");
  }
  const std::int64_t units = static_cast<std::int64_t>(dW.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t o = 0; o < units; ++o) {
    const auto u = static_cast<std::size_t>(o);
    unit_param_grads(u, X, dY, dW.row(u), &db.v[u]);
  }
}

void tanh_backward(const Matrix& Y, const Matrix& dY, Matrix& dX) {
  if (!Y.same_shape(dY) || !Y.same_shape(dX)) {
    throw ShapeMismatch("tanh_backward shapes");
  }
  const std::int64_t n = static_cast<std::int64_t>(Y.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < n; ++s) {
    const auto r = static_cast<std::size_t>(s);
    row_tanh_backward(Y.row(r), dY.row(r), dX.row(r), Y.cols);
  }
}

}  // namespace ualab::kernels
