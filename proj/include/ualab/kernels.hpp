#pragma once

#include "ualab/matrix.hpp"

namespace ualab::kernels {

// Dense batch kernels behind the encoder and the probe trainers. Each kernel
// exists twice: a single-threaded reference under serial::, and an OpenMP
// variant that parallelizes over independent output rows. Both call the same
// out-of-line per-row workers, so the parallel results are bit-identical to
// the serial ones for any thread count. tests/test_kernels.cpp asserts this
// and bench/kernels_bench.cpp compares their throughput.

namespace serial {

// Y[s] = W * X[s] + b for every sample row s.
void linear_forward(const Matrix& X, const Matrix& W, const Matrix& b,
                    Matrix& Y);

// Elementwise tanh.
void tanh_forward(const Matrix& X, Matrix& Y);

// dX[s] = W^T * dY[s].
void linear_backward_input(const Matrix& dY, const Matrix& W, Matrix& dX);

// Accumulates dW += sum_s dY[s] X[s]^T and db += sum_s dY[s].
void linear_backward_params(const Matrix& X, const Matrix& dY, Matrix& dW,
                            Matrix& db);

// dX = dY .* (1 - Y^2), with Y the tanh output.
void tanh_backward(const Matrix& Y, const Matrix& dY, Matrix& dX);

}  // namespace serial

void linear_forward(const Matrix& X, const Matrix& W, const Matrix& b,
                    Matrix& Y);
void tanh_forward(const Matrix& X, Matrix& Y);
void linear_backward_input(const Matrix& dY, const Matrix& W, Matrix& dX);
void linear_backward_params(const Matrix& X, const Matrix& dY, Matrix& dW,
                            Matrix& db);
void tanh_backward(const Matrix& Y, const Matrix& dY, Matrix& dX);

// Single-row helpers shared by both variants and by the autodiff tape.
// W is row-major (out x in).
void affine_row(const double* x, const double* W, std::size_t out,
                std::size_t in, const double* b, double* y);
void affine_row_backward_input(const double* dy, const double* W,
                               std::size_t out, std::size_t in, double* dx);

}  // namespace ualab::kernels
