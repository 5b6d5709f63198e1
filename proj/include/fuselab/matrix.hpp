#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace fuselab {

/// Dense row-major matrix of doubles.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(size_t r, size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

    double& at(size_t r, size_t c) { return a[r * cols + c]; }
    double at(size_t r, size_t c) const { return a[r * cols + c]; }

    double* row(size_t r) { return a.data() + r * cols; }
    const double* row(size_t r) const { return a.data() + r * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    bool empty() const { return a.empty(); }
    bool all_finite() const;
};

// Batched kernels used by the training loop. All accumulate each output
// element in a fixed order, so results do not depend on the thread count.

/// C(m x n) = A(m x k) * B(n x k)^T
void gemm_nt(const Matrix& A, const Matrix& B, Matrix& C, int threads = 1);

/// C(n x p) = A(m x n)^T * B(m x p)
void gemm_tn(const Matrix& A, const Matrix& B, Matrix& C, int threads = 1);

/// C(m x p) = A(m x n) * B(n x >=p), using only the first p columns of B.
void gemm_nn_trunc(const Matrix& A, const Matrix& B, size_t p, Matrix& C, int threads = 1);

/// sum_i w[i] * x[i] + w[n], accumulated strictly left to right. Every
/// per-sample forward path in the library goes through this one compiled
/// kernel, which is what makes the block-composition routes bit-identical
/// to the per-model routes.
double dot_affine(const double* w, const double* x, size_t n);

/// FNV-1a over raw bytes; chainable via the seed parameter.
uint64_t fnv1a(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ULL);

} // namespace fuselab
