#include "fuselab/matrix.hpp"

#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fuselab {

bool Matrix::all_finite() const {
    for (double v : a) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

namespace {

// Core saxpy-style accumulation: out[0..n) += s * src[0..n).
inline void axpy(double* __restrict out, const double* __restrict src, double s, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] += s * src[i];
}

// Thread fan-out only pays off past a few Mflop per call.
inline int effective_threads(int threads, size_t m, size_t n, size_t k) {
    return (threads > 1 && m * n * k >= (size_t(1) << 22)) ? threads : 1;
}

} // namespace

// C[i,j] = sum_k A[i,k] * B[j,k]. B is transposed into a scratch buffer so
// the inner loop runs over contiguous memory; each C row is accumulated in
// k order regardless of vector width or thread count.
void gemm_nt(const Matrix& A, const Matrix& B, Matrix& C, int threads) {
    const size_t m = A.rows, k = A.cols, n = B.rows;
    C.rows = m;
    C.cols = n;
    C.a.assign(m * n, 0.0);

    std::vector<double> bt(k * n);
    for (size_t j = 0; j < n; ++j) {
        const double* brow = B.row(j);
        for (size_t kk = 0; kk < k; ++kk) bt[kk * n + j] = brow[kk];
    }

    threads = effective_threads(threads, m, n, k);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
#endif
    for (long i = 0; i < static_cast<long>(m); ++i) {
        const double* arow = A.row(i);
        double* crow = C.row(i);
        size_t kk = 0;
        for (; kk + 4 <= k; kk += 4) {
            const double a0 = arow[kk], a1 = arow[kk + 1], a2 = arow[kk + 2], a3 = arow[kk + 3];
            const double* b0 = &bt[kk * n];
            const double* b1 = b0 + n;
            const double* b2 = b1 + n;
            const double* b3 = b2 + n;
            for (size_t j = 0; j < n; ++j) {
                crow[j] += a0 * b0[j] + a1 * b1[j] + a2 * b2[j] + a3 * b3[j];
            }
        }
        for (; kk < k; ++kk) axpy(crow, &bt[kk * n], arow[kk], n);
    }
    (void)threads;
}

// C[j,p] = sum_i A[i,j] * B[i,p]; parallel over C rows, reduction over i in
// a fixed order per row.
void gemm_tn(const Matrix& A, const Matrix& B, Matrix& C, int threads) {
    const size_t m = A.rows, n = A.cols, p = B.cols;
    C.rows = n;
    C.cols = p;
    C.a.assign(n * p, 0.0);

    threads = effective_threads(threads, n, p, m);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
#endif
    for (long j = 0; j < static_cast<long>(n); ++j) {
        double* crow = C.row(j);
        size_t i = 0;
        for (; i + 4 <= m; i += 4) {
            const double a0 = A.at(i, j), a1 = A.at(i + 1, j);
            const double a2 = A.at(i + 2, j), a3 = A.at(i + 3, j);
            const double* b0 = B.row(i);
            const double* b1 = B.row(i + 1);
            const double* b2 = B.row(i + 2);
            const double* b3 = B.row(i + 3);
            for (size_t q = 0; q < p; ++q) {
                crow[q] += a0 * b0[q] + a1 * b1[q] + a2 * b2[q] + a3 * b3[q];
            }
        }
        for (; i < m; ++i) axpy(crow, B.row(i), A.at(i, j), p);
    }
    (void)threads;
}

void gemm_nn_trunc(const Matrix& A, const Matrix& B, size_t p, Matrix& C, int threads) {
    const size_t m = A.rows, n = A.cols;
    C.rows = m;
    C.cols = p;
    C.a.assign(m * p, 0.0);

    threads = effective_threads(threads, m, p, n);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
#endif
    for (long i = 0; i < static_cast<long>(m); ++i) {
        const double* arow = A.row(i);
        double* crow = C.row(i);
        size_t j = 0;
        for (; j + 4 <= n; j += 4) {
            const double a0 = arow[j], a1 = arow[j + 1], a2 = arow[j + 2], a3 = arow[j + 3];
            const double* b0 = B.row(j);
            const double* b1 = B.row(j + 1);
            const double* b2 = B.row(j + 2);
            const double* b3 = B.row(j + 3);
            for (size_t q = 0; q < p; ++q) {
                crow[q] += a0 * b0[q] + a1 * b1[q] + a2 * b2[q] + a3 * b3[q];
            }
        }
        for (; j < n; ++j) axpy(crow, B.row(j), arow[j], p);
    }
    (void)threads;
}

uint64_t fnv1a(const void* data, size_t len, uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace fuselab
