#include "fuselab/matrix.hpp"

namespace fuselab {

// Built with contraction and vectorization disabled (see src/CMakeLists.txt)
// so the accumulation order and rounding are the plain left-to-right ones for
// every vector length. Leading zero weights are then exact no-ops, which is
// what the block-composition bit-equality rests on.
double dot_affine(const double* w, const double* x, size_t n) {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i) s += w[i] * x[i];
    return s + w[n];
}

} // namespace fuselab
