#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fuselab/matrix.hpp"

namespace fuselab {

enum class Role { train, test };

/// Labeled feature matrix. Labels are integers in [0, class_count); one-hot
/// targets are derived on demand by the loss code.
struct Dataset {
    Matrix features;          // N x I
    std::vector<int> labels;  // length N
    int class_count = 0;
    Role role = Role::train;

    size_t size() const { return features.rows; }
    size_t feature_width() const { return features.cols; }

    /// Throws ContractError unless N > 0, labels are in range, and all
    /// features are finite.
    void validate() const;
};

enum class DiamondSide { left, right };

/// True when (x1, x2) lies in the sampling band: the chevron of vertical
/// half-width 1 around the corner line x2 = -x1 (x1 < 0) / x2 = x1 (x1 >= 0),
/// with x1 in [-2, 2].
bool diamond_contains(double x1, double x2);

/// 1 when the point lies strictly above the corner line, else 0.
int diamond_label(double x1, double x2);

/// The 2D two-client benchmark: uniform rejection samples inside the band,
/// clipped at x1 <= 0.5 (left) or x1 >= -0.5 (right). Returns {train, test}
/// with 2 classes. Deterministic in the seed; train is drawn first.
std::pair<Dataset, Dataset> gen_diamond2d(DiamondSide side, size_t n_train, size_t n_test,
                                          uint64_t seed);

/// Reads an IDX image/label file pair (big-endian magics 2051 and 2049).
/// Pixels are scaled to [0, 1]; class count is fixed at 10. Bad magic,
/// truncation, and image/label count mismatch raise distinct FormatErrors.
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path, Role role);

/// New dataset holding copies of the selected rows (invalid index throws).
Dataset subset(const Dataset& ds, std::span<const int64_t> indices);

/// Row-wise concatenation; feature width, class count, and role must match.
Dataset merge(const Dataset& a, const Dataset& b);

/// Writes "x1,...,xn,label" rows with a header; used for the synthetic sets.
void export_csv(const Dataset& ds, const std::string& path);

} // namespace fuselab
