#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fuselab/dataset.hpp"
#include "fuselab/rng.hpp"

namespace fuselab {

/// Per-client sample index lists over a parent dataset, plus bookkeeping
/// used by diagnostics and tests.
struct PartitionPlan {
    std::vector<std::vector<int64_t>> client_indices;
    std::vector<std::vector<int64_t>> label_histograms;  // J x C sample counts
    std::optional<double> alpha;                         // hetero-dir only
    std::optional<std::vector<std::vector<int>>> labels_per_client;  // hetero-label only
    Matrix dirichlet_proportions;  // C x J drawn proportions (hetero-dir only)

    size_t clients() const { return client_indices.size(); }
};

/// Draw one label set per client: a size uniform in {3..6}, then that many
/// distinct labels uniform over [0, class_count). Does not check coverage.
std::vector<std::vector<int>> draw_label_sets(int clients, int class_count, Rng& rng);

/// Label-skew partition: each client receives all parent samples of its
/// drawn label set; sets are re-drawn until every label is held by at least
/// one client. Labels may be shared across clients, duplicating samples;
/// with disjoint = true, each shared label's samples are split evenly among
/// its holders instead.
PartitionPlan partition_hetero_label(const Dataset& ds, int clients, uint64_t seed,
                                     bool disjoint = false);

/// Dirichlet label-skew partition: for every class, client proportions are
/// drawn from Dir(alpha) and the shuffled class indices are cut accordingly
/// (largest-remainder rounding). The result is a set partition of the parent
/// index set. Rounds in which some client ends up with zero samples overall
/// are re-drawn, up to a retry cap.
PartitionPlan partition_hetero_dir(const Dataset& ds, int clients, double alpha, uint64_t seed);

} // namespace fuselab
