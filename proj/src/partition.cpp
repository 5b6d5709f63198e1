#include "fuselab/partition.hpp"

#include <algorithm>
#include <numeric>

#include "fuselab/error.hpp"

namespace fuselab {

namespace {

constexpr int kRetryCap = 1000;

std::vector<std::vector<int64_t>> indices_by_label(const Dataset& ds) {
    std::vector<std::vector<int64_t>> by_label(ds.class_count);
    for (size_t i = 0; i < ds.size(); ++i) {
        by_label[ds.labels[i]].push_back(int64_t(i));
    }
    return by_label;
}

void fill_histograms(PartitionPlan& plan, const Dataset& ds) {
    plan.label_histograms.assign(plan.clients(), std::vector<int64_t>(ds.class_count, 0));
    for (size_t j = 0; j < plan.clients(); ++j) {
        for (int64_t idx : plan.client_indices[j]) {
            ++plan.label_histograms[j][ds.labels[idx]];
        }
    }
}

/// Largest-remainder conversion of proportions to integer counts summing to
/// total. Deterministic: remainder ties break toward the lower index.
std::vector<int64_t> apportion(const std::vector<double>& props, int64_t total) {
    const size_t n = props.size();
    std::vector<int64_t> counts(n);
    std::vector<std::pair<double, size_t>> rem(n);
    int64_t assigned = 0;
    for (size_t i = 0; i < n; ++i) {
        const double exact = props[i] * double(total);
        counts[i] = int64_t(exact);
        rem[i] = {exact - double(counts[i]), i};
        assigned += counts[i];
    }
    std::stable_sort(rem.begin(), rem.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    const int64_t leftover = total - assigned;
    for (int64_t t = 0; t < leftover; ++t) {
        ++counts[rem[size_t(t) % n].second];
    }
    return counts;
}

} // namespace

std::vector<std::vector<int>> draw_label_sets(int clients, int class_count, Rng& rng) {
    std::vector<std::vector<int>> sets(clients);
    for (int j = 0; j < clients; ++j) {
        const int size = 3 + int(rng.below(4));
        // partial Fisher-Yates over the label alphabet
        std::vector<int> alphabet(class_count);
        std::iota(alphabet.begin(), alphabet.end(), 0);
        for (int t = 0; t < size; ++t) {
            const size_t pick = t + rng.below(uint64_t(class_count - t));
            std::swap(alphabet[t], alphabet[pick]);
        }
        sets[j].assign(alphabet.begin(), alphabet.begin() + size);
        std::sort(sets[j].begin(), sets[j].end());
    }
    return sets;
}

PartitionPlan partition_hetero_label(const Dataset& ds, int clients, uint64_t seed, bool disjoint) {
    ds.validate();
    if (clients < 2) throw ContractError("hetero-label needs at least 2 clients");
    if (ds.class_count < 6) throw ContractError("hetero-label needs at least 6 classes");

    const auto by_label = indices_by_label(ds);
    for (int k = 0; k < ds.class_count; ++k) {
        if (by_label[k].empty()) {
            throw ContractError("hetero-label: parent dataset has no samples of label " +
                                std::to_string(k));
        }
    }

    Rng rng(seed);
    std::vector<std::vector<int>> sets;
    bool covered = false;
    for (int attempt = 0; attempt < kRetryCap && !covered; ++attempt) {
        sets = draw_label_sets(clients, ds.class_count, rng);
        std::vector<char> held(ds.class_count, 0);
        for (const auto& s : sets) {
            for (int k : s) held[k] = 1;
        }
        covered = std::all_of(held.begin(), held.end(), [](char h) { return h != 0; });
    }
    if (!covered) {
        throw ConfigError("hetero-label: could not cover every label within " +
                          std::to_string(kRetryCap) + " draws");
    }

    PartitionPlan plan;
    plan.client_indices.resize(clients);
    plan.labels_per_client = sets;

    if (!disjoint) {
        for (int j = 0; j < clients; ++j) {
            for (int k : sets[j]) {
                const auto& src = by_label[k];
                plan.client_indices[j].insert(plan.client_indices[j].end(), src.begin(), src.end());
            }
        }
    } else {
        // split each shared label's samples evenly among its holders
        for (int k = 0; k < ds.class_count; ++k) {
            std::vector<int> holders;
            for (int j = 0; j < clients; ++j) {
                if (std::binary_search(sets[j].begin(), sets[j].end(), k)) holders.push_back(j);
            }
            std::vector<int64_t> pool = by_label[k];
            rng.shuffle(pool);
            const size_t m = holders.size();
            const size_t base = pool.size() / m, extra = pool.size() % m;
            size_t pos = 0;
            for (size_t h = 0; h < m; ++h) {
                const size_t take = base + (h < extra ? 1 : 0);
                auto& dst = plan.client_indices[holders[h]];
                dst.insert(dst.end(), pool.begin() + pos, pool.begin() + pos + take);
                pos += take;
            }
        }
    }

    for (auto& idx : plan.client_indices) {
        std::sort(idx.begin(), idx.end());
        if (idx.empty()) throw ConfigError("hetero-label: a client received no samples");
    }
    fill_histograms(plan, ds);
    return plan;
}

PartitionPlan partition_hetero_dir(const Dataset& ds, int clients, double alpha, uint64_t seed) {
    ds.validate();
    if (clients < 2) throw ContractError("hetero-dir needs at least 2 clients");
    if (!(alpha > 0.0)) throw ContractError("hetero-dir alpha must be positive");

    const auto by_label = indices_by_label(ds);
    Rng rng(seed);

    PartitionPlan plan;
    plan.alpha = alpha;

    for (int attempt = 0; attempt < kRetryCap; ++attempt) {
        plan.client_indices.assign(clients, {});
        plan.dirichlet_proportions = Matrix(ds.class_count, clients);

        for (int k = 0; k < ds.class_count; ++k) {
            if (by_label[k].empty()) continue;
            std::vector<int64_t> pool = by_label[k];
            rng.shuffle(pool);
            const std::vector<double> props = rng.dirichlet(alpha, size_t(clients));
            for (int j = 0; j < clients; ++j) plan.dirichlet_proportions.at(k, j) = props[j];
            const std::vector<int64_t> counts = apportion(props, int64_t(pool.size()));
            size_t pos = 0;
            for (int j = 0; j < clients; ++j) {
                auto& dst = plan.client_indices[j];
                dst.insert(dst.end(), pool.begin() + pos, pool.begin() + pos + counts[j]);
                pos += size_t(counts[j]);
            }
        }

        const bool all_nonempty = std::all_of(plan.client_indices.begin(), plan.client_indices.end(),
                                              [](const auto& v) { return !v.empty(); });
        if (all_nonempty) {
            for (auto& idx : plan.client_indices) std::sort(idx.begin(), idx.end());
            fill_histograms(plan, ds);
            return plan;
        }
    }
    throw ConfigError("hetero-dir: a client stayed empty after " + std::to_string(kRetryCap) +
                      " draws (alpha=" + std::to_string(alpha) + ", clients=" +
                      std::to_string(clients) + ")");
}

} // namespace fuselab
