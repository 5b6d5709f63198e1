#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fuselab/dataset.hpp"
#include "fuselab/nn.hpp"

namespace fuselab {

/// C x J matrix of pre-softmax outputs; column j holds model j's logits for
/// one input.
struct DisturbingMatrix {
    Matrix values;

    size_t classes() const { return values.rows; }
    size_t clients() const { return values.cols; }
};

/// The structural composition of same-depth client models into one network:
/// stacked first layer, block-diagonal middle layers (each block keeps its
/// own bias entries in the shared trailing column), and the per-client
/// output blocks left separate. Forward through the shared part reproduces
/// every client's own hidden activations exactly.
struct GlobalBlockModel {
    Matrix first_layer;
    std::vector<Matrix> middle_layers;
    std::vector<Matrix> head_blocks;                // J blocks, C x (width_j + 1)
    std::vector<std::vector<size_t>> block_widths;  // per hidden level: widths per client
    Activation activation = Activation::relu;
    size_t input_width = 0;
    size_t class_count = 0;

    size_t clients() const { return head_blocks.size(); }

    /// Concatenated penultimate activations (per-client blocks in order).
    std::vector<double> hidden_forward(std::span<const double> x) const;
};

/// Requires >= 2 models of identical depth, input width, and class count
/// (widths per layer may differ); the offending model index is named
/// otherwise.
GlobalBlockModel build_global_block(std::span<const ModelWeights> models);

/// Column j = forward_logits(models[j], x).
DisturbingMatrix disturbing_matrix(std::span<const ModelWeights> models, std::span<const double> x);

/// Same matrix computed through the block model's head blocks; bit-equal to
/// the per-model route.
DisturbingMatrix disturbing_matrix(const GlobalBlockModel& global, std::span<const double> x);

/// argmax_j max_c M[c,j]; ties break toward the lowest client index.
size_t ams_select(const DisturbingMatrix& m);

/// Indices of the k models with the largest per-model max logit, in
/// ascending index order (ties prefer the lower index).
std::vector<size_t> ams_topk_indices(const DisturbingMatrix& m, size_t k);

// Selection/summation primitives on an already-computed matrix.
std::vector<double> ams_top1_from(const DisturbingMatrix& m);
std::vector<double> ams_topk_from(const DisturbingMatrix& m, size_t k);
std::vector<double> ensemble_from(const DisturbingMatrix& m);

/// Predict with the single most confident local model: softmax of the
/// selected column, bit-identical to that model's standalone prediction.
std::vector<double> predict_ams_top1(std::span<const ModelWeights> models,
                                     std::span<const double> x);

/// softmax of the elementwise sum of the k most confident models' logit
/// vectors; k=1 reduces to top1 and k=J sums every model.
std::vector<double> predict_ams_topk(std::span<const ModelWeights> models,
                                     std::span<const double> x, size_t k);

std::vector<double> predict_ams_full(std::span<const ModelWeights> models,
                                     std::span<const double> x);

/// Selection by each model's own forward pass; models only need to agree on
/// the class count, so depths may differ.
std::vector<double> predict_ams_cross(std::span<const ModelWeights> models,
                                      std::span<const double> x);

/// Uniform average of the per-model softmax probability vectors.
std::vector<double> predict_ensemble(std::span<const ModelWeights> models,
                                     std::span<const double> x);

/// Coordinate-wise average of identically shaped models. Pass sample counts
/// for N_j/N weighting or an empty span for uniform weights. Accumulated as
/// deviations from the first model, so J copies of one model come back
/// exactly.
ModelWeights fuse_fedavg(std::span<const ModelWeights> models,
                         std::span<const int64_t> sample_counts);

/// The two-model single-hidden-layer concatenation: hidden rows stacked,
/// output blocks side by side with the bias columns summed. The fused logits
/// equal the elementwise sum of the locals' logits.
ModelWeights fuse_concat_toy(const ModelWeights& a, const ModelWeights& b);

/// General materialized concatenation of same-depth models: stacked first
/// layer, block-diagonal middle layers, summed output layer. Logits equal
/// the sum of all per-model logits.
ModelWeights fuse_concat(std::span<const ModelWeights> models);

/// max_c exp(f_c(x)): the routing signal. Saturates to +inf past the double
/// range; comparisons elsewhere use raw logits, never this value.
double absolute_confidence(const ModelWeights& model, std::span<const double> x);

/// The logit behind absolute_confidence, and its base-10 magnitude for
/// diagnostics of extreme scales.
double max_logit(const ModelWeights& model, std::span<const double> x);
double log10_confidence(const ModelWeights& model, std::span<const double> x);

/// Long-format dump "sample_id,c,j,logit" for every test sample.
void export_disturbing_csv(std::span<const ModelWeights> models, const Dataset& ds,
                           const std::string& path);

} // namespace fuselab
