#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fuselab/dataset.hpp"
#include "fuselab/matrix.hpp"

namespace fuselab {

enum class Activation { relu, leaky_relu };
constexpr double kLeakySlope = 0.01;

/// One dense layer. Rows are output units; the last column is the bias,
/// folded in as an extra input that is always 1.
using LayerWeights = Matrix;

/// A trained MLP: hidden layers followed by a linear output layer of
/// class_count rows. Immutable after training; safe for concurrent reads.
struct ModelWeights {
    std::vector<LayerWeights> layers;
    Activation activation = Activation::relu;

    size_t input_width() const { return layers.front().cols - 1; }
    size_t class_count() const { return layers.back().rows; }
    size_t hidden_depth() const { return layers.size() - 1; }

    /// Chain-dimension compatibility and finiteness; throws ContractError.
    void validate() const;
};

struct Architecture {
    std::vector<size_t> hidden_widths;
    Activation activation = Activation::relu;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    double decay_factor = 0.8;
    int decay_period_epochs = 2;
    int batch_size = 64;
    int epochs = 40;
    double l1_coefficient = 1e-7;
    uint64_t seed = 0;
    int threads = 1;  // gemm threads inside this one training run

    void validate() const;
};

// Adam defaults beyond the configured learning rate.
constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEpsilon = 1e-8;
// cross-entropy probability floor
constexpr double kProbFloor = 1e-12;

/// Pre-softmax output f(x). Deterministic; dimension mismatches throw a
/// ContractError that names the offending layer.
std::vector<double> forward_logits(const ModelWeights& model, std::span<const double> x);

/// Max-subtracted softmax; total on finite input.
std::vector<double> softmax(std::span<const double> logits);

/// Mean over rows of -log(p at true label), probabilities clamped at
/// kProbFloor so a zero never produces NaN or -inf.
double cross_entropy(const Matrix& probs, std::span<const int> labels);

/// Mean gradient of cross_entropy(softmax(forward(x))) over the batch plus
/// l1_coefficient * sign(w); one matrix per layer, shapes matching model.
std::vector<Matrix> backward(const ModelWeights& model, const Matrix& batch_x,
                             std::span<const int> labels, double l1_coefficient,
                             int threads = 1);

/// Fresh weights: uniform He-style fan-in entries U(-sqrt(6/fan_in), +),
/// bias columns zero, drawn layer by layer in row-major order.
ModelWeights init_model(const Architecture& arch, size_t input_width, size_t class_count,
                        uint64_t seed);

/// Seeded minibatch Adam with step decay (learning rate multiplied by
/// decay_factor every decay_period_epochs epochs) and L1 subgradient
/// regularization. The trailing partial batch is kept. Identical inputs and
/// seed give bit-identical weights. Non-finite loss throws TrainingError.
ModelWeights train(const Dataset& ds, const Architecture& arch, const TrainConfig& cfg);

/// Same optimizer loop, starting from the given weights; cfg.seed then only
/// drives shuffling and batching. This is the initialization-sharing hook.
ModelWeights train_from(ModelWeights init, const Dataset& ds, const TrainConfig& cfg);

using Predictor = std::function<std::vector<double>(std::span<const double>)>;

/// Fraction of samples whose argmax prediction equals the label.
double evaluate_accuracy(const ModelWeights& model, const Dataset& test);
double evaluate_accuracy(const Predictor& predict, const Dataset& test);

/// N x C pre-softmax outputs for a whole dataset (same exact per-sample
/// kernel as forward_logits).
Matrix batch_logits(const ModelWeights& model, const Dataset& ds);

/// FNV-1a over every layer's raw bytes plus shape and activation; used for
/// bit-identity assertions.
uint64_t model_checksum(const ModelWeights& model);

size_t argmax(std::span<const double> v);

} // namespace fuselab
