#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fuselab/dataset.hpp"
#include "fuselab/nn.hpp"
#include "fuselab/partition.hpp"

namespace fuselab {

enum class FusionMethod {
    concat_direct,
    fedavg,
    ensemble_uniform,
    ams_top1,
    ams_topk,
    ams_full,
    ams_cross,
};

struct MethodSpec {
    FusionMethod kind = FusionMethod::ams_top1;
    int k = 0;  // ams_topk only

    std::string name() const;
    /// Parses "fedavg", "ams_topk(3)", ... ; unknown names throw ConfigError.
    static MethodSpec parse(const std::string& text);
};

struct ExperimentConfig {
    std::string dataset = "mnist";        // diamond2d | mnist
    std::string partition = "hetero_dir"; // hetero_label | hetero_dir
    double alpha = 0.5;
    int clients = 5;
    int depth = 1;
    std::optional<std::pair<int, int>> depth_range;  // cross-architecture runs
    std::vector<MethodSpec> methods;
    int trials = 5;
    uint64_t base_seed = 42;
    TrainConfig train;
    bool shared_init = true;

    // paper-silent knobs, defaulted
    int hidden_width = 100;
    Activation activation = Activation::relu;
    bool disjoint_labels = false;   // hetero-label variant
    bool fedavg_weighted = false;   // sample-count weighting instead of uniform

    void validate() const;
    static ExperimentConfig parse_text(const std::string& text);
    static ExperimentConfig parse_file(const std::string& path);
};

/// One (dataset, partition, method, trial) accuracy measurement.
struct ResultRecord {
    std::string dataset;
    std::string partition;
    double alpha = 0.0;  // NaN when not applicable
    int clients = 0;
    std::string depth;   // "1" or a "1-5" range
    std::string method;
    int trial = 0;
    uint64_t seed = 0;
    double accuracy = 0.0;
    double wall_ms = 0.0;
};

struct DemoRecord {
    enum class Outcome { success, fail, neither, diverged };
    uint64_t seed = 0;
    double acc_left = 0.0;
    double acc_right = 0.0;
    double acc_global = 0.0;
    Outcome outcome = Outcome::neither;

    static const char* outcome_name(Outcome o);
};

struct Demo2dOptions {
    size_t n_train = 300;
    size_t n_test = 150;
    TrainConfig train;   // demo defaults set by the constructor
    // leaky by default: at learning rate 0.5 a plain ReLU one-neuron net
    // regularly dies mid-training and freezes near chance level
    Activation activation = Activation::leaky_relu;
    double success_threshold = 0.90;

    Demo2dOptions();
};

/// The two-client 2D experiment: per seed, sample both sides, train the two
/// one-neuron models, concat-fuse, and score all three on the merged test
/// set. A diverging seed is recorded as Outcome::diverged and skipped.
std::vector<DemoRecord> run_demo2d(std::span<const uint64_t> seeds,
                                   const Demo2dOptions& opts = Demo2dOptions());

/// Full pipeline on explicit train/test data: per trial, partition, train J
/// clients (optionally from one shared initialization), then score every
/// requested method on the same trained models. Deterministic end to end;
/// a checksum guards that no method mutates the shared models.
std::vector<ResultRecord> run_experiment_on(const Dataset& train_ds, const Dataset& test_ds,
                                            const ExperimentConfig& cfg);

/// Resolves cfg.dataset (diamond2d, or mnist via the data directory), then
/// runs run_experiment_on.
std::vector<ResultRecord> run_experiment(const ExperimentConfig& cfg);

/// run_experiment once per alpha (hetero-dir forced), concatenating records.
std::vector<ResultRecord> run_alpha_sweep(const ExperimentConfig& cfg,
                                          std::span<const double> alphas);

struct SummaryRow {
    std::string dataset;
    std::string partition;
    double alpha = 0.0;
    int clients = 0;
    std::string depth;
    std::string method;
    int n = 0;
    double mean = 0.0;
    double stddev = 0.0;  // sample (n-1); 0 when n == 1
};

/// Accuracy of one fusion method on a test set. Sample counts are only
/// consulted by weighted fedavg.
double evaluate_method(std::span<const ModelWeights> models, const MethodSpec& method,
                       const Dataset& test, std::span<const int64_t> sample_counts = {});

/// Mean +- sample std per (dataset, partition, alpha, clients, depth,
/// method); grouping is independent of record order.
std::vector<SummaryRow> summarize(std::span<const ResultRecord> records);
std::string summary_table(std::span<const SummaryRow> rows);

// CSV header: dataset,partition,alpha,clients,depth,method,trial,seed,accuracy,wall_ms
void write_records_csv(std::span<const ResultRecord> records, const std::string& path);
std::vector<ResultRecord> read_records_csv(const std::string& path);
void write_records_jsonl(std::span<const ResultRecord> records, const std::string& path);
void write_summary_csv(std::span<const SummaryRow> rows, const std::string& path);
void write_demo_csv(std::span<const DemoRecord> records, const std::string& path);

/// MNIST location: explicit override, else $FUSELAB_DATA_DIR.
void set_data_dir(const std::string& dir);
std::string data_dir();
Dataset load_mnist_split(Role role);

/// Worker cap for parallel client training (defaults to the hardware count).
void set_max_threads(int n);
int max_threads();

} // namespace fuselab
