#include "fuselab.h"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "fuselab/dataset.hpp"
#include "fuselab/error.hpp"
#include "fuselab/fusion.hpp"
#include "fuselab/harness.hpp"
#include "fuselab/nn.hpp"
#include "fuselab/partition.hpp"
#include "fuselab/serialize.hpp"

struct fuselab_dataset {
    fuselab::Dataset ds;
};
struct fuselab_partition {
    fuselab::PartitionPlan plan;
};
struct fuselab_model {
    fuselab::ModelWeights model;
};
struct fuselab_results {
    std::vector<fuselab::ResultRecord> records;
};

namespace {

thread_local std::string t_last_error;

fuselab_status fail(fuselab_status code, const std::string& message) {
    t_last_error = message;
    return code;
}

template <typename F>
fuselab_status guarded(F&& body) {
    try {
        body();
        return FUSELAB_OK;
    } catch (const fuselab::ContractError& e) {
        return fail(FUSELAB_ERR_INVALID_ARGUMENT, e.what());
    } catch (const fuselab::FormatError& e) {
        return fail(FUSELAB_ERR_FORMAT, e.what());
    } catch (const fuselab::IoError& e) {
        return fail(FUSELAB_ERR_IO, e.what());
    } catch (const fuselab::TrainingError& e) {
        return fail(FUSELAB_ERR_TRAINING, e.what());
    } catch (const fuselab::ConfigError& e) {
        return fail(FUSELAB_ERR_CONFIG, e.what());
    } catch (const std::exception& e) {
        return fail(FUSELAB_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(FUSELAB_ERR_INTERNAL, "unknown error");
    }
}

bool all_present(std::initializer_list<const void*> ptrs) {
    for (const void* p : ptrs) {
        if (p == nullptr) return false;
    }
    return true;
}

#define REQUIRE_ARGS(...)                                                       \
    do {                                                                        \
        if (!all_present({__VA_ARGS__}))                                        \
            return fail(FUSELAB_ERR_INVALID_ARGUMENT, "null argument");         \
    } while (0)

std::vector<fuselab::ModelWeights> collect_models(const fuselab_model* const* models,
                                                  size_t count) {
    std::vector<fuselab::ModelWeights> out;
    out.reserve(count);
    for (size_t j = 0; j < count; ++j) {
        if (!models[j]) throw fuselab::ContractError("null model at index " + std::to_string(j));
        out.push_back(models[j]->model);
    }
    return out;
}

fuselab::MethodSpec method_from_int(int method, int k) {
    using fuselab::FusionMethod;
    switch (method) {
        case FUSELAB_METHOD_CONCAT_DIRECT: return {FusionMethod::concat_direct, 0};
        case FUSELAB_METHOD_FEDAVG: return {FusionMethod::fedavg, 0};
        case FUSELAB_METHOD_ENSEMBLE_UNIFORM: return {FusionMethod::ensemble_uniform, 0};
        case FUSELAB_METHOD_AMS_TOP1: return {FusionMethod::ams_top1, 0};
        case FUSELAB_METHOD_AMS_TOPK: return {FusionMethod::ams_topk, k};
        case FUSELAB_METHOD_AMS_FULL: return {FusionMethod::ams_full, 0};
        case FUSELAB_METHOD_AMS_CROSS: return {FusionMethod::ams_cross, 0};
        default: throw fuselab::ContractError("unknown method code " + std::to_string(method));
    }
}

void copy_str(char* dst, size_t cap, const std::string& src) {
    std::snprintf(dst, cap, "%s", src.c_str());
}

} // namespace

extern "C" {

const char* fuselab_last_error(void) { return t_last_error.c_str(); }

const char* fuselab_version(void) { return "0.1.0"; }

void fuselab_set_threads(int n) { fuselab::set_max_threads(n); }

void fuselab_set_data_dir(const char* dir) { fuselab::set_data_dir(dir ? dir : ""); }

/* datasets ---------------------------------------------------------- */

fuselab_status fuselab_dataset_diamond2d(int side, int64_t n_train, int64_t n_test, uint64_t seed,
                                         fuselab_dataset** out_train, fuselab_dataset** out_test) {
    REQUIRE_ARGS(out_train, out_test);
    return guarded([&] {
        if (side != FUSELAB_SIDE_LEFT && side != FUSELAB_SIDE_RIGHT) {
            throw fuselab::ContractError("side must be FUSELAB_SIDE_LEFT or FUSELAB_SIDE_RIGHT");
        }
        if (n_train <= 0 || n_test <= 0) {
            throw fuselab::ContractError("sample counts must be positive");
        }
        auto [train, test] = fuselab::gen_diamond2d(
            side == FUSELAB_SIDE_LEFT ? fuselab::DiamondSide::left : fuselab::DiamondSide::right,
            size_t(n_train), size_t(n_test), seed);
        *out_train = new fuselab_dataset{std::move(train)};
        *out_test = new fuselab_dataset{std::move(test)};
    });
}

fuselab_status fuselab_dataset_load_mnist(const char* images_path, const char* labels_path,
                                          int role, fuselab_dataset** out) {
    REQUIRE_ARGS(images_path, labels_path, out);
    return guarded([&] {
        *out = new fuselab_dataset{fuselab::load_mnist_idx(
            images_path, labels_path,
            role == FUSELAB_ROLE_TEST ? fuselab::Role::test : fuselab::Role::train)};
    });
}

fuselab_status fuselab_dataset_merge(const fuselab_dataset* a, const fuselab_dataset* b,
                                     fuselab_dataset** out) {
    REQUIRE_ARGS(a, b, out);
    return guarded([&] { *out = new fuselab_dataset{fuselab::merge(a->ds, b->ds)}; });
}

fuselab_status fuselab_dataset_subset(const fuselab_dataset* ds, const int64_t* indices,
                                      size_t count, fuselab_dataset** out) {
    REQUIRE_ARGS(ds, indices, out);
    return guarded(
        [&] { *out = new fuselab_dataset{fuselab::subset(ds->ds, std::span(indices, count))}; });
}

fuselab_status fuselab_dataset_size(const fuselab_dataset* ds, int64_t* out) {
    REQUIRE_ARGS(ds, out);
    *out = int64_t(ds->ds.size());
    return FUSELAB_OK;
}

fuselab_status fuselab_dataset_feature_width(const fuselab_dataset* ds, int64_t* out) {
    REQUIRE_ARGS(ds, out);
    *out = int64_t(ds->ds.feature_width());
    return FUSELAB_OK;
}

fuselab_status fuselab_dataset_class_count(const fuselab_dataset* ds, int* out) {
    REQUIRE_ARGS(ds, out);
    *out = ds->ds.class_count;
    return FUSELAB_OK;
}

fuselab_status fuselab_dataset_label(const fuselab_dataset* ds, int64_t row, int* out) {
    REQUIRE_ARGS(ds, out);
    if (row < 0 || size_t(row) >= ds->ds.size()) {
        return fail(FUSELAB_ERR_INVALID_ARGUMENT, "row out of range");
    }
    *out = ds->ds.labels[size_t(row)];
    return FUSELAB_OK;
}

fuselab_status fuselab_dataset_export_csv(const fuselab_dataset* ds, const char* path) {
    REQUIRE_ARGS(ds, path);
    return guarded([&] { fuselab::export_csv(ds->ds, path); });
}

void fuselab_dataset_free(fuselab_dataset* ds) { delete ds; }

/* partitions -------------------------------------------------------- */

fuselab_status fuselab_partition_hetero_label(const fuselab_dataset* ds, int clients,
                                              uint64_t seed, int disjoint,
                                              fuselab_partition** out) {
    REQUIRE_ARGS(ds, out);
    return guarded([&] {
        *out = new fuselab_partition{
            fuselab::partition_hetero_label(ds->ds, clients, seed, disjoint != 0)};
    });
}

fuselab_status fuselab_partition_hetero_dir(const fuselab_dataset* ds, int clients, double alpha,
                                            uint64_t seed, fuselab_partition** out) {
    REQUIRE_ARGS(ds, out);
    return guarded([&] {
        *out = new fuselab_partition{fuselab::partition_hetero_dir(ds->ds, clients, alpha, seed)};
    });
}

fuselab_status fuselab_partition_clients(const fuselab_partition* p, int* out) {
    REQUIRE_ARGS(p, out);
    *out = int(p->plan.clients());
    return FUSELAB_OK;
}

fuselab_status fuselab_partition_client_size(const fuselab_partition* p, int client,
                                             int64_t* out) {
    REQUIRE_ARGS(p, out);
    if (client < 0 || size_t(client) >= p->plan.clients()) {
        return fail(FUSELAB_ERR_INVALID_ARGUMENT, "client index out of range");
    }
    *out = int64_t(p->plan.client_indices[size_t(client)].size());
    return FUSELAB_OK;
}

fuselab_status fuselab_partition_client_indices(const fuselab_partition* p, int client,
                                                int64_t* buffer, size_t capacity,
                                                size_t* written) {
    REQUIRE_ARGS(p, buffer, written);
    if (client < 0 || size_t(client) >= p->plan.clients()) {
        return fail(FUSELAB_ERR_INVALID_ARGUMENT, "client index out of range");
    }
    const auto& idx = p->plan.client_indices[size_t(client)];
    const size_t n = std::min(capacity, idx.size());
    std::memcpy(buffer, idx.data(), n * sizeof(int64_t));
    *written = n;
    return FUSELAB_OK;
}

void fuselab_partition_free(fuselab_partition* p) { delete p; }

/* models ------------------------------------------------------------ */

fuselab_train_config fuselab_train_config_default(void) {
    fuselab::TrainConfig def;
    return {def.learning_rate, def.decay_factor, def.decay_period_epochs,
            def.batch_size,    def.epochs,       def.l1_coefficient,
            def.seed};
}

fuselab_status fuselab_train(const fuselab_dataset* ds, const int64_t* hidden_widths, size_t depth,
                             int activation, const fuselab_train_config* cfg,
                             fuselab_model** out) {
    REQUIRE_ARGS(ds, hidden_widths, cfg, out);
    return guarded([&] {
        if (activation != FUSELAB_ACT_RELU && activation != FUSELAB_ACT_LEAKY_RELU) {
            throw fuselab::ContractError("unknown activation code");
        }
        fuselab::Architecture arch;
        for (size_t l = 0; l < depth; ++l) {
            if (hidden_widths[l] <= 0) throw fuselab::ContractError("hidden widths must be positive");
            arch.hidden_widths.push_back(size_t(hidden_widths[l]));
        }
        arch.activation = activation == FUSELAB_ACT_RELU ? fuselab::Activation::relu
                                                         : fuselab::Activation::leaky_relu;
        fuselab::TrainConfig tc;
        tc.learning_rate = cfg->learning_rate;
        tc.decay_factor = cfg->decay_factor;
        tc.decay_period_epochs = cfg->decay_period_epochs;
        tc.batch_size = cfg->batch_size;
        tc.epochs = cfg->epochs;
        tc.l1_coefficient = cfg->l1_coefficient;
        tc.seed = cfg->seed;
        tc.threads = fuselab::max_threads();
        *out = new fuselab_model{fuselab::train(ds->ds, arch, tc)};
    });
}

fuselab_status fuselab_model_save(const fuselab_model* m, const char* path) {
    REQUIRE_ARGS(m, path);
    return guarded([&] { fuselab::save_model(m->model, path); });
}

fuselab_status fuselab_model_load(const char* path, fuselab_model** out) {
    REQUIRE_ARGS(path, out);
    return guarded([&] { *out = new fuselab_model{fuselab::load_model(path)}; });
}

fuselab_status fuselab_model_forward_logits(const fuselab_model* m, const double* x, size_t width,
                                            double* out_logits, size_t capacity) {
    REQUIRE_ARGS(m, x, out_logits);
    return guarded([&] {
        if (capacity < m->model.class_count()) {
            throw fuselab::ContractError("logit buffer too small");
        }
        const std::vector<double> logits =
            fuselab::forward_logits(m->model, std::span(x, width));
        std::memcpy(out_logits, logits.data(), logits.size() * sizeof(double));
    });
}

fuselab_status fuselab_model_accuracy(const fuselab_model* m, const fuselab_dataset* test,
                                      double* out) {
    REQUIRE_ARGS(m, test, out);
    return guarded([&] { *out = fuselab::evaluate_accuracy(m->model, test->ds); });
}

fuselab_status fuselab_model_class_count(const fuselab_model* m, int* out) {
    REQUIRE_ARGS(m, out);
    *out = int(m->model.class_count());
    return FUSELAB_OK;
}

void fuselab_model_free(fuselab_model* m) { delete m; }

/* fusion ------------------------------------------------------------ */

fuselab_status fuselab_fuse_fedavg(const fuselab_model* const* models, size_t count,
                                   const int64_t* sample_counts, fuselab_model** out) {
    REQUIRE_ARGS(models, out);
    return guarded([&] {
        const std::vector<fuselab::ModelWeights> local = collect_models(models, count);
        *out = new fuselab_model{fuselab::fuse_fedavg(
            local, sample_counts ? std::span(sample_counts, count) : std::span<const int64_t>())};
    });
}

fuselab_status fuselab_fuse_concat(const fuselab_model* const* models, size_t count,
                                   fuselab_model** out) {
    REQUIRE_ARGS(models, out);
    return guarded([&] {
        const std::vector<fuselab::ModelWeights> local = collect_models(models, count);
        *out = new fuselab_model{fuselab::fuse_concat(local)};
    });
}

fuselab_status fuselab_eval_method(const fuselab_model* const* models, size_t count, int method,
                                   int k, const fuselab_dataset* test, double* out_accuracy) {
    REQUIRE_ARGS(models, test, out_accuracy);
    return guarded([&] {
        const std::vector<fuselab::ModelWeights> local = collect_models(models, count);
        *out_accuracy = fuselab::evaluate_method(local, method_from_int(method, k), test->ds);
    });
}

fuselab_status fuselab_disturbing_matrix(const fuselab_model* const* models, size_t count,
                                         const double* x, size_t width, double* out,
                                         size_t capacity) {
    REQUIRE_ARGS(models, x, out);
    return guarded([&] {
        const std::vector<fuselab::ModelWeights> local = collect_models(models, count);
        const fuselab::DisturbingMatrix m =
            fuselab::disturbing_matrix(std::span<const fuselab::ModelWeights>(local),
                                       std::span(x, width));
        if (capacity < m.values.a.size()) throw fuselab::ContractError("output buffer too small");
        std::memcpy(out, m.values.a.data(), m.values.a.size() * sizeof(double));
    });
}

fuselab_status fuselab_export_disturbing_csv(const fuselab_model* const* models, size_t count,
                                             const fuselab_dataset* ds, const char* path) {
    REQUIRE_ARGS(models, ds, path);
    return guarded([&] {
        const std::vector<fuselab::ModelWeights> local = collect_models(models, count);
        fuselab::export_disturbing_csv(local, ds->ds, path);
    });
}

/* experiments ------------------------------------------------------- */

fuselab_status fuselab_run_config_text(const char* text, fuselab_results** out) {
    REQUIRE_ARGS(text, out);
    return guarded([&] {
        const fuselab::ExperimentConfig cfg = fuselab::ExperimentConfig::parse_text(text);
        *out = new fuselab_results{fuselab::run_experiment(cfg)};
    });
}

fuselab_status fuselab_run_config_file(const char* path, fuselab_results** out) {
    REQUIRE_ARGS(path, out);
    return guarded([&] {
        const fuselab::ExperimentConfig cfg = fuselab::ExperimentConfig::parse_file(path);
        *out = new fuselab_results{fuselab::run_experiment(cfg)};
    });
}

fuselab_status fuselab_run_sweep(const char* config_path, const double* alphas, size_t count,
                                 fuselab_results** out) {
    REQUIRE_ARGS(config_path, alphas, out);
    return guarded([&] {
        const fuselab::ExperimentConfig cfg = fuselab::ExperimentConfig::parse_file(config_path);
        *out = new fuselab_results{fuselab::run_alpha_sweep(cfg, std::span(alphas, count))};
    });
}

fuselab_status fuselab_results_count(const fuselab_results* r, size_t* out) {
    REQUIRE_ARGS(r, out);
    *out = r->records.size();
    return FUSELAB_OK;
}

fuselab_status fuselab_results_get(const fuselab_results* r, size_t index,
                                   fuselab_result_row* out) {
    REQUIRE_ARGS(r, out);
    if (index >= r->records.size()) return fail(FUSELAB_ERR_INVALID_ARGUMENT, "index out of range");
    const fuselab::ResultRecord& rec = r->records[index];
    copy_str(out->dataset, sizeof out->dataset, rec.dataset);
    copy_str(out->partition, sizeof out->partition, rec.partition);
    out->alpha = rec.alpha;
    out->clients = rec.clients;
    copy_str(out->depth, sizeof out->depth, rec.depth);
    copy_str(out->method, sizeof out->method, rec.method);
    out->trial = rec.trial;
    out->seed = rec.seed;
    out->accuracy = rec.accuracy;
    out->wall_ms = rec.wall_ms;
    return FUSELAB_OK;
}

fuselab_status fuselab_results_save_csv(const fuselab_results* r, const char* path) {
    REQUIRE_ARGS(r, path);
    return guarded([&] { fuselab::write_records_csv(r->records, path); });
}

fuselab_status fuselab_results_save_jsonl(const fuselab_results* r, const char* path) {
    REQUIRE_ARGS(r, path);
    return guarded([&] { fuselab::write_records_jsonl(r->records, path); });
}

fuselab_status fuselab_results_load_csv(const char* path, fuselab_results** out) {
    REQUIRE_ARGS(path, out);
    return guarded([&] { *out = new fuselab_results{fuselab::read_records_csv(path)}; });
}

void fuselab_results_free(fuselab_results* r) { delete r; }

fuselab_status fuselab_summarize_csv(const char* records_csv_path,
                                     const char* summary_csv_path_or_null, char** out_table) {
    REQUIRE_ARGS(records_csv_path, out_table);
    return guarded([&] {
        const std::vector<fuselab::ResultRecord> records =
            fuselab::read_records_csv(records_csv_path);
        const std::vector<fuselab::SummaryRow> rows = fuselab::summarize(records);
        if (summary_csv_path_or_null) fuselab::write_summary_csv(rows, summary_csv_path_or_null);
        const std::string table = fuselab::summary_table(rows);
        char* buf = static_cast<char*>(std::malloc(table.size() + 1));
        if (!buf) throw std::bad_alloc();
        std::memcpy(buf, table.c_str(), table.size() + 1);
        *out_table = buf;
    });
}

void fuselab_string_free(char* s) { std::free(s); }

/* demo --------------------------------------------------------------- */

fuselab_status fuselab_run_demo2d(const uint64_t* seeds, size_t count, fuselab_demo_row* out_rows) {
    REQUIRE_ARGS(seeds, out_rows);
    return guarded([&] {
        const std::vector<fuselab::DemoRecord> records =
            fuselab::run_demo2d(std::span(seeds, count));
        for (size_t i = 0; i < records.size(); ++i) {
            out_rows[i].seed = records[i].seed;
            out_rows[i].acc_left = records[i].acc_left;
            out_rows[i].acc_right = records[i].acc_right;
            out_rows[i].acc_global = records[i].acc_global;
            out_rows[i].outcome = int(records[i].outcome);
        }
    });
}

fuselab_status fuselab_demo2d_export_data(uint64_t seed, const char* directory) {
    REQUIRE_ARGS(directory);
    return guarded([&] {
        namespace fs = std::filesystem;
        fs::create_directories(directory);
        auto [lt, lv] = fuselab::gen_diamond2d(fuselab::DiamondSide::left, 300, 150,
                                               fuselab::mix_seed(seed, 11));
        auto [rt, rv] = fuselab::gen_diamond2d(fuselab::DiamondSide::right, 300, 150,
                                               fuselab::mix_seed(seed, 12));
        fuselab::export_csv(lt, (fs::path(directory) / "left_train.csv").string());
        fuselab::export_csv(lv, (fs::path(directory) / "left_test.csv").string());
        fuselab::export_csv(rt, (fs::path(directory) / "right_train.csv").string());
        fuselab::export_csv(rv, (fs::path(directory) / "right_test.csv").string());
    });
}

} /* extern "C" */
