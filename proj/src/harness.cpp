#include "fuselab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fuselab/error.hpp"
#include "fuselab/fusion.hpp"
#include "fuselab/rng.hpp"

namespace fuselab {

namespace {

std::string g_data_dir;
int g_max_threads = 0;

double now_ms() {
    using namespace std::chrono;
    return duration<double, std::milli>(steady_clock::now().time_since_epoch()).count();
}

/// Runs tasks(0..count) over up to max_threads() workers; task i writes only
/// slot i of its output, so the result is identical to a sequential run.
void parallel_for(size_t count, const std::function<void(size_t)>& task) {
    const size_t workers = std::min<size_t>(size_t(max_threads()), count);
    if (workers <= 1) {
        for (size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                try {
                    task(i);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: bad boolean for " + key + ": " + v);
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

void set_data_dir(const std::string& dir) { g_data_dir = dir; }

std::string data_dir() {
    if (!g_data_dir.empty()) return g_data_dir;
    const char* env = std::getenv("FUSELAB_DATA_DIR");
    return env ? env : "";
}

void set_max_threads(int n) { g_max_threads = n > 0 ? n : 0; }

int max_threads() {
    if (g_max_threads > 0) return g_max_threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? int(hw) : 1;
}

Dataset load_mnist_split(Role role) {
    const std::string dir = data_dir();
    if (dir.empty()) {
        throw IoError("MNIST location unknown: set FUSELAB_DATA_DIR or pass a data directory");
    }
    const char* stem = (role == Role::train) ? "train" : "t10k";
    namespace fs = std::filesystem;
    for (const char* sep : {"-", "."}) {
        const fs::path images = fs::path(dir) / (std::string(stem) + "-images" + sep + "idx3-ubyte");
        const fs::path labels = fs::path(dir) / (std::string(stem) + "-labels" + sep + "idx1-ubyte");
        if (fs::exists(images) && fs::exists(labels)) {
            return load_mnist_idx(images.string(), labels.string(), role);
        }
    }
    throw IoError("MNIST files for the " + std::string(stem) + " split not found under " + dir);
}

std::string MethodSpec::name() const {
    switch (kind) {
        case FusionMethod::concat_direct: return "concat_direct";
        case FusionMethod::fedavg: return "fedavg";
        case FusionMethod::ensemble_uniform: return "ensemble_uniform";
        case FusionMethod::ams_top1: return "ams_top1";
        case FusionMethod::ams_topk: return "ams_topk(" + std::to_string(k) + ")";
        case FusionMethod::ams_full: return "ams_full";
        case FusionMethod::ams_cross: return "ams_cross";
    }
    return "?";
}

MethodSpec MethodSpec::parse(const std::string& text) {
    const std::string t = trim(text);
    if (t == "concat_direct") return {FusionMethod::concat_direct, 0};
    if (t == "fedavg") return {FusionMethod::fedavg, 0};
    if (t == "ensemble_uniform" || t == "ensemble") return {FusionMethod::ensemble_uniform, 0};
    if (t == "ams_top1") return {FusionMethod::ams_top1, 0};
    if (t == "ams_full") return {FusionMethod::ams_full, 0};
    if (t == "ams_cross") return {FusionMethod::ams_cross, 0};
    if (t.rfind("ams_topk(", 0) == 0 && t.back() == ')') {
        const std::string inner = t.substr(9, t.size() - 10);
        try {
            const int k = std::stoi(inner);
            if (k < 1) throw ConfigError("ams_topk k must be >= 1");
            return {FusionMethod::ams_topk, k};
        } catch (const std::invalid_argument&) {
            throw ConfigError("bad ams_topk argument: " + inner);
        }
    }
    throw ConfigError("unknown fusion method: " + t);
}

void ExperimentConfig::validate() const {
    if (dataset != "diamond2d" && dataset != "mnist") {
        throw ConfigError("config: dataset must be diamond2d or mnist, got " + dataset);
    }
    if (partition != "hetero_label" && partition != "hetero_dir") {
        throw ConfigError("config: partition must be hetero_label or hetero_dir, got " + partition);
    }
    if (partition == "hetero_dir" && !(alpha > 0.0)) {
        throw ConfigError("config: hetero_dir needs alpha > 0");
    }
    if (clients < 2) throw ConfigError("config: clients must be >= 2");
    if (trials < 1) throw ConfigError("config: trials must be >= 1");
    if (depth < 1) throw ConfigError("config: depth must be >= 1");
    if (hidden_width < 1) throw ConfigError("config: hidden_width must be >= 1");
    if (depth_range) {
        if (depth_range->first < 1 || depth_range->second > 5 ||
            depth_range->first > depth_range->second) {
            throw ConfigError("config: depth_range must lie within [1,5]");
        }
    }
    if (methods.empty()) throw ConfigError("config: no methods listed");
    for (const MethodSpec& m : methods) {
        if (m.kind == FusionMethod::ams_topk && (m.k < 1 || m.k > clients)) {
            throw ConfigError("config: ams_topk k must lie in [1, clients]");
        }
        if (depth_range) {
            if (m.kind == FusionMethod::fedavg || m.kind == FusionMethod::concat_direct) {
                throw ConfigError("config: " + m.name() + " needs identical architectures; "
                                  "remove depth_range");
            }
            if (m.kind == FusionMethod::ams_top1) {
                throw ConfigError("config: ams_top1 needs equal depths; use ams_cross");
            }
        }
        if (m.kind == FusionMethod::fedavg && !shared_init) {
            throw ConfigError("config: fedavg requires shared_init = true");
        }
    }
    train.validate();
}

ExperimentConfig ExperimentConfig::parse_text(const std::string& text) {
    ExperimentConfig cfg;
    cfg.methods.clear();
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (val.empty()) throw ConfigError("config: empty value for " + key);
        try {
            if (key == "dataset") cfg.dataset = val;
            else if (key == "partition") cfg.partition = val;
            else if (key == "alpha") cfg.alpha = std::stod(val);
            else if (key == "clients") cfg.clients = std::stoi(val);
            else if (key == "depth") cfg.depth = std::stoi(val);
            else if (key == "depth_range") {
                std::vector<std::string> parts = split(val, ',');
                if (parts.size() == 1) parts = split(val, '-');
                if (parts.size() != 2) throw ConfigError("config: depth_range wants two values");
                cfg.depth_range = {std::stoi(trim(parts[0])), std::stoi(trim(parts[1]))};
            } else if (key == "methods") {
                for (const std::string& m : split(val, ',')) cfg.methods.push_back(MethodSpec::parse(m));
            } else if (key == "trials") cfg.trials = std::stoi(val);
            else if (key == "base_seed") cfg.base_seed = std::stoull(val);
            else if (key == "shared_init") cfg.shared_init = parse_bool(val, key);
            else if (key == "hidden_width") cfg.hidden_width = std::stoi(val);
            else if (key == "activation") {
                if (val == "relu") cfg.activation = Activation::relu;
                else if (val == "leaky_relu") cfg.activation = Activation::leaky_relu;
                else throw ConfigError("config: activation must be relu or leaky_relu");
            }
            else if (key == "disjoint_labels") cfg.disjoint_labels = parse_bool(val, key);
            else if (key == "fedavg_weighted") cfg.fedavg_weighted = parse_bool(val, key);
            else if (key == "train.learning_rate") cfg.train.learning_rate = std::stod(val);
            else if (key == "train.decay_factor") cfg.train.decay_factor = std::stod(val);
            else if (key == "train.decay_period_epochs") cfg.train.decay_period_epochs = std::stoi(val);
            else if (key == "train.batch_size") cfg.train.batch_size = std::stoi(val);
            else if (key == "train.epochs") cfg.train.epochs = std::stoi(val);
            else if (key == "train.l1_coefficient") cfg.train.l1_coefficient = std::stod(val);
            else if (key == "train.seed") cfg.train.seed = std::stoull(val);
            else throw ConfigError("config: unknown key " + key);
        } catch (const std::invalid_argument&) {
            throw ConfigError("config: bad value for " + key + ": " + val);
        } catch (const std::out_of_range&) {
            throw ConfigError("config: value out of range for " + key + ": " + val);
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str());
}

const char* DemoRecord::outcome_name(Outcome o) {
    switch (o) {
        case Outcome::success: return "success";
        case Outcome::fail: return "fail";
        case Outcome::neither: return "neither";
        case Outcome::diverged: return "diverged";
    }
    return "?";
}

Demo2dOptions::Demo2dOptions() {
    train.learning_rate = 0.5;
    train.decay_factor = 1.0;
    train.decay_period_epochs = 1;
    train.batch_size = 300;  // full batch
    train.epochs = 600;
    train.l1_coefficient = 0.0;
}

std::vector<DemoRecord> run_demo2d(std::span<const uint64_t> seeds, const Demo2dOptions& opts) {
    if (seeds.empty()) throw ContractError("run_demo2d needs at least one seed");

    std::vector<DemoRecord> records(seeds.size());
    parallel_for(seeds.size(), [&](size_t i) {
        const uint64_t seed = seeds[i];
        DemoRecord rec;
        rec.seed = seed;

        auto [left_train, left_test] =
            gen_diamond2d(DiamondSide::left, opts.n_train, opts.n_test, mix_seed(seed, 11));
        auto [right_train, right_test] =
            gen_diamond2d(DiamondSide::right, opts.n_train, opts.n_test, mix_seed(seed, 12));
        const Dataset merged_test = merge(left_test, right_test);

        const Architecture arch{{1}, opts.activation};
        try {
            TrainConfig cfg = opts.train;
            cfg.threads = 1;
            cfg.seed = mix_seed(seed, 21);
            const ModelWeights left =
                train_from(init_model(arch, 2, 2, mix_seed(seed, 31)), left_train, cfg);
            cfg.seed = mix_seed(seed, 22);
            const ModelWeights right =
                train_from(init_model(arch, 2, 2, mix_seed(seed, 32)), right_train, cfg);
            const ModelWeights fused = fuse_concat_toy(left, right);

            rec.acc_left = evaluate_accuracy(left, merged_test);
            rec.acc_right = evaluate_accuracy(right, merged_test);
            rec.acc_global = evaluate_accuracy(fused, merged_test);
            if (rec.acc_global >= opts.success_threshold) {
                rec.outcome = DemoRecord::Outcome::success;
            } else if (rec.acc_global < std::min(rec.acc_left, rec.acc_right)) {
                rec.outcome = DemoRecord::Outcome::fail;
            } else {
                rec.outcome = DemoRecord::Outcome::neither;
            }
        } catch (const TrainingError&) {
            rec.outcome = DemoRecord::Outcome::diverged;
        }
        records[i] = rec;
    });
    return records;
}

namespace {

uint64_t partition_checksum(const PartitionPlan& plan) {
    uint64_t h = fnv1a(nullptr, 0);
    for (const auto& idx : plan.client_indices) {
        const uint64_t n = idx.size();
        h = fnv1a(&n, sizeof n, h);
        h = fnv1a(idx.data(), idx.size() * sizeof(int64_t), h);
    }
    return h;
}

uint64_t models_checksum(std::span<const ModelWeights> models) {
    uint64_t h = fnv1a(nullptr, 0);
    for (const ModelWeights& m : models) {
        const uint64_t c = model_checksum(m);
        h = fnv1a(&c, sizeof c, h);
    }
    return h;
}

/// Per-sample disturbing matrix assembled from cached per-model logits.
DisturbingMatrix matrix_from_cache(std::span<const Matrix> cache, size_t row) {
    DisturbingMatrix m;
    m.values = Matrix(cache[0].cols, cache.size());
    for (size_t j = 0; j < cache.size(); ++j) {
        const double* logits = cache[j].row(row);
        for (size_t c = 0; c < cache[j].cols; ++c) m.values.at(c, j) = logits[c];
    }
    return m;
}

double accuracy_from_cache(std::span<const Matrix> cache, const Dataset& test,
                           const std::function<std::vector<double>(const DisturbingMatrix&)>& rule) {
    std::atomic<size_t> hits{0};
    parallel_for(test.size(), [&](size_t i) {
        const DisturbingMatrix m = matrix_from_cache(cache, i);
        const std::vector<double> probs = rule(m);
        if (argmax(probs) == size_t(test.labels[i])) hits.fetch_add(1);
    });
    return double(hits.load()) / double(test.size());
}

bool method_needs_cache(const MethodSpec& m) {
    return m.kind != FusionMethod::fedavg && m.kind != FusionMethod::concat_direct;
}

double method_accuracy(std::span<const ModelWeights> models, std::span<const Matrix> cache,
                       const MethodSpec& method, const Dataset& test,
                       std::span<const int64_t> sample_counts) {
    switch (method.kind) {
        case FusionMethod::fedavg:
            return evaluate_accuracy(fuse_fedavg(models, sample_counts), test);
        case FusionMethod::concat_direct:
            return evaluate_accuracy(fuse_concat(models), test);
        case FusionMethod::ensemble_uniform:
            return accuracy_from_cache(cache, test, ensemble_from);
        case FusionMethod::ams_top1:
        case FusionMethod::ams_cross:
            return accuracy_from_cache(cache, test, ams_top1_from);
        case FusionMethod::ams_full:
            return accuracy_from_cache(cache, test, [&](const DisturbingMatrix& m) {
                return ams_topk_from(m, models.size());
            });
        case FusionMethod::ams_topk:
            return accuracy_from_cache(cache, test, [&](const DisturbingMatrix& m) {
                return ams_topk_from(m, size_t(method.k));
            });
    }
    throw Error("unhandled fusion method");
}

} // namespace

double evaluate_method(std::span<const ModelWeights> models, const MethodSpec& method,
                       const Dataset& test, std::span<const int64_t> sample_counts) {
    if (models.empty()) throw ContractError("evaluate_method: no models");
    test.validate();
    if (method.kind == FusionMethod::ams_topk &&
        (method.k < 1 || size_t(method.k) > models.size())) {
        throw ContractError("evaluate_method: ams_topk k out of range");
    }
    std::vector<Matrix> cache;
    if (method_needs_cache(method)) {
        cache.resize(models.size());
        for (size_t j = 0; j < models.size(); ++j) cache[j] = batch_logits(models[j], test);
    }
    return method_accuracy(models, cache, method, test, sample_counts);
}

std::vector<ResultRecord> run_experiment_on(const Dataset& train_ds, const Dataset& test_ds,
                                            const ExperimentConfig& cfg) {
    cfg.validate();
    train_ds.validate();
    test_ds.validate();

    const bool needs_cache =
        std::any_of(cfg.methods.begin(), cfg.methods.end(), method_needs_cache);

    std::vector<ResultRecord> records;
    const std::string depth_str = cfg.depth_range
        ? std::to_string(cfg.depth_range->first) + "-" + std::to_string(cfg.depth_range->second)
        : std::to_string(cfg.depth);
    const double rec_alpha =
        cfg.partition == "hetero_dir" ? cfg.alpha : std::nan("");

    for (int trial = 0; trial < cfg.trials; ++trial) {
        const uint64_t trial_seed = cfg.base_seed + 1000 * uint64_t(trial);

        const PartitionPlan plan =
            cfg.partition == "hetero_dir"
                ? partition_hetero_dir(train_ds, cfg.clients, cfg.alpha, trial_seed)
                : partition_hetero_label(train_ds, cfg.clients, trial_seed, cfg.disjoint_labels);

        // one depth per client: fixed, or cycling through the range
        std::vector<int> depths(cfg.clients, cfg.depth);
        if (cfg.depth_range) {
            const int span = cfg.depth_range->second - cfg.depth_range->first + 1;
            for (int j = 0; j < cfg.clients; ++j) depths[j] = cfg.depth_range->first + j % span;
        }

        std::vector<ModelWeights> models(cfg.clients);
        std::vector<int64_t> counts(cfg.clients);
        parallel_for(size_t(cfg.clients), [&](size_t j) {
            const Dataset shard = subset(train_ds, plan.client_indices[j]);
            counts[j] = int64_t(shard.size());
            Architecture arch;
            arch.hidden_widths.assign(size_t(depths[j]), size_t(cfg.hidden_width));
            arch.activation = cfg.activation;
            const uint64_t init_seed =
                cfg.shared_init ? mix_seed(trial_seed, 100) : mix_seed(trial_seed, 100 + 31 * j);
            TrainConfig tc = cfg.train;
            tc.seed = mix_seed(trial_seed, 200 + j);
            tc.threads = (max_threads() > cfg.clients) ? max_threads() / cfg.clients : 1;
            models[j] = train_from(
                init_model(arch, train_ds.feature_width(), size_t(train_ds.class_count), init_seed),
                shard, tc);
        });

        const uint64_t plan_sum = partition_checksum(plan);
        const uint64_t model_sum = models_checksum(models);

        std::vector<Matrix> cache;
        if (needs_cache) {
            cache.resize(models.size());
            for (size_t j = 0; j < models.size(); ++j) cache[j] = batch_logits(models[j], test_ds);
        }

        for (const MethodSpec& method : cfg.methods) {
            const double t0 = now_ms();
            const double acc = method_accuracy(
                models, cache, method, test_ds,
                cfg.fedavg_weighted ? std::span<const int64_t>(counts)
                                    : std::span<const int64_t>());
            const double t1 = now_ms();

            if (models_checksum(models) != model_sum || partition_checksum(plan) != plan_sum) {
                throw Error("fairness violation: method " + method.name() +
                            " mutated shared trial state");
            }

            ResultRecord rec;
            rec.dataset = cfg.dataset;
            rec.partition = cfg.partition;
            rec.alpha = rec_alpha;
            rec.clients = cfg.clients;
            rec.depth = depth_str;
            rec.method = method.name();
            rec.trial = trial;
            rec.seed = trial_seed;
            rec.accuracy = acc;
            rec.wall_ms = t1 - t0;
            records.push_back(std::move(rec));
        }
    }
    return records;
}

std::vector<ResultRecord> run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.dataset == "diamond2d") {
        auto [lt, lv] = gen_diamond2d(DiamondSide::left, 300, 150, mix_seed(cfg.base_seed, 55));
        auto [rt, rv] = gen_diamond2d(DiamondSide::right, 300, 150, mix_seed(cfg.base_seed, 56));
        return run_experiment_on(merge(lt, rt), merge(lv, rv), cfg);
    }
    const Dataset train_ds = load_mnist_split(Role::train);
    const Dataset test_ds = load_mnist_split(Role::test);
    return run_experiment_on(train_ds, test_ds, cfg);
}

std::vector<ResultRecord> run_alpha_sweep(const ExperimentConfig& cfg,
                                          std::span<const double> alphas) {
    if (alphas.empty()) throw ContractError("alpha sweep needs at least one alpha");
    for (size_t i = 0; i < alphas.size(); ++i) {
        if (!(alphas[i] > 0.0)) throw ContractError("alphas must be positive");
        if (i > 0 && alphas[i] <= alphas[i - 1]) {
            throw ContractError("alphas must be strictly increasing");
        }
    }

    std::optional<Dataset> train_ds, test_ds;
    if (cfg.dataset == "mnist") {
        train_ds = load_mnist_split(Role::train);
        test_ds = load_mnist_split(Role::test);
    }

    std::vector<ResultRecord> all;
    for (double a : alphas) {
        ExperimentConfig c = cfg;
        c.partition = "hetero_dir";
        c.alpha = a;
        std::vector<ResultRecord> part =
            train_ds ? run_experiment_on(*train_ds, *test_ds, c) : run_experiment(c);
        all.insert(all.end(), part.begin(), part.end());
    }
    return all;
}

namespace {

struct GroupKey {
    std::string dataset, partition, depth, method;
    double alpha;
    int clients;

    bool operator<(const GroupKey& o) const {
        const auto rank = [](const GroupKey& k) {
            return std::tie(k.dataset, k.partition, k.clients, k.depth, k.method);
        };
        if (rank(*this) != rank(o)) return rank(*this) < rank(o);
        const bool na = std::isnan(alpha), nb = std::isnan(o.alpha);
        if (na != nb) return na;
        if (!na && alpha != o.alpha) return alpha < o.alpha;
        return false;
    }
};

} // namespace

std::vector<SummaryRow> summarize(std::span<const ResultRecord> records) {
    if (records.empty()) throw ContractError("summarize needs at least one record");
    std::map<GroupKey, std::vector<double>> groups;
    for (const ResultRecord& r : records) {
        groups[{r.dataset, r.partition, r.depth, r.method, r.alpha, r.clients}].push_back(
            r.accuracy);
    }
    std::vector<SummaryRow> rows;
    for (const auto& [key, accs] : groups) {
        SummaryRow row;
        row.dataset = key.dataset;
        row.partition = key.partition;
        row.alpha = key.alpha;
        row.clients = key.clients;
        row.depth = key.depth;
        row.method = key.method;
        row.n = int(accs.size());
        double mean = 0.0;
        for (double a : accs) mean += a;
        mean /= double(accs.size());
        double var = 0.0;
        if (accs.size() > 1) {
            for (double a : accs) var += (a - mean) * (a - mean);
            var /= double(accs.size() - 1);
        }
        row.mean = mean;
        row.stddev = std::sqrt(var);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string summary_table(std::span<const SummaryRow> rows) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof line, "%-10s %-13s %-9s %7s %6s %-18s %3s %16s\n", "dataset",
                  "partition", "alpha", "clients", "depth", "method", "n", "accuracy %");
    out << line;
    out << std::string(89, '-') << "\n";
    for (const SummaryRow& r : rows) {
        char alpha[24];
        if (std::isnan(r.alpha)) std::snprintf(alpha, sizeof alpha, "-");
        else std::snprintf(alpha, sizeof alpha, "%g", r.alpha);
        char acc[40];
        if (r.n > 1) {
            std::snprintf(acc, sizeof acc, "%.2f +- %.2f", 100.0 * r.mean, 100.0 * r.stddev);
        } else {
            std::snprintf(acc, sizeof acc, "%.2f (n=1)", 100.0 * r.mean);
        }
        std::snprintf(line, sizeof line, "%-10s %-13s %-9s %7d %6s %-18s %3d %16s\n",
                      r.dataset.c_str(), r.partition.c_str(), alpha, r.clients, r.depth.c_str(),
                      r.method.c_str(), r.n, acc);
        out << line;
    }
    return out.str();
}

static const char* kRecordsHeader = "dataset,partition,alpha,clients,depth,method,trial,seed,accuracy,wall_ms";

void write_records_csv(std::span<const ResultRecord> records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << kRecordsHeader << "\n";
    for (const ResultRecord& r : records) {
        out << r.dataset << "," << r.partition << ","
            << (std::isnan(r.alpha) ? std::string() : fmt_double(r.alpha)) << "," << r.clients
            << "," << r.depth << "," << r.method << "," << r.trial << "," << r.seed << ","
            << fmt_double(r.accuracy) << "," << fmt_double(r.wall_ms) << "\n";
    }
    if (!out) throw IoError("short write to " + path);
}

std::vector<ResultRecord> read_records_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": empty file");
    if (trim(line) != kRecordsHeader) {
        throw FormatError(path + ": unexpected header: " + line);
    }
    std::vector<ResultRecord> records;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const std::vector<std::string> f = split(trim(line), ',');
        if (f.size() != 10) {
            throw FormatError(path + " line " + std::to_string(lineno) + ": expected 10 fields");
        }
        try {
            ResultRecord r;
            r.dataset = f[0];
            r.partition = f[1];
            r.alpha = f[2].empty() ? std::nan("") : std::stod(f[2]);
            r.clients = std::stoi(f[3]);
            r.depth = f[4];
            r.method = f[5];
            r.trial = std::stoi(f[6]);
            r.seed = std::stoull(f[7]);
            r.accuracy = std::stod(f[8]);
            r.wall_ms = std::stod(f[9]);
            records.push_back(std::move(r));
        } catch (const std::exception&) {
            throw FormatError(path + " line " + std::to_string(lineno) + ": bad field value");
        }
    }
    return records;
}

void write_records_jsonl(std::span<const ResultRecord> records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (const ResultRecord& r : records) {
        nlohmann::json j{{"dataset", r.dataset}, {"partition", r.partition},
                         {"clients", r.clients}, {"depth", r.depth},
                         {"method", r.method},   {"trial", r.trial},
                         {"seed", r.seed},       {"accuracy", r.accuracy},
                         {"wall_ms", r.wall_ms}};
        if (std::isnan(r.alpha)) j["alpha"] = nullptr;
        else j["alpha"] = r.alpha;
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("short write to " + path);
}

void write_summary_csv(std::span<const SummaryRow> rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "dataset,partition,alpha,clients,depth,method,n,accuracy_mean,accuracy_std\n";
    for (const SummaryRow& r : rows) {
        out << r.dataset << "," << r.partition << ","
            << (std::isnan(r.alpha) ? std::string() : fmt_double(r.alpha)) << "," << r.clients
            << "," << r.depth << "," << r.method << "," << r.n << "," << fmt_double(r.mean) << ","
            << fmt_double(r.stddev) << "\n";
    }
    if (!out) throw IoError("short write to " + path);
}

void write_demo_csv(std::span<const DemoRecord> records, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "seed,acc_left,acc_right,acc_global,outcome\n";
    for (const DemoRecord& r : records) {
        out << r.seed << "," << fmt_double(r.acc_left) << "," << fmt_double(r.acc_right) << ","
            << fmt_double(r.acc_global) << "," << DemoRecord::outcome_name(r.outcome) << "\n";
    }
    if (!out) throw IoError("short write to " + path);
}

} // namespace fuselab
