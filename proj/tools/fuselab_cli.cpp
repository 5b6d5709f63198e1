// Command-line front end. Talks to the fuselab shared library exclusively
// through the public C interface.

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fuselab.h"

namespace {

int die(fuselab_status rc, const char* what) {
    std::fprintf(stderr, "fuselab: %s failed: %s\n", what, fuselab_last_error());
    return int(rc);
}

std::vector<uint64_t> expand_seeds(const std::string& spec) {
    // "0-49" for a range, else a comma list "3,17,42"
    std::vector<uint64_t> seeds;
    const size_t dash = spec.find('-');
    if (dash != std::string::npos && spec.find(',') == std::string::npos) {
        const uint64_t lo = std::stoull(spec.substr(0, dash));
        const uint64_t hi = std::stoull(spec.substr(dash + 1));
        if (hi < lo) throw CLI::ValidationError("--seeds", "range end below start");
        for (uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
        return seeds;
    }
    size_t pos = 0;
    while (pos < spec.size()) {
        size_t comma = spec.find(',', pos);
        if (comma == std::string::npos) comma = spec.size();
        seeds.push_back(std::stoull(spec.substr(pos, comma - pos)));
        pos = comma + 1;
    }
    if (seeds.empty()) throw CLI::ValidationError("--seeds", "no seeds given");
    return seeds;
}

const char* outcome_name(int o) {
    switch (o) {
        case 0: return "success";
        case 1: return "fail";
        case 2: return "neither";
        case 3: return "diverged";
    }
    return "?";
}

int cmd_demo2d(const std::string& seeds_spec, const std::string& out_csv,
               const std::string& dump_dir) {
    const std::vector<uint64_t> seeds = expand_seeds(seeds_spec);
    std::vector<fuselab_demo_row> rows(seeds.size());
    if (fuselab_status rc = fuselab_run_demo2d(seeds.data(), seeds.size(), rows.data())) {
        return die(rc, "demo2d");
    }

    int successes = 0, fails = 0, diverged = 0;
    std::printf("%10s %8s %8s %8s  %s\n", "seed", "left", "right", "global", "outcome");
    for (const fuselab_demo_row& r : rows) {
        std::printf("%10" PRIu64 " %8.2f %8.2f %8.2f  %s\n", r.seed, 100.0 * r.acc_left,
                    100.0 * r.acc_right, 100.0 * r.acc_global, outcome_name(r.outcome));
        successes += r.outcome == 0;
        fails += r.outcome == 1;
        diverged += r.outcome == 3;
    }
    std::printf("\n%zu seeds: %d success, %d fail, %d neither, %d diverged\n", seeds.size(),
                successes, fails, int(seeds.size()) - successes - fails - diverged, diverged);

    if (!out_csv.empty()) {
        std::FILE* f = std::fopen(out_csv.c_str(), "w");
        if (!f) {
            std::fprintf(stderr, "fuselab: cannot open %s\n", out_csv.c_str());
            return 1;
        }
        std::fprintf(f, "seed,acc_left,acc_right,acc_global,outcome\n");
        for (const fuselab_demo_row& r : rows) {
            std::fprintf(f, "%" PRIu64 ",%.17g,%.17g,%.17g,%s\n", r.seed, r.acc_left, r.acc_right,
                         r.acc_global, outcome_name(r.outcome));
        }
        std::fclose(f);
    }
    if (!dump_dir.empty()) {
        if (fuselab_status rc = fuselab_demo2d_export_data(seeds.front(), dump_dir.c_str())) {
            return die(rc, "demo2d data export");
        }
    }
    return 0;
}

int emit_results(fuselab_results* results, const std::string& out_csv, const std::string& jsonl,
                 bool summary) {
    size_t n = 0;
    fuselab_results_count(results, &n);
    std::printf("%zu records\n", n);

    const std::string csv_path = out_csv.empty() ? "results.csv" : out_csv;
    if (fuselab_status rc = fuselab_results_save_csv(results, csv_path.c_str())) {
        return die(rc, "saving CSV");
    }
    std::printf("wrote %s\n", csv_path.c_str());
    if (!jsonl.empty()) {
        if (fuselab_status rc = fuselab_results_save_jsonl(results, jsonl.c_str())) {
            return die(rc, "saving JSONL");
        }
        std::printf("wrote %s\n", jsonl.c_str());
    }
    if (summary) {
        char* table = nullptr;
        if (fuselab_status rc = fuselab_summarize_csv(csv_path.c_str(), nullptr, &table)) {
            return die(rc, "summarize");
        }
        std::fputs(table, stdout);
        fuselab_string_free(table);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"one-shot federated model fusion simulator"};
    app.require_subcommand(1);

    int threads = 0;
    std::string data_dir;
    app.add_option("--threads", threads, "worker cap for parallel training (0 = auto)");
    app.add_option("--data-dir", data_dir, "directory with the MNIST IDX files "
                                           "(overrides FUSELAB_DATA_DIR)");

    auto* demo = app.add_subcommand("demo2d", "two-client 2D fusion demonstration");
    std::string seeds_spec = "0-19";
    std::string demo_csv, dump_dir;
    demo->add_option("--seeds", seeds_spec, "seed list 3,17,42 or range 0-49");
    demo->add_option("--out", demo_csv, "write per-seed results CSV");
    demo->add_option("--dump-data", dump_dir, "export the first seed's datasets as CSV");

    auto* run = app.add_subcommand("run", "run an experiment configuration");
    std::string run_config, run_csv, run_jsonl;
    bool run_summary = false;
    run->add_option("--config", run_config, "experiment config file")->required();
    run->add_option("--out", run_csv, "records CSV path (default results.csv)");
    run->add_option("--jsonl", run_jsonl, "also mirror records as JSON lines");
    run->add_flag("--summary", run_summary, "print the mean +- std table");

    auto* sweep = app.add_subcommand("sweep", "run a config across a heterogeneity sweep");
    std::string sweep_config, sweep_csv, sweep_jsonl, alphas_spec;
    bool sweep_summary = false;
    sweep->add_option("--config", sweep_config, "experiment config file")->required();
    sweep->add_option("--alphas", alphas_spec, "ascending comma list, e.g. 5e-4,1e-2,0.1,0.5,1")
        ->required();
    sweep->add_option("--out", sweep_csv, "records CSV path (default results.csv)");
    sweep->add_option("--jsonl", sweep_jsonl, "also mirror records as JSON lines");
    sweep->add_flag("--summary", sweep_summary, "print the mean +- std table");

    auto* summ = app.add_subcommand("summarize", "aggregate a records CSV");
    std::string in_csv, summary_csv;
    summ->add_option("--in", in_csv, "records CSV produced by run/sweep")->required();
    summ->add_option("--out", summary_csv, "also write the grouped summary as CSV");

    CLI11_PARSE(app, argc, argv);

    if (threads > 0) fuselab_set_threads(threads);
    if (!data_dir.empty()) fuselab_set_data_dir(data_dir.c_str());

    try {
    if (demo->parsed()) return cmd_demo2d(seeds_spec, demo_csv, dump_dir);

    if (run->parsed()) {
        fuselab_results* results = nullptr;
        if (fuselab_status rc = fuselab_run_config_file(run_config.c_str(), &results)) {
            return die(rc, "run");
        }
        const int rc = emit_results(results, run_csv, run_jsonl, run_summary);
        fuselab_results_free(results);
        return rc;
    }

    if (sweep->parsed()) {
        std::vector<double> alphas;
        size_t pos = 0;
        while (pos < alphas_spec.size()) {
            size_t comma = alphas_spec.find(',', pos);
            if (comma == std::string::npos) comma = alphas_spec.size();
            alphas.push_back(std::stod(alphas_spec.substr(pos, comma - pos)));
            pos = comma + 1;
        }
        fuselab_results* results = nullptr;
        if (fuselab_status rc =
                fuselab_run_sweep(sweep_config.c_str(), alphas.data(), alphas.size(), &results)) {
            return die(rc, "sweep");
        }
        const int rc = emit_results(results, sweep_csv, sweep_jsonl, sweep_summary);
        fuselab_results_free(results);
        return rc;
    }

    if (summ->parsed()) {
        char* table = nullptr;
        if (fuselab_status rc = fuselab_summarize_csv(
                in_csv.c_str(), summary_csv.empty() ? nullptr : summary_csv.c_str(), &table)) {
            return die(rc, "summarize");
        }
        std::fputs(table, stdout);
        fuselab_string_free(table);
        return 0;
    }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fuselab: %s\n", e.what());
        return 1;
    }
    return 0;
}
