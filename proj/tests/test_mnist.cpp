// Checks that need the real MNIST files. Exits 77 (ctest "skipped") when the
// data directory does not hold them.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "fuselab/error.hpp"
#include "fuselab/harness.hpp"
#include "fuselab/nn.hpp"

#ifndef FUSELAB_DEFAULT_DATA_DIR
#define FUSELAB_DEFAULT_DATA_DIR ""
#endif

using namespace fuselab;

namespace {
Dataset g_train, g_test;
}

TEST_CASE("official split shapes") {
    CHECK(g_train.size() == 60000);
    CHECK(g_train.feature_width() == 784);
    CHECK(g_train.class_count == 10);
    CHECK(g_test.size() == 10000);
    for (double v : g_test.features.a) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("full-train MLP reaches 95% test accuracy on the standard recipe") {
    TrainConfig cfg;  // the defaults are the MNIST recipe
    cfg.seed = 1;
    cfg.threads = max_threads();
    const ModelWeights m = train(g_train, {{100}, Activation::relu}, cfg);
    const double acc = evaluate_accuracy(m, g_test);
    MESSAGE("test accuracy: ", acc);
    CHECK(acc >= 0.95);
}

int main(int argc, char** argv) {
    if (data_dir().empty() && FUSELAB_DEFAULT_DATA_DIR[0] != '\0') {
        set_data_dir(FUSELAB_DEFAULT_DATA_DIR);
    }
    try {
        g_train = load_mnist_split(Role::train);
        g_test = load_mnist_split(Role::test);
    } catch (const Error& e) {
        std::printf("SKIPPED: %s\n", e.what());
        return 77;
    }
    doctest::Context ctx(argc, argv);
    return ctx.run();
}
