#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fuselab/error.hpp"
#include "fuselab/fusion.hpp"
#include "fuselab/rng.hpp"
#include "test_util.hpp"

using namespace fuselab;

namespace {

ModelWeights random_model(std::vector<size_t> hidden, size_t inputs, size_t classes, uint64_t seed,
                          Activation act = Activation::relu) {
    ModelWeights m = init_model({std::move(hidden), act}, inputs, classes, seed);
    Rng rng(seed ^ 0xabcdef);
    for (Matrix& w : m.layers) {
        for (size_t r = 0; r < w.rows; ++r) w.at(r, w.cols - 1) = rng.uniform(-0.7, 0.7);
    }
    return m;
}

std::vector<double> random_input(size_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n);
    for (double& v : x) v = rng.uniform(-2, 2);
    return x;
}

// One-neuron net whose logits on input (1, 1) are exactly (a, b): the hidden
// unit computes relu(0*x + 1) = 1 and the head reads (a, b) off it.
ModelWeights toy_with_logits(double a, double b) {
    ModelWeights m;
    m.activation = Activation::relu;
    Matrix hidden(1, 3);
    hidden.at(0, 2) = 1.0;
    Matrix head(2, 2);
    head.at(0, 0) = a;
    head.at(1, 0) = b;
    m.layers.push_back(std::move(hidden));
    m.layers.push_back(std::move(head));
    return m;
}

} // namespace

TEST_CASE("build_global_block: stacked shapes for widths 3 and 5") {
    const ModelWeights a = random_model({3}, 4, 2, 1);
    const ModelWeights b = random_model({5}, 4, 2, 2);
    const ModelWeights pair[2] = {a, b};
    const GlobalBlockModel g = build_global_block(std::span(pair, 2));

    CHECK(g.first_layer.rows == 8);
    CHECK(g.first_layer.cols == 5);  // shared (x, 1)
    CHECK(g.middle_layers.empty());
    REQUIRE(g.head_blocks.size() == 2);
    CHECK(g.head_blocks[0].rows == 2);
    CHECK(g.head_blocks[0].cols == 4);  // 3 hidden + bias
    CHECK(g.head_blocks[1].cols == 6);  // 5 hidden + bias
    CHECK(g.block_widths.back() == std::vector<size_t>{3, 5});
}

TEST_CASE("build_global_block: middle layers are block-diagonal with per-block bias") {
    const ModelWeights a = random_model({3, 4}, 5, 2, 3);
    const ModelWeights b = random_model({5, 6}, 5, 2, 4);
    const ModelWeights pair[2] = {a, b};
    const GlobalBlockModel g = build_global_block(std::span(pair, 2));

    REQUIRE(g.middle_layers.size() == 1);
    const Matrix& mid = g.middle_layers[0];
    CHECK(mid.rows == 10);
    CHECK(mid.cols == 9);  // 3 + 5 inputs + shared bias column
    // off-diagonal blocks are zero
    for (size_t r = 0; r < 4; ++r) {
        for (size_t c = 3; c < 8; ++c) CHECK(mid.at(r, c) == 0.0);
    }
    for (size_t r = 4; r < 10; ++r) {
        for (size_t c = 0; c < 3; ++c) CHECK(mid.at(r, c) == 0.0);
    }
    // per-block weights and bias land intact
    CHECK(mid.at(0, 0) == a.layers[1].at(0, 0));
    CHECK(mid.at(0, 8) == a.layers[1].at(0, 3));
    CHECK(mid.at(4, 3) == b.layers[1].at(0, 0));
    CHECK(mid.at(4, 8) == b.layers[1].at(0, 5));
}

TEST_CASE("build_global_block: incompatible models are named") {
    const ModelWeights a = random_model({3}, 4, 2, 5);
    const ModelWeights deeper = random_model({3, 3}, 4, 2, 6);
    const ModelWeights narrow = random_model({3}, 3, 2, 7);
    {
        const ModelWeights pair[2] = {a, deeper};
        CHECK_THROWS_WITH_AS(build_global_block(std::span(pair, 2)), doctest::Contains("model 1"),
                             ContractError);
    }
    {
        const ModelWeights pair[2] = {a, narrow};
        CHECK_THROWS_AS(build_global_block(std::span(pair, 2)), ContractError);
    }
    {
        const ModelWeights one[1] = {a};
        CHECK_THROWS_AS(build_global_block(std::span(one, 1)), ContractError);
    }
}

TEST_CASE("block model: per-block hidden activations equal each source model's") {
    const ModelWeights a = random_model({4, 3}, 6, 3, 8);
    const ModelWeights b = random_model({2, 5}, 6, 3, 9);
    const ModelWeights pair[2] = {a, b};
    const GlobalBlockModel g = build_global_block(std::span(pair, 2));

    for (uint64_t trial = 0; trial < 10; ++trial) {
        const std::vector<double> x = random_input(6, 100 + trial);
        const std::vector<double> hidden = g.hidden_forward(x);
        REQUIRE(hidden.size() == 3 + 5);

        // reference: each model's own penultimate activations, recovered by
        // running the model without its head (forward_logits leaves the last
        // layer linear, so the final activation is applied here; max() is a
        // single exact operation)
        auto penultimate = [&](const ModelWeights& m) {
            ModelWeights trunc;
            trunc.activation = m.activation;
            trunc.layers.assign(m.layers.begin(), m.layers.end() - 1);
            std::vector<double> act = forward_logits(trunc, x);
            for (double& v : act) v = std::max(v, 0.0);
            return act;
        };
        const std::vector<double> ha = penultimate(a);
        const std::vector<double> hb = penultimate(b);
        for (size_t i = 0; i < 3; ++i) CHECK(hidden[i] == ha[i]);
        for (size_t i = 0; i < 5; ++i) CHECK(hidden[3 + i] == hb[i]);
    }
}

TEST_CASE("block model: identical copies yield identical blocks") {
    const ModelWeights a = random_model({4}, 3, 2, 10);
    const ModelWeights triple[3] = {a, a, a};
    const GlobalBlockModel g = build_global_block(std::span(triple, 3));
    const std::vector<double> x = random_input(3, 11);
    const std::vector<double> hidden = g.hidden_forward(x);
    for (size_t i = 0; i < 4; ++i) {
        CHECK(hidden[i] == hidden[4 + i]);
        CHECK(hidden[i] == hidden[8 + i]);
    }
}

TEST_CASE("disturbing matrix: per-model columns, permutation, J=1") {
    const ModelWeights a = random_model({4}, 3, 5, 12);
    const ModelWeights b = random_model({6}, 3, 5, 13);
    const ModelWeights c = random_model({2}, 3, 5, 14);
    const std::vector<double> x = random_input(3, 15);

    const ModelWeights one[1] = {a};
    const DisturbingMatrix m1 = disturbing_matrix(std::span(one, 1), x);
    const std::vector<double> fa = forward_logits(a, x);
    REQUIRE(m1.clients() == 1);
    for (size_t r = 0; r < 5; ++r) CHECK(m1.values.at(r, 0) == fa[r]);

    const ModelWeights abc[3] = {a, b, c};
    const ModelWeights cab[3] = {c, a, b};
    const DisturbingMatrix m3 = disturbing_matrix(std::span(abc, 3), x);
    const DisturbingMatrix mp = disturbing_matrix(std::span(cab, 3), x);
    for (size_t r = 0; r < 5; ++r) {
        CHECK(m3.values.at(r, 0) == mp.values.at(r, 1));
        CHECK(m3.values.at(r, 1) == mp.values.at(r, 2));
        CHECK(m3.values.at(r, 2) == mp.values.at(r, 0));
    }
}

TEST_CASE("disturbing matrix: block route is bit-equal to the per-model route") {
    const ModelWeights a = random_model({4, 3}, 6, 4, 16);
    const ModelWeights b = random_model({5, 2}, 6, 4, 17);
    const ModelWeights c = random_model({3, 3}, 6, 4, 18);
    const ModelWeights models[3] = {a, b, c};
    const GlobalBlockModel g = build_global_block(std::span(models, 3));

    for (uint64_t trial = 0; trial < 25; ++trial) {
        const std::vector<double> x = random_input(6, 200 + trial);
        const DisturbingMatrix direct = disturbing_matrix(std::span(models, 3), x);
        const DisturbingMatrix blocked = disturbing_matrix(g, x);
        REQUIRE(direct.values.a.size() == blocked.values.a.size());
        CHECK(direct.values.a == blocked.values.a);  // exact, not approximate
    }
}

TEST_CASE("ams_select: scale gap, ties, and a brute-force oracle") {
    DisturbingMatrix m;
    m.values = Matrix(2, 2);
    m.values.at(0, 0) = 34.5;
    m.values.at(1, 0) = 1.0;
    m.values.at(0, 1) = 20.7;
    m.values.at(1, 1) = 19.0;
    CHECK(ams_select(m) == 0);

    DisturbingMatrix tie;
    tie.values = Matrix(3, 4, 2.5);
    CHECK(ams_select(tie) == 0);

    Rng rng(19);
    for (int trial = 0; trial < 50; ++trial) {
        DisturbingMatrix r;
        r.values = Matrix(10, 7);
        for (double& v : r.values.a) v = rng.uniform(-50, 50);
        // oracle: exhaustive double loop
        size_t best_j = 0;
        double best = -1e300;
        for (size_t j = 0; j < 7; ++j) {
            for (size_t c = 0; c < 10; ++c) {
                if (r.values.at(c, j) > best) {
                    best = r.values.at(c, j);
                    best_j = j;
                }
            }
        }
        CHECK(ams_select(r) == best_j);
    }
}

TEST_CASE("ams_select: invariant under global monotone maps, equivariant under permutation") {
    Rng rng(20);
    for (int trial = 0; trial < 30; ++trial) {
        DisturbingMatrix m;
        m.values = Matrix(6, 5);
        for (double& v : m.values.a) v = rng.uniform(-30, 30);
        const size_t pick = ams_select(m);

        DisturbingMatrix affine = m;
        for (double& v : affine.values.a) v = 2.0 * v + 3.0;
        CHECK(ams_select(affine) == pick);

        DisturbingMatrix expish = m;
        for (double& v : expish.values.a) v = std::exp(v / 50.0);
        CHECK(ams_select(expish) == pick);

        // rotate columns by one
        DisturbingMatrix rot;
        rot.values = Matrix(6, 5);
        for (size_t c = 0; c < 6; ++c) {
            for (size_t j = 0; j < 5; ++j) rot.values.at(c, (j + 1) % 5) = m.values.at(c, j);
        }
        CHECK(ams_select(rot) == (pick + 1) % 5);
    }
}

TEST_CASE("predict_ams_top1: bit-identical to the selected model's own softmax") {
    std::vector<ModelWeights> models;
    for (uint64_t j = 0; j < 4; ++j) models.push_back(random_model({5}, 4, 3, 30 + j));
    for (uint64_t trial = 0; trial < 40; ++trial) {
        const std::vector<double> x = random_input(4, 300 + trial);
        const DisturbingMatrix m = disturbing_matrix(models, x);
        const size_t j = ams_select(m);
        const std::vector<double> routed = predict_ams_top1(models, x);
        const std::vector<double> standalone = softmax(forward_logits(models[j], x));
        CHECK(routed == standalone);
    }

    const ModelWeights solo[1] = {models[0]};
    const std::vector<double> x = random_input(4, 999);
    CHECK(predict_ams_top1(std::span(solo, 1), x) == softmax(forward_logits(models[0], x)));
}

TEST_CASE("ams routing: samples of a held-out label go to the model trained on it") {
    auto [train, test] = testutil::make_blob_split(4000, 800, 10, 16, 7777, 1.0);
    std::vector<int64_t> low, high;
    for (size_t i = 0; i < train.size(); ++i) {
        (train.labels[i] < 5 ? low : high).push_back(int64_t(i));
    }
    TrainConfig cfg;
    cfg.epochs = 15;
    cfg.threads = 2;
    cfg.seed = 1;
    const ModelWeights a = train_from(init_model({{24}, Activation::relu}, 16, 10, 51),
                                      subset(train, low), cfg);
    cfg.seed = 2;
    const ModelWeights b = train_from(init_model({{24}, Activation::relu}, 16, 10, 52),
                                      subset(train, high), cfg);
    const ModelWeights pair[2] = {a, b};

    size_t routed_to_b = 0, n = 0;
    for (size_t i = 0; i < test.size(); ++i) {
        if (test.labels[i] != 7) continue;
        ++n;
        const std::vector<double> x(test.features.row(i), test.features.row(i) + 16);
        routed_to_b += ams_select(disturbing_matrix(std::span(pair, 2), x)) == 1;
    }
    REQUIRE(n > 20);
    CHECK(double(routed_to_b) / double(n) >= 2.0 / 3.0);
}

TEST_CASE("predict_ams_topk: reduction chain and k validation") {
    std::vector<ModelWeights> models;
    for (uint64_t j = 0; j < 5; ++j) models.push_back(random_model({4}, 3, 4, 40 + j));

    for (uint64_t trial = 0; trial < 25; ++trial) {
        const std::vector<double> x = random_input(3, 400 + trial);
        CHECK(predict_ams_topk(models, x, 1) == predict_ams_top1(models, x));

        // k = J: softmax of the plain sum over models in index order
        std::vector<double> sum(4, 0.0);
        for (const ModelWeights& m : models) {
            const std::vector<double> f = forward_logits(m, x);
            for (size_t c = 0; c < 4; ++c) sum[c] += f[c];
        }
        CHECK(predict_ams_topk(models, x, 5) == softmax(sum));
        CHECK(predict_ams_full(models, x) == softmax(sum));
    }

    const std::vector<double> x = random_input(3, 555);
    CHECK_THROWS_AS(predict_ams_topk(models, x, 0), ContractError);
    CHECK_THROWS_AS(predict_ams_topk(models, x, 6), ContractError);
}

TEST_CASE("predict_ams_topk: J copies preserve the single model's argmax") {
    const ModelWeights a = random_model({6}, 4, 5, 50);
    const std::vector<ModelWeights> copies(4, a);
    for (uint64_t trial = 0; trial < 20; ++trial) {
        const std::vector<double> x = random_input(4, 600 + trial);
        const std::vector<double> single = softmax(forward_logits(a, x));
        const std::vector<double> summed = predict_ams_topk(copies, x, 4);
        CHECK(argmax(summed) == argmax(single));
    }
}

TEST_CASE("ams_full equals the concat-fused model on the two-model toy") {
    const ModelWeights a = random_model({1}, 2, 2, 60);
    const ModelWeights b = random_model({1}, 2, 2, 61);
    const ModelWeights fused = fuse_concat_toy(a, b);
    const ModelWeights pair[2] = {a, b};
    for (uint64_t trial = 0; trial < 30; ++trial) {
        const std::vector<double> x = random_input(2, 700 + trial);
        const std::vector<double> via_ams = predict_ams_full(std::span(pair, 2), x);
        const std::vector<double> via_model = softmax(forward_logits(fused, x));
        for (size_t c = 0; c < 2; ++c) {
            CHECK(via_ams[c] == doctest::Approx(via_model[c]).epsilon(1e-12));
        }
    }
}

TEST_CASE("fuse_fedavg: weighted mean, uniform mean, exact idempotence") {
    ModelWeights zero = toy_with_logits(0, 0);
    for (Matrix& w : zero.layers) std::fill(w.a.begin(), w.a.end(), 0.0);
    zero.layers[0].at(0, 2) = 1.0;  // keep the hidden unit's bias at 1
    ModelWeights four = zero;
    for (Matrix& w : four.layers) std::fill(w.a.begin(), w.a.end(), 4.0);
    four.layers[0].at(0, 2) = 1.0;

    const ModelWeights pair[2] = {zero, four};
    const int64_t counts[2] = {1, 3};
    const ModelWeights weighted = fuse_fedavg(std::span(pair, 2), std::span(counts, 2));
    CHECK(weighted.layers[1].at(0, 0) == 3.0);
    const ModelWeights uniform = fuse_fedavg(std::span(pair, 2), {});
    CHECK(uniform.layers[1].at(0, 0) == 2.0);

    const ModelWeights m = random_model({5, 4}, 6, 3, 70);
    const std::vector<ModelWeights> copies(5, m);
    const ModelWeights back = fuse_fedavg(copies, {});
    for (size_t l = 0; l < m.layers.size(); ++l) CHECK(back.layers[l].a == m.layers[l].a);
}

TEST_CASE("fuse_fedavg: rejects mismatched shapes and bad counts") {
    const ModelWeights a = random_model({5}, 4, 3, 71);
    const ModelWeights b = random_model({6}, 4, 3, 72);
    const ModelWeights pair[2] = {a, b};
    CHECK_THROWS_AS(fuse_fedavg(std::span(pair, 2), {}), ContractError);

    const ModelWeights same[2] = {a, a};
    const int64_t bad_counts[1] = {5};
    CHECK_THROWS_AS(fuse_fedavg(std::span(same, 2), std::span(bad_counts, 1)), ContractError);
    const int64_t zero_counts[2] = {0, 5};
    CHECK_THROWS_AS(fuse_fedavg(std::span(same, 2), std::span(zero_counts, 2)), ContractError);
}

TEST_CASE("predict_ensemble: hand cases, oracle, and normalization") {
    // logits (500, -500) and (-500, 500): softmax saturates to [1,0] / [0,1]
    const ModelWeights up = toy_with_logits(500, -500);
    const ModelWeights down = toy_with_logits(-500, 500);
    const ModelWeights pair[2] = {up, down};
    const std::vector<double> onex{1.0, 1.0};
    const std::vector<double> avg = predict_ensemble(std::span(pair, 2), onex);
    CHECK(avg[0] == 0.5);
    CHECK(avg[1] == 0.5);

    const ModelWeights solo[1] = {up};
    CHECK(predict_ensemble(std::span(solo, 1), onex) == softmax(forward_logits(up, onex)));

    std::vector<ModelWeights> models;
    for (uint64_t j = 0; j < 4; ++j) models.push_back(random_model({5}, 3, 6, 80 + j));
    for (uint64_t trial = 0; trial < 30; ++trial) {
        const std::vector<double> x = random_input(3, 800 + trial);
        const std::vector<double> got = predict_ensemble(models, x);

        std::vector<double> want(6, 0.0);
        for (const ModelWeights& m : models) {
            const std::vector<double> p = softmax(forward_logits(m, x));
            for (size_t c = 0; c < 6; ++c) want[c] += p[c];
        }
        for (double& v : want) v /= 4.0;
        double sum = 0.0;
        for (size_t c = 0; c < 6; ++c) {
            CHECK(got[c] == doctest::Approx(want[c]).epsilon(1e-14));
            sum += got[c];
        }
        CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("fuse_concat_toy: shapes, logit additivity, and the worked case") {
    const ModelWeights a = random_model({1}, 2, 2, 90);
    const ModelWeights b = random_model({1}, 2, 2, 91);
    const ModelWeights fused = fuse_concat_toy(a, b);
    CHECK(fused.layers[0].rows == 2);  // hidden width 1 + 1
    CHECK(fused.layers[1].rows == 2);
    CHECK(fused.layers[1].cols == 3);

    for (uint64_t trial = 0; trial < 30; ++trial) {
        const std::vector<double> x = random_input(2, 900 + trial);
        const std::vector<double> fa = forward_logits(a, x);
        const std::vector<double> fb = forward_logits(b, x);
        const std::vector<double> fg = forward_logits(fused, x);
        for (size_t c = 0; c < 2; ++c) {
            CHECK(fg[c] == doctest::Approx(fa[c] + fb[c]).epsilon(1e-12));
        }
    }

    // (4, -5) + (-2, 2) = (2, -3)
    const ModelWeights first = toy_with_logits(4, -5);
    const ModelWeights second = toy_with_logits(-2, 2);
    const std::vector<double> onex{1.0, 1.0};
    const std::vector<double> out = forward_logits(fuse_concat_toy(first, second), onex);
    CHECK(out[0] == 2.0);
    CHECK(out[1] == -3.0);
}

TEST_CASE("fuse_concat_toy: leaky activation carries through the fused model") {
    const ModelWeights a = random_model({1}, 2, 2, 96, Activation::leaky_relu);
    const ModelWeights b = random_model({1}, 2, 2, 97, Activation::leaky_relu);
    const ModelWeights fused = fuse_concat_toy(a, b);
    CHECK(fused.activation == Activation::leaky_relu);
    for (uint64_t trial = 0; trial < 10; ++trial) {
        const std::vector<double> x = random_input(2, 960 + trial);
        const std::vector<double> fa = forward_logits(a, x);
        const std::vector<double> fb = forward_logits(b, x);
        const std::vector<double> fg = forward_logits(fused, x);
        for (size_t c = 0; c < 2; ++c) {
            CHECK(fg[c] == doctest::Approx(fa[c] + fb[c]).epsilon(1e-12));
        }
    }
}

TEST_CASE("fuse_concat_toy: shape preconditions") {
    const ModelWeights a = random_model({1}, 2, 2, 92);
    const ModelWeights deep = random_model({1, 1}, 2, 2, 93);
    const ModelWeights wide_input = random_model({1}, 3, 2, 94);
    CHECK_THROWS_AS(fuse_concat_toy(a, deep), ContractError);
    CHECK_THROWS_AS(fuse_concat_toy(a, wide_input), ContractError);
}

TEST_CASE("fuse_concat: general depth, logits equal the sum of locals") {
    std::vector<ModelWeights> models;
    for (uint64_t j = 0; j < 3; ++j) models.push_back(random_model({4, 3}, 5, 2, 95 + j));
    const ModelWeights fused = fuse_concat(models);
    CHECK(fused.layers.size() == 3);
    for (uint64_t trial = 0; trial < 20; ++trial) {
        const std::vector<double> x = random_input(5, 950 + trial);
        std::vector<double> want(2, 0.0);
        for (const ModelWeights& m : models) {
            const std::vector<double> f = forward_logits(m, x);
            for (size_t c = 0; c < 2; ++c) want[c] += f[c];
        }
        const std::vector<double> got = forward_logits(fused, x);
        for (size_t c = 0; c < 2; ++c) CHECK(got[c] == doctest::Approx(want[c]).epsilon(1e-12));
    }
}

TEST_CASE("absolute_confidence: unit at zero logits, monotone in the max logit") {
    const ModelWeights flat = toy_with_logits(0, 0);
    const std::vector<double> onex{1.0, 1.0};
    CHECK(absolute_confidence(flat, onex) == 1.0);

    double prev = -1.0;
    for (double top : {-3.0, 0.0, 2.0, 10.0, 100.0}) {
        const double conf = absolute_confidence(toy_with_logits(top, -50), onex);
        CHECK(conf > prev);
        prev = conf;
        CHECK(max_logit(toy_with_logits(top, -50), onex) == top);
        CHECK(log10_confidence(toy_with_logits(top, -50), onex) ==
              doctest::Approx(top / std::log(10.0)).epsilon(1e-12));
    }
}

TEST_CASE("absolute_confidence: in-label samples score higher than held-out labels") {
    auto [train, test] = testutil::make_blob_split(3000, 600, 10, 16, 4242, 1.0);
    std::vector<int64_t> held;
    const auto in_set = [](int y) { return y == 0 || y == 1 || y == 2 || y == 5 || y == 9; };
    for (size_t i = 0; i < train.size(); ++i) {
        if (in_set(train.labels[i])) held.push_back(int64_t(i));
    }
    TrainConfig cfg;
    cfg.epochs = 15;
    cfg.seed = 6;
    cfg.threads = 2;
    const ModelWeights m = train_from(init_model({{24, 24}, Activation::relu}, 16, 10, 60),
                                      subset(train, held), cfg);
    std::vector<double> in_logits, out_logits;
    for (size_t i = 0; i < test.size(); ++i) {
        const std::vector<double> x(test.features.row(i), test.features.row(i) + 16);
        (in_set(test.labels[i]) ? in_logits : out_logits).push_back(max_logit(m, x));
    }
    const double gap = testutil::median(in_logits) - testutil::median(out_logits);
    MESSAGE("median max-logit gap: ", gap);
    CHECK(gap >= 1.0);
}

TEST_CASE("predict_ams_cross: depth-heterogeneous routing and top1 coincidence") {
    // same depth: cross and top1 are the same function
    std::vector<ModelWeights> same;
    for (uint64_t j = 0; j < 3; ++j) same.push_back(random_model({4}, 3, 4, 110 + j));
    for (uint64_t trial = 0; trial < 20; ++trial) {
        const std::vector<double> x = random_input(3, 1100 + trial);
        CHECK(predict_ams_cross(same, x) == predict_ams_top1(same, x));
    }

    // depths 1..5 allowed; selection matches the per-model brute force
    std::vector<ModelWeights> varied;
    for (uint64_t d = 1; d <= 5; ++d) {
        varied.push_back(random_model(std::vector<size_t>(d, 4), 3, 4, 120 + d));
    }
    for (uint64_t trial = 0; trial < 20; ++trial) {
        const std::vector<double> x = random_input(3, 1200 + trial);
        size_t best = 0;
        double best_val = -1e300;
        for (size_t j = 0; j < varied.size(); ++j) {
            const std::vector<double> f = forward_logits(varied[j], x);
            const double m = f[argmax(f)];
            if (m > best_val) {
                best_val = m;
                best = j;
            }
        }
        CHECK(predict_ams_cross(varied, x) == softmax(forward_logits(varied[best], x)));
    }

    const ModelWeights solo[1] = {varied[0]};
    const std::vector<double> x = random_input(3, 1299);
    CHECK(predict_ams_cross(std::span(solo, 1), x) == softmax(forward_logits(varied[0], x)));

    // ams_top1 refuses depth mixtures; ams_cross accepts them
    CHECK_THROWS_AS(predict_ams_top1(varied, x), ContractError);
    CHECK_NOTHROW(predict_ams_cross(varied, x));
}

TEST_CASE("export_disturbing_csv: long format with one row per (sample, class, model)") {
    std::vector<ModelWeights> models;
    for (uint64_t j = 0; j < 2; ++j) models.push_back(random_model({3}, 4, 3, 130 + j));
    const Dataset ds = testutil::make_blobs(5, 3, 4, 131, Role::test);
    const std::string path = testutil::tmp_path("disturbing.csv");
    export_disturbing_csv(models, ds, path);

    std::ifstream in(path);
    std::string line;
    REQUIRE(std::getline(in, line));
    CHECK(line == "sample_id,c,j,logit");
    size_t rows = 0;
    std::string first;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (rows == 0) first = line;
        ++rows;
    }
    CHECK(rows == 5 * 3 * 2);
    // first row is sample 0, class 0, model 0 and carries its logit
    const std::vector<double> f0 =
        forward_logits(models[0], std::vector<double>(ds.features.row(0), ds.features.row(0) + 4));
    char expect[64];
    std::snprintf(expect, sizeof expect, "0,0,0,%.17g", f0[0]);
    CHECK(first == expect);
}
