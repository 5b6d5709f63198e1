#include "fuselab/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "fuselab/error.hpp"
#include "fuselab/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fuselab {

void ModelWeights::validate() const {
    if (layers.empty()) throw ContractError("model has no layers");
    for (size_t l = 0; l < layers.size(); ++l) {
        if (layers[l].rows == 0 || layers[l].cols < 2) {
            throw ContractError("layer " + std::to_string(l) + " has degenerate shape");
        }
        if (l > 0 && layers[l].cols != layers[l - 1].rows + 1) {
            throw ContractError("layer " + std::to_string(l) + " expects " +
                                std::to_string(layers[l].cols - 1) + " inputs but layer " +
                                std::to_string(l - 1) + " produces " +
                                std::to_string(layers[l - 1].rows));
        }
        if (!layers[l].all_finite()) {
            throw ContractError("layer " + std::to_string(l) + " contains non-finite weights");
        }
    }
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ContractError("learning_rate must be positive");
    if (!(decay_factor > 0.0 && decay_factor <= 1.0)) {
        throw ContractError("decay_factor must be in (0, 1]");
    }
    if (decay_period_epochs < 1) throw ContractError("decay_period_epochs must be >= 1");
    if (batch_size < 1) throw ContractError("batch_size must be >= 1");
    if (epochs < 1) throw ContractError("epochs must be >= 1");
    if (l1_coefficient < 0.0) throw ContractError("l1_coefficient must be nonnegative");
}

namespace {

inline double activate(double z, Activation act) {
    if (z > 0.0) return z;
    return act == Activation::relu ? 0.0 : kLeakySlope * z;
}

inline double activate_grad(double z, Activation act) {
    if (z > 0.0) return 1.0;
    return act == Activation::relu ? 0.0 : kLeakySlope;
}

} // namespace

std::vector<double> forward_logits(const ModelWeights& model, std::span<const double> x) {
    if (model.layers.empty()) throw ContractError("model has no layers");
    if (x.size() + 1 != model.layers.front().cols) {
        throw ContractError("layer 0 expects " + std::to_string(model.layers.front().cols - 1) +
                            " inputs, got " + std::to_string(x.size()));
    }

    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    for (size_t l = 0; l < model.layers.size(); ++l) {
        const Matrix& w = model.layers[l];
        if (w.cols != cur.size() + 1) {
            throw ContractError("layer " + std::to_string(l) + " expects " +
                                std::to_string(w.cols - 1) + " inputs, got " +
                                std::to_string(cur.size()));
        }
        next.assign(w.rows, 0.0);
        const bool last = (l + 1 == model.layers.size());
        for (size_t o = 0; o < w.rows; ++o) {
            const double s = dot_affine(w.row(o), cur.data(), cur.size());
            next[o] = last ? s : activate(s, model.activation);
        }
        cur.swap(next);
    }
    return cur;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    double m = -HUGE_VAL;
    for (double v : logits) m = std::max(m, v);
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

double cross_entropy(const Matrix& probs, std::span<const int> labels) {
    if (probs.rows == 0) throw ContractError("cross_entropy on empty batch");
    if (probs.rows != labels.size()) throw ContractError("cross_entropy batch size mismatch");
    double total = 0.0;
    for (size_t i = 0; i < probs.rows; ++i) {
        const int y = labels[i];
        if (y < 0 || size_t(y) >= probs.cols) {
            throw ContractError("cross_entropy label out of range at row " + std::to_string(i));
        }
        total += -std::log(std::max(probs.at(i, y), kProbFloor));
    }
    return total / double(probs.rows);
}

namespace {

/// Scratch buffers reused across training steps.
struct Workspace {
    Matrix xaug;                  // B x (I+1)
    std::vector<Matrix> preact;   // per layer: B x width
    std::vector<Matrix> act_aug;  // per hidden layer: B x (width+1)
    Matrix probs;                 // B x C
    std::vector<Matrix> dz;
    Matrix da;
};

/// Forward/backward over one augmented batch. Fills grads (one matrix per
/// layer, mean data gradient + l1 * sign(w)) and returns the mean clamped
/// cross-entropy of the batch.
double backward_batch(const ModelWeights& model, const Matrix& xaug,
                      std::span<const int> labels, double l1, int threads, Workspace& ws,
                      std::vector<Matrix>& grads) {
    const size_t depth = model.layers.size();
    const size_t batch = xaug.rows;
    ws.preact.resize(depth);
    ws.act_aug.resize(depth);  // slot d-1 unused
    ws.dz.resize(depth);
    grads.resize(depth);

    // forward
    const Matrix* input = &xaug;
    for (size_t l = 0; l < depth; ++l) {
        gemm_nt(*input, model.layers[l], ws.preact[l], threads);
        if (l + 1 < depth) {
            Matrix& aug = ws.act_aug[l];
            aug.rows = batch;
            aug.cols = model.layers[l].rows + 1;
            aug.a.resize(aug.rows * aug.cols);
            for (size_t b = 0; b < batch; ++b) {
                const double* z = ws.preact[l].row(b);
                double* dst = aug.row(b);
                for (size_t o = 0; o + 1 < aug.cols; ++o) dst[o] = activate(z[o], model.activation);
                dst[aug.cols - 1] = 1.0;
            }
            input = &aug;
        }
    }

    // softmax + loss + output delta (mean gradient, so 1/batch here)
    const Matrix& zlast = ws.preact[depth - 1];
    const size_t classes = zlast.cols;
    ws.probs.rows = batch;
    ws.probs.cols = classes;
    ws.probs.a.resize(batch * classes);
    Matrix& dlast = ws.dz[depth - 1];
    dlast.rows = batch;
    dlast.cols = classes;
    dlast.a.resize(batch * classes);
    double loss = 0.0;
    const double inv_batch = 1.0 / double(batch);
    for (size_t b = 0; b < batch; ++b) {
        const double* z = zlast.row(b);
        double* p = ws.probs.row(b);
        double m = -HUGE_VAL;
        for (size_t c = 0; c < classes; ++c) m = std::max(m, z[c]);
        double sum = 0.0;
        for (size_t c = 0; c < classes; ++c) {
            p[c] = std::exp(z[c] - m);
            sum += p[c];
        }
        double* d = dlast.row(b);
        const int y = labels[b];
        for (size_t c = 0; c < classes; ++c) {
            p[c] /= sum;
            d[c] = (p[c] - (size_t(y) == c ? 1.0 : 0.0)) * inv_batch;
        }
        loss += -std::log(std::max(p[y], kProbFloor));
    }
    loss *= inv_batch;

    // backward through the chain
    for (size_t l = depth; l-- > 0;) {
        const Matrix& below = (l == 0) ? xaug : ws.act_aug[l - 1];
        gemm_tn(ws.dz[l], below, grads[l], threads);
        if (l > 0) {
            const size_t width = model.layers[l - 1].rows;
            gemm_nn_trunc(ws.dz[l], model.layers[l], width, ws.da, threads);
            Matrix& dprev = ws.dz[l - 1];
            dprev.rows = batch;
            dprev.cols = width;
            dprev.a.resize(batch * width);
            for (size_t b = 0; b < batch; ++b) {
                const double* z = ws.preact[l - 1].row(b);
                const double* up = ws.da.row(b);
                double* d = dprev.row(b);
                for (size_t o = 0; o < width; ++o) d[o] = up[o] * activate_grad(z[o], model.activation);
            }
        }
    }

    if (l1 > 0.0) {
        for (size_t l = 0; l < depth; ++l) {
            const double* w = model.layers[l].a.data();
            double* g = grads[l].a.data();
            const size_t n = grads[l].a.size();
            for (size_t i = 0; i < n; ++i) {
                if (w[i] > 0.0) g[i] += l1;
                else if (w[i] < 0.0) g[i] -= l1;
            }
        }
    }
    return loss;
}

void gather_batch(const Dataset& ds, std::span<const size_t> rows, Matrix& xaug) {
    const size_t width = ds.feature_width();
    xaug.rows = rows.size();
    xaug.cols = width + 1;
    xaug.a.resize(xaug.rows * xaug.cols);
    for (size_t b = 0; b < rows.size(); ++b) {
        double* dst = xaug.row(b);
        std::memcpy(dst, ds.features.row(rows[b]), width * sizeof(double));
        dst[width] = 1.0;
    }
}

} // namespace

std::vector<Matrix> backward(const ModelWeights& model, const Matrix& batch_x,
                             std::span<const int> labels, double l1_coefficient, int threads) {
    model.validate();
    if (batch_x.rows == 0) throw ContractError("backward on empty batch");
    if (batch_x.rows != labels.size()) throw ContractError("backward batch size mismatch");
    if (batch_x.cols != model.input_width()) {
        throw ContractError("backward input width " + std::to_string(batch_x.cols) +
                            " does not match model input " + std::to_string(model.input_width()));
    }
    Workspace ws;
    Matrix xaug(batch_x.rows, batch_x.cols + 1);
    for (size_t b = 0; b < batch_x.rows; ++b) {
        std::memcpy(xaug.row(b), batch_x.row(b), batch_x.cols * sizeof(double));
        xaug.row(b)[batch_x.cols] = 1.0;
    }
    std::vector<Matrix> grads;
    backward_batch(model, xaug, labels, l1_coefficient, threads, ws, grads);
    return grads;
}

ModelWeights init_model(const Architecture& arch, size_t input_width, size_t class_count,
                        uint64_t seed) {
    if (input_width == 0 || class_count == 0) throw ContractError("init_model: zero width");
    for (size_t w : arch.hidden_widths) {
        if (w == 0) throw ContractError("init_model: zero hidden width");
    }

    Rng rng(mix_seed(seed, 0));
    ModelWeights model;
    model.activation = arch.activation;
    size_t fan_in = input_width;
    for (size_t l = 0; l <= arch.hidden_widths.size(); ++l) {
        const size_t out = (l < arch.hidden_widths.size()) ? arch.hidden_widths[l] : class_count;
        Matrix w(out, fan_in + 1);
        const double limit = std::sqrt(6.0 / double(fan_in));
        for (size_t r = 0; r < out; ++r) {
            double* row = w.row(r);
            for (size_t c = 0; c < fan_in; ++c) row[c] = rng.uniform(-limit, limit);
            row[fan_in] = 0.0;
        }
        model.layers.push_back(std::move(w));
        fan_in = out;
    }
    return model;
}

ModelWeights train(const Dataset& ds, const Architecture& arch, const TrainConfig& cfg) {
    ds.validate();
    return train_from(init_model(arch, ds.feature_width(), size_t(ds.class_count), cfg.seed), ds,
                      cfg);
}

ModelWeights train_from(ModelWeights model, const Dataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    ds.validate();
    model.validate();
    if (model.input_width() != ds.feature_width()) {
        throw ContractError("train: model input width does not match dataset");
    }
    if (model.class_count() != size_t(ds.class_count)) {
        throw ContractError("train: model class count does not match dataset");
    }

    Rng order_rng(mix_seed(cfg.seed, 1));
    const size_t n = ds.size();
    const size_t batch_size = std::min<size_t>(size_t(cfg.batch_size), n);

    // Adam state
    std::vector<Matrix> m1, m2, grads;
    for (const Matrix& w : model.layers) {
        m1.emplace_back(w.rows, w.cols);
        m2.emplace_back(w.rows, w.cols);
    }
    double beta1_pow = 1.0, beta2_pow = 1.0;
    long step = 0;

    Workspace ws;
    std::vector<size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> batch_labels(batch_size);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr =
            cfg.learning_rate * std::pow(cfg.decay_factor, epoch / cfg.decay_period_epochs);
        order_rng.shuffle(perm);

        for (size_t start = 0; start < n; start += batch_size) {
            const size_t count = std::min(batch_size, n - start);
            gather_batch(ds, std::span(perm).subspan(start, count), ws.xaug);
            batch_labels.resize(count);
            for (size_t b = 0; b < count; ++b) batch_labels[b] = ds.labels[perm[start + b]];

            const double loss = backward_batch(model, ws.xaug, batch_labels, cfg.l1_coefficient,
                                               cfg.threads, ws, grads);
            if (!std::isfinite(loss)) {
                throw TrainingError("training diverged (non-finite loss) at epoch " +
                                        std::to_string(epoch) + ", step " + std::to_string(step),
                                    epoch, step);
            }

            ++step;
            beta1_pow *= kAdamBeta1;
            beta2_pow *= kAdamBeta2;
            const double bc1 = 1.0 - beta1_pow;
            const double bc2 = 1.0 - beta2_pow;
            for (size_t l = 0; l < model.layers.size(); ++l) {
                double* w = model.layers[l].a.data();
                double* m = m1[l].a.data();
                double* v = m2[l].a.data();
                const double* g = grads[l].a.data();
                const size_t len = model.layers[l].a.size();
                for (size_t i = 0; i < len; ++i) {
                    m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g[i];
                    v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g[i] * g[i];
                    const double mhat = m[i] / bc1;
                    const double vhat = v[i] / bc2;
                    w[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEpsilon);
                }
            }
        }
    }
    return model;
}

double evaluate_accuracy(const ModelWeights& model, const Dataset& test) {
    test.validate();
    const Matrix logits = batch_logits(model, test);
    size_t hits = 0;
    for (size_t i = 0; i < test.size(); ++i) {
        const double* row = logits.row(i);
        if (argmax(std::span(row, logits.cols)) == size_t(test.labels[i])) ++hits;
    }
    return double(hits) / double(test.size());
}

double evaluate_accuracy(const Predictor& predict, const Dataset& test) {
    test.validate();
    size_t hits = 0;
    for (size_t i = 0; i < test.size(); ++i) {
        const std::vector<double> probs =
            predict(std::span(test.features.row(i), test.feature_width()));
        if (argmax(probs) == size_t(test.labels[i])) ++hits;
    }
    return double(hits) / double(test.size());
}

Matrix batch_logits(const ModelWeights& model, const Dataset& ds) {
    model.validate();
    Matrix out(ds.size(), model.class_count());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long i = 0; i < long(ds.size()); ++i) {
        const std::vector<double> logits =
            forward_logits(model, std::span(ds.features.row(i), ds.feature_width()));
        std::memcpy(out.row(i), logits.data(), logits.size() * sizeof(double));
    }
    return out;
}

uint64_t model_checksum(const ModelWeights& model) {
    uint64_t h = fnv1a(&model.activation, sizeof model.activation);
    for (const Matrix& w : model.layers) {
        const uint64_t dims[2] = {w.rows, w.cols};
        h = fnv1a(dims, sizeof dims, h);
        h = fnv1a(w.a.data(), w.a.size() * sizeof(double), h);
    }
    return h;
}

size_t argmax(std::span<const double> v) {
    size_t best = 0;
    for (size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[best]) best = i;
    }
    return best;
}

} // namespace fuselab
