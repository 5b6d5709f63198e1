#include "fuselab/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "fuselab/error.hpp"

namespace fuselab {

namespace {

void require_nonempty(std::span<const ModelWeights> models) {
    if (models.empty()) throw ContractError("no models to fuse");
}

void require_same_classes(std::span<const ModelWeights> models) {
    require_nonempty(models);
    for (size_t j = 1; j < models.size(); ++j) {
        if (models[j].class_count() != models[0].class_count()) {
            throw ContractError("model " + std::to_string(j) + " has " +
                                std::to_string(models[j].class_count()) +
                                " classes, expected " + std::to_string(models[0].class_count()));
        }
    }
}

void require_same_shape_chain(std::span<const ModelWeights> models) {
    require_same_classes(models);
    for (size_t j = 1; j < models.size(); ++j) {
        if (models[j].layers.size() != models[0].layers.size()) {
            throw ContractError("model " + std::to_string(j) + " depth differs");
        }
        if (models[j].activation != models[0].activation) {
            throw ContractError("model " + std::to_string(j) + " activation differs");
        }
        for (size_t l = 0; l < models[0].layers.size(); ++l) {
            if (!models[j].layers[l].same_shape(models[0].layers[l])) {
                throw ContractError("model " + std::to_string(j) + " layer " + std::to_string(l) +
                                    " shape differs");
            }
        }
    }
}

/// Equal depth / input width / class count, but per-layer widths free.
void require_block_compatible(std::span<const ModelWeights> models) {
    require_same_classes(models);
    for (size_t j = 1; j < models.size(); ++j) {
        if (models[j].layers.size() != models[0].layers.size()) {
            throw ContractError("model " + std::to_string(j) + " depth " +
                                std::to_string(models[j].hidden_depth()) + " differs from model 0");
        }
        if (models[j].input_width() != models[0].input_width()) {
            throw ContractError("model " + std::to_string(j) + " input width differs");
        }
        if (models[j].activation != models[0].activation) {
            throw ContractError("model " + std::to_string(j) + " activation differs");
        }
    }
}

std::vector<double> apply_head(const Matrix& head, std::span<const double> hidden) {
    std::vector<double> out(head.rows);
    for (size_t o = 0; o < head.rows; ++o) {
        out[o] = dot_affine(head.row(o), hidden.data(), hidden.size());
    }
    return out;
}

} // namespace

std::vector<double> GlobalBlockModel::hidden_forward(std::span<const double> x) const {
    if (x.size() != input_width) {
        throw ContractError("global block model expects input width " +
                            std::to_string(input_width));
    }
    std::vector<double> cur(x.begin(), x.end());
    std::vector<double> next;
    const Matrix* layer = &first_layer;
    for (size_t l = 0;; ++l) {
        next.assign(layer->rows, 0.0);
        for (size_t o = 0; o < layer->rows; ++o) {
            const double s = dot_affine(layer->row(o), cur.data(), cur.size());
            next[o] = (s > 0.0) ? s : (activation == Activation::relu ? 0.0 : kLeakySlope * s);
        }
        cur.swap(next);
        if (l == middle_layers.size()) break;
        layer = &middle_layers[l];
    }
    return cur;
}

GlobalBlockModel build_global_block(std::span<const ModelWeights> models) {
    if (models.size() < 2) throw ContractError("block composition needs at least 2 models");
    for (const ModelWeights& m : models) m.validate();
    require_block_compatible(models);

    const size_t levels = models[0].layers.size();  // hidden levels + head
    GlobalBlockModel g;
    g.activation = models[0].activation;
    g.input_width = models[0].input_width();
    g.class_count = models[0].class_count();

    // stacked first layer: every client reads the same (x, 1)
    size_t total0 = 0;
    for (const ModelWeights& m : models) total0 += m.layers[0].rows;
    g.first_layer = Matrix(total0, g.input_width + 1);
    g.block_widths.resize(levels - 1);
    size_t row0 = 0;
    for (const ModelWeights& m : models) {
        const Matrix& w = m.layers[0];
        std::memcpy(g.first_layer.row(row0), w.a.data(), w.a.size() * sizeof(double));
        row0 += w.rows;
        g.block_widths[0].push_back(w.rows);
    }

    // block-diagonal middle layers; each block's bias lands in the shared
    // trailing column so the global constant input feeds every block
    for (size_t l = 1; l + 1 < levels; ++l) {
        size_t rows = 0, cols = 0;
        for (const ModelWeights& m : models) {
            rows += m.layers[l].rows;
            cols += m.layers[l].cols - 1;
        }
        Matrix blk(rows, cols + 1);
        size_t roff = 0, coff = 0;
        for (const ModelWeights& m : models) {
            const Matrix& w = m.layers[l];
            for (size_t r = 0; r < w.rows; ++r) {
                double* dst = blk.row(roff + r);
                std::memcpy(dst + coff, w.row(r), (w.cols - 1) * sizeof(double));
                dst[cols] = w.at(r, w.cols - 1);
            }
            roff += w.rows;
            coff += w.cols - 1;
            g.block_widths[l].push_back(w.rows);
        }
        g.middle_layers.push_back(std::move(blk));
    }

    for (const ModelWeights& m : models) g.head_blocks.push_back(m.layers.back());
    return g;
}

DisturbingMatrix disturbing_matrix(std::span<const ModelWeights> models,
                                   std::span<const double> x) {
    require_same_classes(models);
    DisturbingMatrix m;
    m.values = Matrix(models[0].class_count(), models.size());
    for (size_t j = 0; j < models.size(); ++j) {
        const std::vector<double> logits = forward_logits(models[j], x);
        for (size_t c = 0; c < logits.size(); ++c) m.values.at(c, j) = logits[c];
    }
    return m;
}

DisturbingMatrix disturbing_matrix(const GlobalBlockModel& global, std::span<const double> x) {
    const std::vector<double> hidden = global.hidden_forward(x);
    const std::vector<size_t>& widths = global.block_widths.back();

    DisturbingMatrix m;
    m.values = Matrix(global.class_count, global.clients());
    size_t off = 0;
    for (size_t j = 0; j < global.clients(); ++j) {
        const std::vector<double> logits =
            apply_head(global.head_blocks[j], std::span(hidden.data() + off, widths[j]));
        for (size_t c = 0; c < logits.size(); ++c) m.values.at(c, j) = logits[c];
        off += widths[j];
    }
    return m;
}

size_t ams_select(const DisturbingMatrix& m) {
    if (m.values.empty()) throw ContractError("ams_select on empty matrix");
    size_t best = 0;
    double best_val = -HUGE_VAL;
    for (size_t j = 0; j < m.clients(); ++j) {
        double col_max = -HUGE_VAL;
        for (size_t c = 0; c < m.classes(); ++c) col_max = std::max(col_max, m.values.at(c, j));
        if (col_max > best_val) {
            best_val = col_max;
            best = j;
        }
    }
    return best;
}

std::vector<size_t> ams_topk_indices(const DisturbingMatrix& m, size_t k) {
    if (k < 1 || k > m.clients()) {
        throw ContractError("k must lie in [1, " + std::to_string(m.clients()) + "], got " +
                            std::to_string(k));
    }
    std::vector<std::pair<double, size_t>> ranked(m.clients());
    for (size_t j = 0; j < m.clients(); ++j) {
        double col_max = -HUGE_VAL;
        for (size_t c = 0; c < m.classes(); ++c) col_max = std::max(col_max, m.values.at(c, j));
        ranked[j] = {col_max, j};
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<size_t> picked(k);
    for (size_t t = 0; t < k; ++t) picked[t] = ranked[t].second;
    std::sort(picked.begin(), picked.end());
    return picked;
}

std::vector<double> ams_top1_from(const DisturbingMatrix& m) {
    const size_t j = ams_select(m);
    std::vector<double> logits(m.classes());
    for (size_t c = 0; c < m.classes(); ++c) logits[c] = m.values.at(c, j);
    return softmax(logits);
}

std::vector<double> ams_topk_from(const DisturbingMatrix& m, size_t k) {
    const std::vector<size_t> picked = ams_topk_indices(m, k);
    std::vector<double> sum(m.classes(), 0.0);
    for (size_t j : picked) {
        for (size_t c = 0; c < m.classes(); ++c) sum[c] += m.values.at(c, j);
    }
    return softmax(sum);
}

std::vector<double> ensemble_from(const DisturbingMatrix& m) {
    std::vector<double> avg(m.classes(), 0.0);
    std::vector<double> col(m.classes());
    for (size_t j = 0; j < m.clients(); ++j) {
        for (size_t c = 0; c < m.classes(); ++c) col[c] = m.values.at(c, j);
        const std::vector<double> p = softmax(col);
        for (size_t c = 0; c < m.classes(); ++c) avg[c] += p[c];
    }
    for (double& v : avg) v /= double(m.clients());
    return avg;
}

std::vector<double> predict_ams_top1(std::span<const ModelWeights> models,
                                     std::span<const double> x) {
    require_block_compatible(models);
    return ams_top1_from(disturbing_matrix(models, x));
}

std::vector<double> predict_ams_topk(std::span<const ModelWeights> models,
                                     std::span<const double> x, size_t k) {
    require_same_classes(models);
    return ams_topk_from(disturbing_matrix(models, x), k);
}

std::vector<double> predict_ams_full(std::span<const ModelWeights> models,
                                     std::span<const double> x) {
    return predict_ams_topk(models, x, models.size());
}

std::vector<double> predict_ams_cross(std::span<const ModelWeights> models,
                                      std::span<const double> x) {
    require_same_classes(models);
    return ams_top1_from(disturbing_matrix(models, x));
}

std::vector<double> predict_ensemble(std::span<const ModelWeights> models,
                                     std::span<const double> x) {
    require_same_classes(models);
    return ensemble_from(disturbing_matrix(models, x));
}

ModelWeights fuse_fedavg(std::span<const ModelWeights> models,
                         std::span<const int64_t> sample_counts) {
    require_nonempty(models);
    for (const ModelWeights& m : models) m.validate();
    require_same_shape_chain(models);
    if (!sample_counts.empty() && sample_counts.size() != models.size()) {
        throw ContractError("fedavg: one sample count per model required");
    }

    std::vector<double> lambda(models.size(), 1.0 / double(models.size()));
    if (!sample_counts.empty()) {
        double total = 0.0;
        for (int64_t c : sample_counts) {
            if (c <= 0) throw ContractError("fedavg: sample counts must be positive");
            total += double(c);
        }
        for (size_t j = 0; j < models.size(); ++j) lambda[j] = double(sample_counts[j]) / total;
    }

    // accumulate deviations from model 0: identical inputs average to model 0
    // without rounding
    ModelWeights out = models[0];
    for (size_t l = 0; l < out.layers.size(); ++l) {
        double* w = out.layers[l].a.data();
        const double* base = models[0].layers[l].a.data();
        const size_t len = out.layers[l].a.size();
        for (size_t j = 1; j < models.size(); ++j) {
            const double* other = models[j].layers[l].a.data();
            const double lj = lambda[j];
            for (size_t i = 0; i < len; ++i) w[i] += lj * (other[i] - base[i]);
        }
    }
    return out;
}

ModelWeights fuse_concat_toy(const ModelWeights& a, const ModelWeights& b) {
    a.validate();
    b.validate();
    if (a.hidden_depth() != 1 || b.hidden_depth() != 1) {
        throw ContractError("concat toy fusion expects single-hidden-layer models");
    }
    const ModelWeights pair[2] = {a, b};
    return fuse_concat(std::span(pair, 2));
}

ModelWeights fuse_concat(std::span<const ModelWeights> models) {
    if (models.size() < 2) throw ContractError("concat fusion needs at least 2 models");
    for (const ModelWeights& m : models) m.validate();
    require_block_compatible(models);

    GlobalBlockModel g = build_global_block(models);
    ModelWeights out;
    out.activation = g.activation;
    out.layers.push_back(std::move(g.first_layer));
    for (Matrix& m : g.middle_layers) out.layers.push_back(std::move(m));

    // summed output layer: per-client blocks side by side, bias column added up
    const std::vector<size_t>& widths = g.block_widths.back();
    const size_t hidden_total = std::accumulate(widths.begin(), widths.end(), size_t(0));
    Matrix head(g.class_count, hidden_total + 1);
    size_t coff = 0;
    for (size_t j = 0; j < models.size(); ++j) {
        const Matrix& w = g.head_blocks[j];
        for (size_t r = 0; r < w.rows; ++r) {
            double* dst = head.row(r);
            std::memcpy(dst + coff, w.row(r), (w.cols - 1) * sizeof(double));
            dst[hidden_total] += w.at(r, w.cols - 1);
        }
        coff += w.cols - 1;
    }
    out.layers.push_back(std::move(head));
    out.validate();
    return out;
}

double max_logit(const ModelWeights& model, std::span<const double> x) {
    const std::vector<double> logits = forward_logits(model, x);
    return logits[argmax(logits)];
}

double absolute_confidence(const ModelWeights& model, std::span<const double> x) {
    return std::exp(max_logit(model, x));
}

double log10_confidence(const ModelWeights& model, std::span<const double> x) {
    return max_logit(model, x) / std::log(10.0);
}

void export_disturbing_csv(std::span<const ModelWeights> models, const Dataset& ds,
                           const std::string& path) {
    require_same_classes(models);
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "sample_id,c,j,logit\n";
    char buf[32];
    for (size_t i = 0; i < ds.size(); ++i) {
        const DisturbingMatrix m =
            disturbing_matrix(models, std::span(ds.features.row(i), ds.feature_width()));
        for (size_t c = 0; c < m.classes(); ++c) {
            for (size_t j = 0; j < m.clients(); ++j) {
                std::snprintf(buf, sizeof buf, "%.17g", m.values.at(c, j));
                out << i << "," << c << "," << j << "," << buf << "\n";
            }
        }
    }
    if (!out) throw IoError("short write to " + path);
}

} // namespace fuselab
