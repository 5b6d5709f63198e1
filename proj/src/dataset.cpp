#include "fuselab/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "fuselab/error.hpp"
#include "fuselab/rng.hpp"

namespace fuselab {

void Dataset::validate() const {
    if (size() == 0) throw ContractError("dataset is empty");
    if (labels.size() != size()) throw ContractError("dataset label count does not match row count");
    if (class_count <= 0) throw ContractError("dataset class_count must be positive");
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= class_count) {
            throw ContractError("dataset label out of range at row " + std::to_string(i));
        }
    }
    if (!features.all_finite()) throw ContractError("dataset features contain non-finite values");
}

bool diamond_contains(double x1, double x2) {
    if (x1 < -2.0 || x1 > 2.0) return false;
    return std::abs(x2 - std::abs(x1)) <= 1.0;
}

int diamond_label(double x1, double x2) {
    return x2 > std::abs(x1) ? 1 : 0;
}

namespace {

Dataset sample_diamond(Rng& rng, DiamondSide side, size_t n, Role role) {
    const double x1_lo = (side == DiamondSide::left) ? -2.0 : -0.5;
    const double x1_hi = (side == DiamondSide::left) ? 0.5 : 2.0;

    Dataset ds;
    ds.features = Matrix(n, 2);
    ds.labels.resize(n);
    ds.class_count = 2;
    ds.role = role;

    for (size_t i = 0; i < n; ++i) {
        double x1, x2;
        // rejection from the bounding box of the band
        do {
            x1 = rng.uniform(x1_lo, x1_hi);
            x2 = rng.uniform(-1.0, 3.0);
        } while (!diamond_contains(x1, x2));
        ds.features.at(i, 0) = x1;
        ds.features.at(i, 1) = x2;
        ds.labels[i] = diamond_label(x1, x2);
    }
    return ds;
}

} // namespace

std::pair<Dataset, Dataset> gen_diamond2d(DiamondSide side, size_t n_train, size_t n_test,
                                          uint64_t seed) {
    if (n_train == 0 || n_test == 0) throw ContractError("diamond2d sample counts must be positive");
    Rng rng(seed);
    Dataset train = sample_diamond(rng, side, n_train, Role::train);
    Dataset test = sample_diamond(rng, side, n_test, Role::test);
    return {std::move(train), std::move(test)};
}

namespace {

uint32_t read_u32_be(std::istream& in, const std::string& path, const char* what) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) {
        throw FormatError(path + ": truncated while reading " + what);
    }
    return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

} // namespace

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path, Role role) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw IoError("cannot open image file " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw IoError("cannot open label file " + labels_path);

    const uint32_t img_magic = read_u32_be(img, images_path, "magic");
    if (img_magic != 2051) {
        throw FormatError(images_path + ": bad image magic " + std::to_string(img_magic) +
                          " (expected 2051)");
    }
    const uint32_t lab_magic = read_u32_be(lab, labels_path, "magic");
    if (lab_magic != 2049) {
        throw FormatError(labels_path + ": bad label magic " + std::to_string(lab_magic) +
                          " (expected 2049)");
    }

    const uint32_t n_images = read_u32_be(img, images_path, "image count");
    const uint32_t rows = read_u32_be(img, images_path, "row count");
    const uint32_t cols = read_u32_be(img, images_path, "column count");
    const uint32_t n_labels = read_u32_be(lab, labels_path, "label count");

    if (n_images != n_labels) {
        throw FormatError("image/label count mismatch: " + std::to_string(n_images) + " images vs " +
                          std::to_string(n_labels) + " labels");
    }
    if (n_images == 0 || rows == 0 || cols == 0) {
        throw FormatError(images_path + ": empty image set");
    }

    const size_t width = size_t(rows) * cols;
    Dataset ds;
    ds.features = Matrix(n_images, width);
    ds.labels.resize(n_images);
    ds.class_count = 10;
    ds.role = role;

    std::vector<unsigned char> pix(width);
    for (uint32_t i = 0; i < n_images; ++i) {
        if (!img.read(reinterpret_cast<char*>(pix.data()), std::streamsize(width))) {
            throw FormatError(images_path + ": truncated pixel data at image " + std::to_string(i));
        }
        double* out = ds.features.row(i);
        for (size_t p = 0; p < width; ++p) out[p] = pix[p] / 255.0;
    }
    // exactly one trailing byte stream per file; extra payload means a corrupt header
    if (img.get() != std::ifstream::traits_type::eof()) {
        throw FormatError(images_path + ": trailing bytes after pixel data");
    }

    std::vector<unsigned char> raw(n_labels);
    if (!lab.read(reinterpret_cast<char*>(raw.data()), std::streamsize(n_labels))) {
        throw FormatError(labels_path + ": truncated label data");
    }
    for (uint32_t i = 0; i < n_labels; ++i) {
        if (raw[i] > 9) {
            throw FormatError(labels_path + ": label value " + std::to_string(int(raw[i])) +
                              " out of range at row " + std::to_string(i));
        }
        ds.labels[i] = raw[i];
    }
    return ds;
}

Dataset subset(const Dataset& ds, std::span<const int64_t> indices) {
    if (indices.empty()) throw ContractError("subset index list is empty");
    Dataset out;
    out.features = Matrix(indices.size(), ds.feature_width());
    out.labels.resize(indices.size());
    out.class_count = ds.class_count;
    out.role = ds.role;
    for (size_t i = 0; i < indices.size(); ++i) {
        const int64_t src = indices[i];
        if (src < 0 || size_t(src) >= ds.size()) {
            throw ContractError("subset index " + std::to_string(src) + " out of range");
        }
        std::memcpy(out.features.row(i), ds.features.row(src), ds.feature_width() * sizeof(double));
        out.labels[i] = ds.labels[src];
    }
    return out;
}

Dataset merge(const Dataset& a, const Dataset& b) {
    if (a.feature_width() != b.feature_width()) throw ContractError("merge: feature widths differ");
    if (a.class_count != b.class_count) throw ContractError("merge: class counts differ");
    if (a.role != b.role) throw ContractError("merge: roles differ");
    Dataset out;
    out.features = Matrix(a.size() + b.size(), a.feature_width());
    out.labels.reserve(a.size() + b.size());
    out.class_count = a.class_count;
    out.role = a.role;
    std::memcpy(out.features.row(0), a.features.a.data(), a.features.a.size() * sizeof(double));
    std::memcpy(out.features.row(a.size()), b.features.a.data(), b.features.a.size() * sizeof(double));
    out.labels = a.labels;
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    return out;
}

void export_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    for (size_t c = 0; c < ds.feature_width(); ++c) out << "x" << (c + 1) << ",";
    out << "label\n";
    char buf[32];
    for (size_t i = 0; i < ds.size(); ++i) {
        const double* row = ds.features.row(i);
        for (size_t c = 0; c < ds.feature_width(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", row[c]);
            out << buf << ",";
        }
        out << ds.labels[i] << "\n";
    }
    if (!out) throw IoError("short write to " + path);
}

} // namespace fuselab
