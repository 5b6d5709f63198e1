#include "fuselab/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "fuselab/error.hpp"

namespace fuselab {

namespace {

constexpr char kMagic[4] = {'F', 'L', 'W', '1'};
constexpr uint8_t kVersion = 1;

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
    out.push_back(v & 0xff);
    out.push_back((v >> 8) & 0xff);
    out.push_back((v >> 16) & 0xff);
    out.push_back((v >> 24) & 0xff);
}

void put_f64(std::vector<unsigned char>& out, double d) {
    uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int i = 0; i < 8; ++i) out.push_back((bits >> (8 * i)) & 0xff);
}

struct Reader {
    const unsigned char* p;
    size_t left;
    std::string path;

    void need(size_t n, const char* what) const {
        if (left < n) throw FormatError(path + ": truncated while reading " + what);
    }
    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = uint32_t(p[0]) | (uint32_t(p[1]) << 8) | (uint32_t(p[2]) << 16) |
                     (uint32_t(p[3]) << 24);
        p += 4;
        left -= 4;
        return v;
    }
    uint8_t u8(const char* what) {
        need(1, what);
        uint8_t v = *p++;
        --left;
        return v;
    }
    double f64(const char* what) {
        need(8, what);
        uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= uint64_t(p[i]) << (8 * i);
        p += 8;
        left -= 8;
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
};

} // namespace

void save_model(const ModelWeights& model, const std::string& path, FusionTag tag) {
    model.validate();
    std::vector<unsigned char> buf;
    buf.insert(buf.end(), kMagic, kMagic + 4);
    buf.push_back(kVersion);
    buf.push_back(model.activation == Activation::relu ? 0 : 1);
    buf.push_back(uint8_t(tag));
    buf.push_back(0);  // reserved
    put_u32(buf, uint32_t(model.layers.size()));
    put_u32(buf, uint32_t(model.input_width()));
    put_u32(buf, uint32_t(model.class_count()));
    for (const Matrix& w : model.layers) {
        put_u32(buf, uint32_t(w.rows));
        put_u32(buf, uint32_t(w.cols));
    }
    for (const Matrix& w : model.layers) {
        for (double v : w.a) put_f64(buf, v);
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(buf.data()), std::streamsize(buf.size()));
    if (!out) throw IoError("short write to " + path);
}

ModelWeights load_model(const std::string& path, FusionTag* tag_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    Reader r{buf.data(), buf.size(), path};

    r.need(4, "magic");
    if (std::memcmp(r.p, kMagic, 4) != 0) throw FormatError(path + ": bad magic (not an FLW1 file)");
    r.p += 4;
    r.left -= 4;
    if (r.u8("version") != kVersion) throw FormatError(path + ": unsupported format version");

    const uint8_t act = r.u8("activation");
    if (act > 1) throw FormatError(path + ": unknown activation tag " + std::to_string(act));
    const uint8_t tag = r.u8("method tag");
    if (tag > uint8_t(FusionTag::concat)) {
        throw FormatError(path + ": unknown method tag " + std::to_string(tag));
    }
    r.u8("reserved byte");

    const uint32_t layer_count = r.u32("layer count");
    const uint32_t input_width = r.u32("input width");
    const uint32_t class_count = r.u32("class count");
    if (layer_count == 0) throw FormatError(path + ": zero layers");

    ModelWeights model;
    model.activation = act == 0 ? Activation::relu : Activation::leaky_relu;
    std::vector<std::pair<uint32_t, uint32_t>> dims(layer_count);
    for (auto& d : dims) {
        d.first = r.u32("layer rows");
        d.second = r.u32("layer cols");
    }
    if (dims.front().second != input_width + 1) {
        throw FormatError(path + ": first layer columns disagree with header input width");
    }
    if (dims.back().first != class_count) {
        throw FormatError(path + ": last layer rows disagree with header class count");
    }
    for (size_t l = 1; l < dims.size(); ++l) {
        if (dims[l].second != dims[l - 1].first + 1) {
            throw FormatError(path + ": layer shape chain broken at layer " + std::to_string(l));
        }
    }

    for (const auto& d : dims) {
        Matrix w(d.first, d.second);
        for (double& v : w.a) v = r.f64("weight entry");
        model.layers.push_back(std::move(w));
    }
    if (r.left != 0) throw FormatError(path + ": trailing bytes after weight payload");

    model.validate();
    if (tag_out) *tag_out = FusionTag(tag);
    return model;
}

} // namespace fuselab
