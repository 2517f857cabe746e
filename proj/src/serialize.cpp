#include "bignn/serialize.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "bignn/errors.hpp"

namespace bignn {

namespace {

constexpr char kMagic[4] = {'B', 'N', 'N', 'M'};
constexpr uint32_t kVersion = 1;

void put_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void put_i64(std::ostream& os, int64_t v) { put_u64(os, static_cast<uint64_t>(v)); }

void put_f64(std::ostream& os, double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(os, bits);
}

uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw DataError("model file: truncated");
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

int64_t get_i64(std::istream& is) { return static_cast<int64_t>(get_u64(is)); }

double get_f64(std::istream& is) {
    const uint64_t bits = get_u64(is);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

void put_index_points(std::ostream& os, const KnnIndex& index) {
    const int64_t count = index.size();
    const int64_t d = index.dim();
    put_i64(os, count);
    for (int64_t i = 0; i < count; ++i) put_i64(os, index.original_index(static_cast<int>(i)));
    for (int64_t i = 0; i < count; ++i)
        for (int64_t j = 0; j < d; ++j) put_f64(os, index.points()(i, j));
    for (int64_t i = 0; i < count; ++i) put_i64(os, index.labels()[i]);
}

KnnIndex get_index_points(std::istream& is, int64_t d) {
    const int64_t count = get_i64(is);
    if (count < 1) throw DataError("model file: empty subsample");
    std::vector<int> original(static_cast<size_t>(count));
    for (auto& v : original) v = static_cast<int>(get_i64(is));
    PointMatrix pts(count, d);
    for (int64_t i = 0; i < count; ++i)
        for (int64_t j = 0; j < d; ++j) pts(i, j) = get_f64(is);
    Eigen::VectorXi labels(count);
    for (int64_t i = 0; i < count; ++i) labels[i] = static_cast<int>(get_i64(is));
    return KnnIndex::build(pts, labels, std::move(original));
}

}  // namespace

void save_model(const std::string& path, const BigNnModel& model, const DenoisedModel* denoised) {
    if (model.local_indices.empty()) throw std::invalid_argument("save_model: empty model");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("save_model: cannot open " + path);

    os.write(kMagic, 4);
    put_u64(os, kVersion);
    put_u64(os, denoised ? 1 : 0);

    put_f64(os, model.gamma);
    put_f64(os, model.k_o);
    put_i64(os, model.k_local);
    put_i64(os, model.dim());
    put_i64(os, model.s());

    put_f64(os, model.partition.gamma);
    put_i64(os, model.partition.s);
    put_i64(os, model.partition.n);
    put_i64(os, static_cast<int64_t>(model.partition.assignment.size()));
    for (int a : model.partition.assignment) put_i64(os, a);

    for (const auto& index : model.local_indices) put_index_points(os, index);

    if (denoised) {
        put_f64(os, denoised->theta);
        put_i64(os, denoised->m);
        put_i64(os, denoised->I);
        put_i64(os, static_cast<int64_t>(denoised->relabeled_subsamples.size()));
        for (const auto& index : denoised->relabeled_subsamples) put_index_points(os, index);
    }
    if (!os) throw DataError("save_model: write failed for " + path);
}

ModelBundle load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("load_model: cannot open " + path);

    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("load_model: not a model file: " + path);
    const uint64_t version = get_u64(is);
    if (version != kVersion)
        throw DataError("load_model: unsupported version " + std::to_string(version));
    const uint64_t has_denoised = get_u64(is);

    ModelBundle bundle;
    BigNnModel& model = bundle.model;
    model.gamma = get_f64(is);
    model.k_o = get_f64(is);
    model.k_local = static_cast<int>(get_i64(is));
    const int64_t d = get_i64(is);
    const int64_t s = get_i64(is);
    if (d < 1 || s < 1) throw DataError("load_model: corrupt header");

    model.partition.gamma = get_f64(is);
    model.partition.s = static_cast<int>(get_i64(is));
    model.partition.n = static_cast<int>(get_i64(is));
    const int64_t assign = get_i64(is);
    if (assign < 0) throw DataError("load_model: corrupt partition");
    model.partition.assignment.resize(static_cast<size_t>(assign));
    for (auto& a : model.partition.assignment) a = static_cast<int>(get_i64(is));

    model.local_indices.reserve(static_cast<size_t>(s));
    for (int64_t j = 0; j < s; ++j) model.local_indices.push_back(get_index_points(is, d));

    if (has_denoised) {
        DenoisedModel dm;
        dm.theta = get_f64(is);
        dm.m = static_cast<int>(get_i64(is));
        dm.I = static_cast<int>(get_i64(is));
        const int64_t count = get_i64(is);
        if (count < 1) throw DataError("load_model: corrupt denoised block");
        dm.relabeled_subsamples.reserve(static_cast<size_t>(count));
        for (int64_t i = 0; i < count; ++i) dm.relabeled_subsamples.push_back(get_index_points(is, d));
        bundle.denoised = std::move(dm);
    }
    return bundle;
}

}  // namespace bignn
