#include "ukdh/dataset.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

#include "ukdh/errors.hpp"

namespace ukdh {

namespace {

constexpr uint32_t kFeatureVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw Error(ErrorCode::truncated_payload, "unexpected end of file in header");
    return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

void write_f32(std::ostream& os, float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    write_u32(os, u);
}

float read_f32(std::istream& is) {
    uint32_t u = read_u32(is);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

void read_matrix_f32(std::istream& is, Matrix& m, const char* what) {
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) {
            unsigned char b[4];
            is.read(reinterpret_cast<char*>(b), 4);
            if (!is) throw Error(ErrorCode::truncated_payload, std::string("truncated ") + what + " payload");
            uint32_t u = uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
            float v;
            std::memcpy(&v, &u, 4);
            if (!std::isfinite(v))
                throw Error(ErrorCode::non_finite_value, std::string("non-finite value in ") + what);
            m.at(i, j) = v;
        }
    }
}

void check_magic(std::istream& is, const char expect[4], const char* what) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, expect, 4) != 0)
        throw Error(ErrorCode::bad_magic, std::string("not a ") + what + " file");
}

}  // namespace

PairedDataset load_features(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCode::io_failure, "cannot open " + path);
    check_magic(is, "UKDF", "UKDF");
    uint32_t version = read_u32(is);
    if (version != kFeatureVersion)
        throw Error(ErrorCode::bad_version, "unsupported UKDF version");
    uint32_t n = read_u32(is);
    uint32_t d_img = read_u32(is);
    uint32_t d_txt = read_u32(is);
    if (n < 1 || d_img < 1 || d_txt < 1)
        throw Error(ErrorCode::dimension_mismatch, "invalid UKDF dimensions");

    PairedDataset ds;
    ds.image_features = Matrix(int(n), int(d_img));
    ds.text_features = Matrix(int(n), int(d_txt));
    read_matrix_f32(is, ds.image_features, "image");
    read_matrix_f32(is, ds.text_features, "text");
    return ds;
}

void save_features(const PairedDataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::io_failure, "cannot write " + path);
    os.write("UKDF", 4);
    write_u32(os, kFeatureVersion);
    write_u32(os, uint32_t(ds.n()));
    write_u32(os, uint32_t(ds.d_image()));
    write_u32(os, uint32_t(ds.d_text()));
    for (double v : ds.image_features.data) write_f32(os, float(v));
    for (double v : ds.text_features.data) write_f32(os, float(v));
    if (!os) throw Error(ErrorCode::io_failure, "write failed for " + path);
}

LabelSet load_labels(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCode::io_failure, "cannot open " + path);
    check_magic(is, "UKDL", "UKDL");
    uint32_t n = read_u32(is);
    uint32_t c = read_u32(is);
    size_t row_bytes = (c + 7) / 8;
    LabelSet ls;
    ls.n_classes = int(c);
    ls.bits.resize(n, std::vector<uint8_t>(row_bytes, 0));
    for (uint32_t i = 0; i < n; ++i) {
        is.read(reinterpret_cast<char*>(ls.bits[i].data()), std::streamsize(row_bytes));
        if (!is) throw Error(ErrorCode::truncated_payload, "truncated UKDL payload");
    }
    return ls;
}

void save_labels(const LabelSet& labels, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::io_failure, "cannot write " + path);
    os.write("UKDL", 4);
    write_u32(os, uint32_t(labels.n()));
    write_u32(os, uint32_t(labels.n_classes));
    for (const auto& row : labels.bits)
        os.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
    if (!os) throw Error(ErrorCode::io_failure, "write failed for " + path);
}

SyntheticResult generate_synthetic(int n_pairs, int n_classes, int d_image, int d_text,
                                   double noise, uint64_t seed) {
    if (n_pairs < 1) throw Error(ErrorCode::invalid_argument, "n_pairs must be >= 1");
    if (n_classes < 2) throw Error(ErrorCode::invalid_argument, "n_classes must be >= 2");
    if (d_image < 2 || d_text < 2) throw Error(ErrorCode::invalid_argument, "dims must be >= 2");
    if (noise < 0) throw Error(ErrorCode::invalid_argument, "noise must be >= 0");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    auto make_prototypes = [&](int dim) {
        Matrix protos(n_classes, dim);
        for (int c = 0; c < n_classes; ++c) {
            double norm = 0.0;
            for (int j = 0; j < dim; ++j) {
                double v = gauss(rng);
                protos.at(c, j) = v;
                norm += v * v;
            }
            norm = std::sqrt(norm);
            for (int j = 0; j < dim; ++j) protos.at(c, j) /= norm;
        }
        return protos;
    };
    Matrix img_protos = make_prototypes(d_image);
    Matrix txt_protos = make_prototypes(d_text);

    SyntheticResult out;
    out.dataset.image_features = Matrix(n_pairs, d_image);
    out.dataset.text_features = Matrix(n_pairs, d_text);
    out.labels.n_classes = n_classes;
    out.labels.bits.resize(n_pairs, std::vector<uint8_t>((n_classes + 7) / 8, 0));

    std::uniform_int_distribution<int> pick_class(0, n_classes - 1);
    std::uniform_int_distribution<int> pick_count(1, 2);

    for (int i = 0; i < n_pairs; ++i) {
        int owned = pick_count(rng);
        int c1 = pick_class(rng);
        int c2 = c1;
        if (owned == 2) {
            do {
                c2 = pick_class(rng);
            } while (c2 == c1);
        }
        out.labels.set_label(i, c1);
        if (owned == 2) out.labels.set_label(i, c2);

        auto fill = [&](Matrix& feat, const Matrix& protos, int dim, double sigma) {
            for (int j = 0; j < dim; ++j) {
                double v = protos.at(c1, j);
                if (owned == 2) v = 0.5 * (v + protos.at(c2, j));
                feat.at(i, j) = v + sigma * gauss(rng);
            }
        };
        // text tags are the weaker modality in tagged-image corpora; extra
        // noise keeps the image/text quality asymmetry of real benchmarks
        fill(out.dataset.image_features, img_protos, d_image, noise);
        fill(out.dataset.text_features, txt_protos, d_text, 1.5 * noise);
    }
    return out;
}

bool oracle_relevant(const LabelSet& labels, int i, int j) {
    if (i < 0 || j < 0 || i >= labels.n() || j >= labels.n())
        throw Error(ErrorCode::invalid_argument, "label index out of range");
    const auto& a = labels.bits[i];
    const auto& b = labels.bits[j];
    for (size_t k = 0; k < a.size(); ++k)
        if (a[k] & b[k]) return true;
    return false;
}

SplitSpec make_split(int n, int n_query, uint64_t seed) {
    if (n_query < 0 || n_query > n)
        throw Error(ErrorCode::invalid_argument, "query count out of range");
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    SplitSpec split;
    split.seed = seed;
    split.query_indices.assign(perm.begin(), perm.begin() + n_query);
    split.retrieval_indices.assign(perm.begin() + n_query, perm.end());
    std::sort(split.query_indices.begin(), split.query_indices.end());
    std::sort(split.retrieval_indices.begin(), split.retrieval_indices.end());
    return split;
}

PairedDataset subset_dataset(const PairedDataset& ds, const std::vector<int>& indices) {
    PairedDataset out;
    out.image_features = Matrix(int(indices.size()), ds.d_image());
    out.text_features = Matrix(int(indices.size()), ds.d_text());
    for (size_t r = 0; r < indices.size(); ++r) {
        int i = indices[r];
        if (i < 0 || i >= ds.n())
            throw Error(ErrorCode::invalid_argument, "subset index out of range");
        std::copy(ds.image_features.row(i), ds.image_features.row(i) + ds.d_image(),
                  out.image_features.row(int(r)));
        std::copy(ds.text_features.row(i), ds.text_features.row(i) + ds.d_text(),
                  out.text_features.row(int(r)));
    }
    return out;
}

LabelSet subset_labels(const LabelSet& labels, const std::vector<int>& indices) {
    LabelSet out;
    out.n_classes = labels.n_classes;
    out.bits.reserve(indices.size());
    for (int i : indices) {
        if (i < 0 || i >= labels.n())
            throw Error(ErrorCode::invalid_argument, "subset index out of range");
        out.bits.push_back(labels.bits[i]);
    }
    return out;
}

}  // namespace ukdh
