#include "ukdh/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "ukdh/errors.hpp"

namespace ukdh {

namespace {

constexpr double kNormEps = 1e-12;
constexpr uint32_t kModelVersion = 1;

AffineLayer init_layer(int out, int in, std::mt19937_64& rng) {
    AffineLayer layer;
    layer.w = Matrix(out, in);
    layer.b.assign(out, 0.0);
    double a = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> uni(-a, a);
    for (double& v : layer.w.data) v = uni(rng);
    return layer;
}

void affine_forward(const AffineLayer& layer, const double* x, double* y) {
    int out = layer.w.rows, in = layer.w.cols;
    for (int o = 0; o < out; ++o) {
        double s = layer.b[o];
        const double* wr = layer.w.row(o);
        for (int i = 0; i < in; ++i) s += wr[i] * x[i];
        y[o] = s;
    }
}

bool layer_finite(const AffineLayer& l) {
    if (!l.w.all_finite()) return false;
    for (double v : l.b)
        if (!std::isfinite(v)) return false;
    return true;
}

void write_layer(std::ostream& os, const AffineLayer& l) {
    auto put = [&](double v) {
        float f = float(v);
        uint32_t u;
        std::memcpy(&u, &f, 4);
        unsigned char b[4] = {static_cast<unsigned char>(u & 0xff),
                              static_cast<unsigned char>((u >> 8) & 0xff),
                              static_cast<unsigned char>((u >> 16) & 0xff),
                              static_cast<unsigned char>((u >> 24) & 0xff)};
        os.write(reinterpret_cast<const char*>(b), 4);
    };
    for (double v : l.w.data) put(v);
    for (double v : l.b) put(v);
}

void read_layer(std::istream& is, AffineLayer& l) {
    auto get = [&]() {
        unsigned char b[4];
        is.read(reinterpret_cast<char*>(b), 4);
        if (!is) throw Error(ErrorCode::truncated_payload, "truncated UKDM payload");
        uint32_t u = uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
        float f;
        std::memcpy(&f, &u, 4);
        return double(f);
    };
    for (double& v : l.w.data) v = get();
    for (double& v : l.b) v = get();
}

}  // namespace

bool TwoPathwayModel::all_finite() const {
    return layer_finite(image_pathway.l1) && layer_finite(image_pathway.l2) &&
           layer_finite(text_pathway.l1) && layer_finite(text_pathway.l2);
}

TwoPathwayModel init_model(int d_image, int d_text, int h, int k, uint64_t seed) {
    if (d_image < 1 || d_text < 1 || h < 1 || k < 1)
        throw Error(ErrorCode::invalid_argument, "model dims must be >= 1");
    std::mt19937_64 rng(seed);
    TwoPathwayModel m;
    m.d_image = d_image;
    m.d_text = d_text;
    m.h = h;
    m.k = k;
    m.image_pathway.l1 = init_layer(h, d_image, rng);
    m.image_pathway.l2 = init_layer(k, h, rng);
    m.text_pathway.l1 = init_layer(h, d_text, rng);
    m.text_pathway.l2 = init_layer(k, h, rng);
    return m;
}

bool l2_normalize(std::span<double> v) {
    double norm = l2_norm(v);
    if (!std::isfinite(norm)) throw Error(ErrorCode::non_finite_value, "non-finite vector");
    if (norm <= kNormEps) {
        for (double& x : v) x = 0.0;
        return false;
    }
    for (double& x : v) x /= norm;
    return true;
}

Matrix forward(const TwoPathwayModel& model, const Matrix& features, Modality modality,
               ForwardCache* cache) {
    const Pathway& p = model.pathway(modality);
    if (features.cols != model.input_dim(modality))
        throw Error(ErrorCode::dimension_mismatch, "feature width does not match pathway input");

    int n = features.rows;
    Matrix hidden(n, model.h);
    Matrix prenorm(n, model.k);
    Matrix out(n, model.k);
    std::vector<double> norms(n, 0.0);
    std::vector<uint8_t> degenerate(n, 0);

    for (int i = 0; i < n; ++i) {
        affine_forward(p.l1, features.row(i), hidden.row(i));
        for (int j = 0; j < model.h; ++j) hidden.at(i, j) = std::tanh(hidden.at(i, j));
        affine_forward(p.l2, hidden.row(i), prenorm.row(i));
        double norm = l2_norm(prenorm.row_span(i));
        norms[i] = norm;
        if (norm <= kNormEps) {
            degenerate[i] = 1;
        } else {
            for (int j = 0; j < model.k; ++j) out.at(i, j) = prenorm.at(i, j) / norm;
        }
    }

    if (cache) {
        cache->input = features;
        cache->hidden = std::move(hidden);
        cache->prenorm = std::move(prenorm);
        cache->prenorm_norm = std::move(norms);
        cache->degenerate = std::move(degenerate);
    }
    return out;
}

PathwayGrads zero_grads(const Pathway& p) {
    PathwayGrads g;
    g.dw1 = Matrix(p.l1.w.rows, p.l1.w.cols);
    g.db1.assign(p.l1.b.size(), 0.0);
    g.dw2 = Matrix(p.l2.w.rows, p.l2.w.cols);
    g.db2.assign(p.l2.b.size(), 0.0);
    return g;
}

void accumulate_backward(const TwoPathwayModel& model, Modality modality,
                         const ForwardCache& cache, const Matrix& grad_output,
                         PathwayGrads& grads) {
    const Pathway& p = model.pathway(modality);
    int n = cache.input.rows;
    int h = model.h, k = model.k, d = model.input_dim(modality);

    std::vector<double> dz(k), dh(h);
    for (int i = 0; i < n; ++i) {
        if (cache.degenerate[i]) continue;  // sentinel rows carry no gradient
        double norm = cache.prenorm_norm[i];

        // through the normalization: dz = (g - f (f.g)) / ||z||
        double fg = 0.0;
        for (int j = 0; j < k; ++j) fg += (cache.prenorm.at(i, j) / norm) * grad_output.at(i, j);
        for (int j = 0; j < k; ++j)
            dz[j] = (grad_output.at(i, j) - (cache.prenorm.at(i, j) / norm) * fg) / norm;

        for (int o = 0; o < k; ++o) {
            grads.db2[o] += dz[o];
            double* dwr = grads.dw2.row(o);
            const double* hr = cache.hidden.row(i);
            for (int j = 0; j < h; ++j) dwr[j] += dz[o] * hr[j];
        }
        for (int j = 0; j < h; ++j) {
            double s = 0.0;
            for (int o = 0; o < k; ++o) s += p.l2.w.at(o, j) * dz[o];
            double hv = cache.hidden.at(i, j);
            dh[j] = s * (1.0 - hv * hv);  // tanh'
        }
        for (int o = 0; o < h; ++o) {
            grads.db1[o] += dh[o];
            double* dwr = grads.dw1.row(o);
            const double* xr = cache.input.row(i);
            for (int j = 0; j < d; ++j) dwr[j] += dh[o] * xr[j];
        }
    }
}

void sgd_step(Pathway& pathway, const PathwayGrads& grads, double lr, double weight_decay) {
    auto step = [&](AffineLayer& l, const Matrix& dw, const std::vector<double>& db) {
        if (l.w.rows != dw.rows || l.w.cols != dw.cols || l.b.size() != db.size())
            throw Error(ErrorCode::dimension_mismatch, "gradient shape mismatch");
        for (size_t i = 0; i < l.w.data.size(); ++i) {
            l.w.data[i] -= lr * (dw.data[i] + weight_decay * l.w.data[i]);
            if (!std::isfinite(l.w.data[i]))
                throw Error(ErrorCode::divergence, "non-finite weight after sgd step");
        }
        for (size_t i = 0; i < l.b.size(); ++i) {
            l.b[i] -= lr * (db[i] + weight_decay * l.b[i]);
            if (!std::isfinite(l.b[i]))
                throw Error(ErrorCode::divergence, "non-finite bias after sgd step");
        }
    };
    step(pathway.l1, grads.dw1, grads.db1);
    step(pathway.l2, grads.dw2, grads.db2);
}

void save_model(const TwoPathwayModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::io_failure, "cannot write " + path);
    auto put32 = [&](uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
        os.write(reinterpret_cast<const char*>(b), 4);
    };
    os.write("UKDM", 4);
    put32(kModelVersion);
    put32(uint32_t(model.d_image));
    put32(uint32_t(model.d_text));
    put32(uint32_t(model.h));
    put32(uint32_t(model.k));
    write_layer(os, model.image_pathway.l1);
    write_layer(os, model.image_pathway.l2);
    write_layer(os, model.text_pathway.l1);
    write_layer(os, model.text_pathway.l2);
    if (!os) throw Error(ErrorCode::io_failure, "write failed for " + path);
}

TwoPathwayModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCode::io_failure, "cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "UKDM", 4) != 0)
        throw Error(ErrorCode::bad_magic, "not a UKDM file");
    auto get32 = [&]() {
        unsigned char b[4];
        is.read(reinterpret_cast<char*>(b), 4);
        if (!is) throw Error(ErrorCode::truncated_payload, "truncated UKDM header");
        return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
    };
    if (get32() != kModelVersion) throw Error(ErrorCode::bad_version, "unsupported UKDM version");
    int d_image = int(get32()), d_text = int(get32()), h = int(get32()), k = int(get32());
    TwoPathwayModel m = init_model(d_image, d_text, h, k, 0);
    read_layer(is, m.image_pathway.l1);
    read_layer(is, m.image_pathway.l2);
    read_layer(is, m.text_pathway.l1);
    read_layer(is, m.text_pathway.l2);
    return m;
}

}  // namespace ukdh
