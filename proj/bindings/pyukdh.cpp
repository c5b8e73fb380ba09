// Python bindings for the distillation pipeline: numpy in, numpy out.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "ukdh/dataset.hpp"
#include "ukdh/distill.hpp"
#include "ukdh/errors.hpp"
#include "ukdh/retrieval.hpp"
#include "ukdh/student.hpp"
#include "ukdh/teacher.hpp"

namespace py = pybind11;
using namespace ukdh;

namespace {

Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw Error(ErrorCode::invalid_argument, "expected a 2-D array");
    Matrix m(int(a.shape(0)), int(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.data.begin());
    return m;
}

py::array_t<double> from_matrix(const Matrix& m) {
    py::array_t<double> out({m.rows, m.cols});
    std::copy(m.data.begin(), m.data.end(), out.mutable_data());
    return out;
}

LabelSet to_labels(const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw Error(ErrorCode::invalid_argument, "labels must be an N x C array");
    LabelSet l;
    l.n_classes = int(a.shape(1));
    l.bits.resize(size_t(a.shape(0)), std::vector<uint8_t>((l.n_classes + 7) / 8, 0));
    for (py::ssize_t i = 0; i < a.shape(0); ++i)
        for (py::ssize_t c = 0; c < a.shape(1); ++c)
            if (a.at(i, c)) l.set_label(int(i), int(c));
    return l;
}

py::array_t<uint8_t> from_labels(const LabelSet& l) {
    py::array_t<uint8_t> out({l.n(), l.n_classes});
    for (int i = 0; i < l.n(); ++i)
        for (int c = 0; c < l.n_classes; ++c)
            out.mutable_at(i, c) = l.has_label(i, c) ? 1 : 0;
    return out;
}

RelevantPairSet to_pairs(const py::array_t<int, py::array::c_style | py::array::forcecast>& ij,
                         const py::array_t<double, py::array::c_style | py::array::forcecast>& s) {
    if (ij.ndim() != 2 || ij.shape(1) != 2)
        throw Error(ErrorCode::invalid_argument, "pairs must be an N x 2 array");
    if (s.ndim() != 1 || s.shape(0) != ij.shape(0))
        throw Error(ErrorCode::invalid_argument, "scores must match the pair count");
    RelevantPairSet out;
    for (py::ssize_t r = 0; r < ij.shape(0); ++r)
        out.pairs.push_back({ij.at(r, 0), ij.at(r, 1), s.at(r)});
    return out;
}

TrainConfig make_config(int epochs, double lr, double wd, int batch, double margin,
                        uint64_t seed) {
    TrainConfig c;
    c.epochs = epochs;
    c.learning_rate = lr;
    c.weight_decay = wd;
    c.batch_size = batch;
    c.margin = margin;
    c.seed = seed;
    return c;
}

Modality parse_modality(const std::string& s) {
    if (s == "image") return Modality::image;
    if (s == "text") return Modality::text;
    throw Error(ErrorCode::invalid_argument, "modality must be 'image' or 'text'");
}

}  // namespace

PYBIND11_MODULE(pyukdh, m) {
    m.doc() = "unsupervised knowledge distillation for cross-modal hashing";

    py::register_exception<Error>(m, "UkdhError");

    py::class_<TwoPathwayModel>(m, "Model")
        .def_readonly("d_image", &TwoPathwayModel::d_image)
        .def_readonly("d_text", &TwoPathwayModel::d_text)
        .def_readonly("hidden", &TwoPathwayModel::h)
        .def_readonly("bits", &TwoPathwayModel::k)
        .def("save", [](const TwoPathwayModel& mod, const std::string& p) { save_model(mod, p); })
        .def_static("load", [](const std::string& p) { return load_model(p); });

    m.def(
        "generate_synthetic",
        [](int n_pairs, int n_classes, int d_image, int d_text, double noise, uint64_t seed) {
            SyntheticResult r = generate_synthetic(n_pairs, n_classes, d_image, d_text, noise,
                                                   seed);
            return py::make_tuple(from_matrix(r.dataset.image_features),
                                  from_matrix(r.dataset.text_features), from_labels(r.labels));
        },
        py::arg("n_pairs"), py::arg("n_classes"), py::arg("d_image"), py::arg("d_text"),
        py::arg("noise"), py::arg("seed"),
        "Paired synthetic features; returns (image_features, text_features, labels).");

    m.def(
        "train_teacher",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> img,
           py::array_t<double, py::array::c_style | py::array::forcecast> txt, int bits,
           int hidden, int epochs, double lr, double wd, int batch, double margin, uint64_t seed,
           const std::string& strategy) {
            PairedDataset ds{to_matrix(img), to_matrix(txt)};
            NegativeStrategy ns =
                strategy == "uniform" ? NegativeStrategy::uniform : NegativeStrategy::hard;
            return train_teacher(ds, make_config(epochs, lr, wd, batch, margin, seed), hidden,
                                 bits, ns);
        },
        py::arg("image_features"), py::arg("text_features"), py::arg("bits") = 32,
        py::arg("hidden") = 128, py::arg("epochs") = 30, py::arg("lr") = 0.1,
        py::arg("wd") = 0.01, py::arg("batch") = 64, py::arg("margin") = 0.5, py::arg("seed") = 0,
        py::arg("strategy") = "hard");

    m.def(
        "build_relevant_pairs",
        [](const TwoPathwayModel& teacher,
           py::array_t<double, py::array::c_style | py::array::forcecast> img,
           py::array_t<double, py::array::c_style | py::array::forcecast> txt, int k_img,
           int k_txt, std::optional<int> per_instance_k, std::optional<int> total_budget) {
            PairedDataset ds{to_matrix(img), to_matrix(txt)};
            DistillParams p;
            p.k_img = k_img;
            p.k_txt = k_txt;
            p.per_instance_k = per_instance_k;
            p.total_budget = total_budget;
            if (!p.per_instance_k && !p.total_budget) p.per_instance_k = k_img + k_txt;
            RelevantPairSet pairs = build_relevant_pairs(teacher, ds, p);
            py::array_t<int> ij({int(pairs.pairs.size()), 2});
            py::array_t<double> score(py::ssize_t(pairs.pairs.size()));
            for (size_t r = 0; r < pairs.pairs.size(); ++r) {
                ij.mutable_at(py::ssize_t(r), 0) = pairs.pairs[r].i;
                ij.mutable_at(py::ssize_t(r), 1) = pairs.pairs[r].j;
                score.mutable_at(py::ssize_t(r)) = pairs.pairs[r].score;
            }
            return py::make_tuple(ij, score);
        },
        py::arg("teacher"), py::arg("image_features"), py::arg("text_features"),
        py::arg("k_img") = 10, py::arg("k_txt") = 10, py::arg("per_instance_k") = py::none(),
        py::arg("total_budget") = py::none(),
        "Distilled similarity pairs; returns (pairs N x 2, scores N).");

    m.def(
        "train_student",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> img,
           py::array_t<double, py::array::c_style | py::array::forcecast> txt,
           py::array_t<int, py::array::c_style | py::array::forcecast> pair_ij,
           py::array_t<double, py::array::c_style | py::array::forcecast> pair_score,
           const std::string& kind, int bits, int hidden, int epochs, double lr, double wd,
           int batch, double margin, uint64_t seed) {
            PairedDataset ds{to_matrix(img), to_matrix(txt)};
            RelevantPairSet pairs = to_pairs(pair_ij, pair_score);
            TrainConfig cfg = make_config(epochs, lr, wd, batch, margin, seed);
            if (kind == "ss") return train_student_supervised(ds, pairs, cfg, hidden, bits);
            if (kind == "us")
                return train_student_unsupervised(ds, pairs, cfg, hidden, bits,
                                                  NegativeStrategy::hard);
            throw Error(ErrorCode::invalid_argument, "kind must be 'us' or 'ss'");
        },
        py::arg("image_features"), py::arg("text_features"), py::arg("pairs"), py::arg("scores"),
        py::arg("kind") = "us", py::arg("bits") = 16, py::arg("hidden") = 64,
        py::arg("epochs") = 80, py::arg("lr") = 0.1, py::arg("wd") = 0.01, py::arg("batch") = 64,
        py::arg("margin") = 0.5, py::arg("seed") = 0);

    m.def(
        "embed",
        [](const TwoPathwayModel& model,
           py::array_t<double, py::array::c_style | py::array::forcecast> feats,
           const std::string& modality) {
            return from_matrix(forward(model, to_matrix(feats), parse_modality(modality)));
        },
        py::arg("model"), py::arg("features"), py::arg("modality"),
        "Unit-norm embeddings of raw features.");

    m.def(
        "hash_codes",
        [](const TwoPathwayModel& model,
           py::array_t<double, py::array::c_style | py::array::forcecast> feats,
           const std::string& modality) {
            Matrix emb = forward(model, to_matrix(feats), parse_modality(modality));
            HashCodeMatrix codes = quantize(emb);
            py::array_t<int8_t> out({codes.n, codes.k});
            for (int i = 0; i < codes.n; ++i)
                for (int j = 0; j < codes.k; ++j)
                    out.mutable_at(i, j) = int8_t(codes.code(i, j));
            return out;
        },
        py::arg("model"), py::arg("features"), py::arg("modality"),
        "Binary codes in {-1, +1}, sign of the embedding with sgn(0) = +1.");

    m.def(
        "evaluate",
        [](const TwoPathwayModel& model,
           py::array_t<double, py::array::c_style | py::array::forcecast> img,
           py::array_t<double, py::array::c_style | py::array::forcecast> txt,
           py::array_t<uint8_t, py::array::c_style | py::array::forcecast> labels, int query_size,
           uint64_t split_seed, const std::string& direction, const std::vector<int>& k_list) {
            PairedDataset ds{to_matrix(img), to_matrix(txt)};
            LabelSet ls = to_labels(labels);
            SplitSpec split = make_split(ds.n(), query_size, split_seed);
            Direction dir = direction == "t2i" ? Direction::text_to_image
                                               : Direction::image_to_text;
            EvalReport rep = evaluate_cross_modal(model, ds, ls, split, dir, k_list);
            py::dict out;
            out["direction"] = direction_name(rep.direction);
            out["bits"] = rep.k_bits;
            out["map"] = rep.map;
            out["precision_at"] = rep.precision_at;
            return out;
        },
        py::arg("model"), py::arg("image_features"), py::arg("text_features"), py::arg("labels"),
        py::arg("query_size"), py::arg("split_seed") = 1, py::arg("direction") = "i2t",
        py::arg("k_list") = std::vector<int>{50});

    m.def(
        "pair_precision",
        [](py::array_t<int, py::array::c_style | py::array::forcecast> pair_ij,
           py::array_t<double, py::array::c_style | py::array::forcecast> pair_score,
           py::array_t<uint8_t, py::array::c_style | py::array::forcecast> labels, int k) {
            return pair_precision(to_pairs(pair_ij, pair_score), to_labels(labels), k);
        },
        py::arg("pairs"), py::arg("scores"), py::arg("labels"), py::arg("k"),
        "Oracle precision of the k highest-scoring distilled pairs.");
}
