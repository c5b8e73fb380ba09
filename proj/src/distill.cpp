#include "ukdh/distill.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "ukdh/errors.hpp"

namespace ukdh {

namespace {

double unit_distance(std::span<const double> a, std::span<const double> b) {
    std::vector<double> ua(a.begin(), a.end()), ub(b.begin(), b.end());
    l2_normalize(ua);
    l2_normalize(ub);
    return l2_distance(ua, ub);
}

void sort_canonical(std::vector<ScoredPair>& pairs) {
    std::sort(pairs.begin(), pairs.end(), [](const ScoredPair& a, const ScoredPair& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
}

// shared selection: per-instance top-k lists under `score`, merged by max
RelevantPairSet select_pairs(int n, const std::function<double(int, int)>& score_img,
                             const std::function<double(int, int)>& score_txt, int k_img,
                             int k_txt, std::optional<int> total_budget,
                             std::optional<int> per_instance_k, const std::string& source) {
    RelevantPairSet out;
    out.source = source;
    out.per_instance_k = per_instance_k;

    for (int i = 0; i < n; ++i) {
        std::map<int, double> merged;
        auto take_topk = [&](const std::function<double(int, int)>& score, int k) {
            if (k <= 0) return;
            std::vector<ScoredPair> cand;
            cand.reserve(n - 1);
            for (int j = 0; j < n; ++j)
                if (j != i) cand.push_back({i, j, score(i, j)});
            int kk = std::min<int>(k, int(cand.size()));
            std::partial_sort(cand.begin(), cand.begin() + kk, cand.end(),
                              [](const ScoredPair& a, const ScoredPair& b) {
                                  if (a.score != b.score) return a.score > b.score;
                                  return a.j < b.j;
                              });
            for (int t = 0; t < kk; ++t) {
                auto [it, inserted] = merged.emplace(cand[t].j, cand[t].score);
                if (!inserted) it->second = std::max(it->second, cand[t].score);
            }
        };
        take_topk(score_img, k_img);
        take_topk(score_txt, k_txt);

        std::vector<ScoredPair> rows;
        rows.reserve(merged.size());
        for (const auto& [j, s] : merged) rows.push_back({i, j, s});
        if (per_instance_k) {
            sort_canonical(rows);
            if (int(rows.size()) > *per_instance_k) rows.resize(*per_instance_k);
        }
        out.pairs.insert(out.pairs.end(), rows.begin(), rows.end());
    }

    sort_canonical(out.pairs);
    if (total_budget) {
        if (*total_budget > int(out.pairs.size()))
            throw Error(ErrorCode::invalid_argument, "pair budget exceeds available pairs");
        out.pairs.resize(*total_budget);
    }
    return out;
}

}  // namespace

const char* similarity_kind_name(SimilarityKind kind) {
    switch (kind) {
        case SimilarityKind::raw_image: return "raw_image";
        case SimilarityKind::raw_text: return "raw_text";
        case SimilarityKind::teacher_image: return "teacher_image";
        case SimilarityKind::teacher_text: return "teacher_text";
        case SimilarityKind::teacher_combined: return "teacher_combined";
    }
    return "unknown";
}

std::vector<std::vector<int>> RelevantPairSet::adjacency(int n) const {
    std::vector<std::vector<int>> adj(n);
    for (const auto& p : pairs) adj[p.i].push_back(p.j);
    return adj;
}

bool RelevantPairSet::contains(int i, int j) const {
    for (const auto& p : pairs)
        if (p.i == i && p.j == j) return true;
    return false;
}

double similarity(SimilarityKind kind, int i, int j, const PairedDataset& raw,
                  const Matrix* emb_img, const Matrix* emb_txt) {
    auto need = [&](const Matrix* m) -> const Matrix& {
        if (!m) throw Error(ErrorCode::invalid_argument,
                            "teacher embeddings required for this similarity kind");
        return *m;
    };
    switch (kind) {
        case SimilarityKind::raw_image:
            return (2.0 - unit_distance(raw.image_features.row_span(i),
                                        raw.image_features.row_span(j))) / 2.0;
        case SimilarityKind::raw_text:
            return (2.0 - unit_distance(raw.text_features.row_span(i),
                                        raw.text_features.row_span(j))) / 2.0;
        case SimilarityKind::teacher_image: {
            const Matrix& e = need(emb_img);
            return (2.0 - l2_distance(e.row_span(i), e.row_span(j))) / 2.0;
        }
        case SimilarityKind::teacher_text: {
            const Matrix& e = need(emb_txt);
            return (2.0 - l2_distance(e.row_span(i), e.row_span(j))) / 2.0;
        }
        case SimilarityKind::teacher_combined: {
            const Matrix& ei = need(emb_img);
            const Matrix& et = need(emb_txt);
            return (4.0 - l2_distance(ei.row_span(i), ei.row_span(j)) -
                    l2_distance(et.row_span(i), et.row_span(j))) / 4.0;
        }
    }
    throw Error(ErrorCode::invalid_argument, "unknown similarity kind");
}

std::vector<int> rank_neighbors(SimilarityKind kind, int i, const std::vector<int>& candidates,
                                int k, const PairedDataset& raw, const Matrix* emb_img,
                                const Matrix* emb_txt) {
    if (k > int(candidates.size()))
        throw Error(ErrorCode::invalid_argument, "k exceeds candidate count");
    std::vector<std::pair<double, int>> scored;
    scored.reserve(candidates.size());
    for (int j : candidates)
        scored.emplace_back(similarity(kind, i, j, raw, emb_img, emb_txt), j);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<int> out;
    out.reserve(k);
    for (int t = 0; t < k; ++t) out.push_back(scored[t].second);
    return out;
}

RelevantPairSet build_relevant_pairs(const TwoPathwayModel& teacher, const PairedDataset& dataset,
                                     const DistillParams& params) {
    if (teacher.d_image != dataset.d_image() || teacher.d_text != dataset.d_text())
        throw Error(ErrorCode::dimension_mismatch, "teacher dims do not match dataset");
    Matrix emb_img = forward(teacher, dataset.image_features, Modality::image);
    Matrix emb_txt = forward(teacher, dataset.text_features, Modality::text);

    auto s_img = [&](int i, int j) {
        return (2.0 - l2_distance(emb_img.row_span(i), emb_img.row_span(j))) / 2.0;
    };
    auto s_txt = [&](int i, int j) {
        return (2.0 - l2_distance(emb_txt.row_span(i), emb_txt.row_span(j))) / 2.0;
    };
    std::string source = "merged";
    if (params.total_budget) source += "/budget";
    else source += "/per_instance";
    return select_pairs(dataset.n(), s_img, s_txt, params.k_img, params.k_txt,
                        params.total_budget, params.per_instance_k, source);
}

RelevantPairSet build_pairs_single_kind(SimilarityKind kind, const TwoPathwayModel* teacher,
                                        const PairedDataset& dataset, int k_per_instance,
                                        std::optional<int> total_budget) {
    Matrix emb_img, emb_txt;
    const Matrix* pei = nullptr;
    const Matrix* pet = nullptr;
    if (teacher) {
        emb_img = forward(*teacher, dataset.image_features, Modality::image);
        emb_txt = forward(*teacher, dataset.text_features, Modality::text);
        pei = &emb_img;
        pet = &emb_txt;
    }
    auto score = [&](int i, int j) { return similarity(kind, i, j, dataset, pei, pet); };
    auto none = [](int, int) { return 0.0; };
    return select_pairs(dataset.n(), score, none, k_per_instance, 0, total_budget, std::nullopt,
                        similarity_kind_name(kind));
}

double pair_precision(const RelevantPairSet& pairs, const LabelSet& labels, int k) {
    if (labels.n() == 0) throw Error(ErrorCode::invalid_argument, "labels required");
    if (k < 1 || k > int(pairs.pairs.size()))
        throw Error(ErrorCode::invalid_argument, "k out of range for pair set");
    std::vector<ScoredPair> sorted = pairs.pairs;
    sort_canonical(sorted);
    int hits = 0;
    for (int t = 0; t < k; ++t)
        if (oracle_relevant(labels, sorted[t].i, sorted[t].j)) ++hits;
    return double(hits) / k;
}

void save_pairs_csv(const RelevantPairSet& pairs, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::io_failure, "cannot write " + path);
    os << "i,j,score,source\n";
    std::vector<ScoredPair> sorted = pairs.pairs;
    sort_canonical(sorted);
    char buf[128];
    for (const auto& p : sorted) {
        std::snprintf(buf, sizeof(buf), "%d,%d,%.17g,%s\n", p.i, p.j, p.score,
                      pairs.source.c_str());
        os << buf;
    }
    if (!os) throw Error(ErrorCode::io_failure, "write failed for " + path);
}

RelevantPairSet load_pairs_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::io_failure, "cannot open " + path);
    RelevantPairSet out;
    std::string line;
    if (!std::getline(is, line) || line.rfind("i,j,score,source", 0) != 0)
        throw Error(ErrorCode::bad_magic, "not a pair CSV");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string fi, fj, fs, src;
        if (!std::getline(ss, fi, ',') || !std::getline(ss, fj, ',') ||
            !std::getline(ss, fs, ',') || !std::getline(ss, src))
            throw Error(ErrorCode::truncated_payload, "malformed pair CSV row");
        out.pairs.push_back({std::stoi(fi), std::stoi(fj), std::stod(fs)});
        out.source = src;
    }
    return out;
}

}  // namespace ukdh
