#include "ukdh/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "ukdh/errors.hpp"

namespace ukdh {

HashCodeMatrix quantize(const Matrix& embeddings) {
    if (!embeddings.all_finite())
        throw Error(ErrorCode::non_finite_value, "non-finite embedding in quantize");
    HashCodeMatrix codes;
    codes.n = embeddings.rows;
    codes.k = embeddings.cols;
    codes.words_per_row = (embeddings.cols + 63) / 64;
    codes.words.assign(size_t(codes.n) * codes.words_per_row, 0);
    for (int i = 0; i < codes.n; ++i) {
        uint64_t* row = codes.row(i);
        for (int j = 0; j < codes.k; ++j) {
            if (embeddings.at(i, j) >= 0.0)  // sgn(0) = +1
                row[j / 64] |= uint64_t(1) << (j % 64);
        }
    }
    return codes;
}

int hamming_distance(const HashCodeMatrix& a, int i, const HashCodeMatrix& b, int j) {
    if (a.k != b.k) throw Error(ErrorCode::dimension_mismatch, "code length mismatch");
    int dist = 0;
    const uint64_t* ra = a.row(i);
    const uint64_t* rb = b.row(j);
    for (int w = 0; w < a.words_per_row; ++w) dist += std::popcount(ra[w] ^ rb[w]);
    return dist;
}

std::vector<int> rank_by_hamming(const HashCodeMatrix& query, int query_row,
                                 const HashCodeMatrix& db) {
    std::vector<int> dist(db.n);
    for (int i = 0; i < db.n; ++i) dist[i] = hamming_distance(query, query_row, db, i);
    std::vector<int> order(db.n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return dist[a] < dist[b]; });
    return order;
}

double average_precision(const std::vector<char>& ranked_relevance) {
    if (ranked_relevance.empty())
        throw Error(ErrorCode::invalid_argument, "empty ranking");
    int relevant = 0;
    double sum = 0.0;
    for (size_t r = 0; r < ranked_relevance.size(); ++r) {
        if (ranked_relevance[r]) {
            ++relevant;
            sum += double(relevant) / double(r + 1);
        }
    }
    return relevant == 0 ? 0.0 : sum / relevant;
}

const char* direction_name(Direction d) {
    return d == Direction::image_to_text ? "i2t" : "t2i";
}

EvalReport evaluate_cross_modal(const TwoPathwayModel& model, const PairedDataset& dataset,
                                const LabelSet& labels, const SplitSpec& split,
                                Direction direction, const std::vector<int>& k_list) {
    if (split.query_indices.empty() || split.retrieval_indices.empty())
        throw Error(ErrorCode::invalid_argument, "empty split");

    Modality query_mod = direction == Direction::image_to_text ? Modality::image : Modality::text;
    Modality db_mod = direction == Direction::image_to_text ? Modality::text : Modality::image;

    auto gather = [&](const std::vector<int>& idx, Modality m) {
        const Matrix& src = m == Modality::image ? dataset.image_features : dataset.text_features;
        Matrix out(int(idx.size()), src.cols);
        for (size_t i = 0; i < idx.size(); ++i)
            std::copy(src.row(idx[i]), src.row(idx[i]) + src.cols, out.row(int(i)));
        return out;
    };

    HashCodeMatrix q_codes = quantize(forward(model, gather(split.query_indices, query_mod), query_mod));
    HashCodeMatrix db_codes = quantize(forward(model, gather(split.retrieval_indices, db_mod), db_mod));

    int n_db = db_codes.n;
    EvalReport report;
    report.direction = direction;
    report.k_bits = model.k;

    std::vector<double> pk_sum(k_list.size(), 0.0);
    std::vector<int> curve_ranks;
    for (int t = 1; t <= 20; ++t) {
        int r = std::max(1, n_db * t / 20);
        if (curve_ranks.empty() || r != curve_ranks.back()) curve_ranks.push_back(r);
    }
    std::vector<double> curve_sum(curve_ranks.size(), 0.0);

    double map_sum = 0.0;
    int map_count = 0;
    std::vector<char> rel(n_db);
    for (size_t q = 0; q < split.query_indices.size(); ++q) {
        std::vector<int> order = rank_by_hamming(q_codes, int(q), db_codes);
        int n_rel = 0;
        for (int r = 0; r < n_db; ++r) {
            rel[r] = oracle_relevant(labels, split.query_indices[q],
                                     split.retrieval_indices[order[r]]);
            n_rel += rel[r];
        }
        if (n_rel > 0) {
            map_sum += average_precision(rel);
            ++map_count;
        }
        std::vector<int> cum(n_db + 1, 0);
        for (int r = 0; r < n_db; ++r) cum[r + 1] = cum[r] + (rel[r] ? 1 : 0);
        for (size_t t = 0; t < k_list.size(); ++t) {
            int kk = std::min(k_list[t], n_db);
            pk_sum[t] += double(cum[kk]) / kk;
        }
        for (size_t t = 0; t < curve_ranks.size(); ++t)
            curve_sum[t] += double(cum[curve_ranks[t]]) / curve_ranks[t];
    }

    int n_query = int(split.query_indices.size());
    report.map = map_count > 0 ? map_sum / map_count : 0.0;
    for (size_t t = 0; t < k_list.size(); ++t)
        report.precision_at[k_list[t]] = pk_sum[t] / n_query;
    for (size_t t = 0; t < curve_ranks.size(); ++t)
        report.curve.emplace_back(curve_ranks[t], curve_sum[t] / n_query);
    return report;
}

void save_eval_report(const EvalReport& report, const std::string& json_path,
                      const std::string& curve_csv_path) {
    nlohmann::json j;
    j["direction"] = direction_name(report.direction);
    j["k_bits"] = report.k_bits;
    j["map"] = report.map;
    j["map_cutoff"] = "full";  // mAP over the full retrieval list
    nlohmann::json pk = nlohmann::json::object();
    for (const auto& [k, p] : report.precision_at) pk[std::to_string(k)] = p;
    j["precision_at"] = pk;
    std::ofstream os(json_path);
    if (!os) throw Error(ErrorCode::io_failure, "cannot write " + json_path);
    os << j.dump(2) << "\n";

    if (!curve_csv_path.empty()) {
        std::ofstream cs(curve_csv_path);
        if (!cs) throw Error(ErrorCode::io_failure, "cannot write " + curve_csv_path);
        cs << "rank,precision\n";
        char buf[64];
        for (const auto& [rank, prec] : report.curve) {
            std::snprintf(buf, sizeof(buf), "%d,%.17g\n", rank, prec);
            cs << buf;
        }
    }
}

EvalReport load_eval_report(const std::string& json_path) {
    std::ifstream is(json_path);
    if (!is) throw Error(ErrorCode::io_failure, "cannot open " + json_path);
    nlohmann::json j;
    is >> j;
    EvalReport report;
    report.direction =
        j.at("direction").get<std::string>() == "i2t" ? Direction::image_to_text : Direction::text_to_image;
    report.k_bits = j.at("k_bits").get<int>();
    report.map = j.at("map").get<double>();
    for (const auto& [k, p] : j.at("precision_at").items())
        report.precision_at[std::stoi(k)] = p.get<double>();
    return report;
}

}  // namespace ukdh
