#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ukdh/dataset.hpp"
#include "ukdh/model.hpp"

namespace ukdh {

// N rows of K codes in {-1,+1}, bit-packed into 64-bit words (bit 1 <=> +1,
// LSB-first). Unused high bits of the last word stay 0.
struct HashCodeMatrix {
    int n = 0;
    int k = 0;
    int words_per_row = 0;
    std::vector<uint64_t> words;

    const uint64_t* row(int i) const { return words.data() + size_t(i) * words_per_row; }
    uint64_t* row(int i) { return words.data() + size_t(i) * words_per_row; }
    // code bit as {-1,+1}
    int code(int i, int j) const { return (row(i)[j / 64] >> (j % 64)) & 1 ? +1 : -1; }
};

// b = sgn(f) with sgn(0) = +1.
HashCodeMatrix quantize(const Matrix& embeddings);

int hamming_distance(const HashCodeMatrix& codes, int i, const HashCodeMatrix& other, int j);

// Ascending Hamming distance, ties by ascending index.
std::vector<int> rank_by_hamming(const HashCodeMatrix& query, int query_row,
                                 const HashCodeMatrix& db);

// AP over a ranked relevance list; 0 when nothing is relevant.
double average_precision(const std::vector<char>& ranked_relevance);

enum class Direction { image_to_text, text_to_image };

const char* direction_name(Direction d);

struct EvalReport {
    Direction direction = Direction::image_to_text;
    int k_bits = 0;
    double map = 0.0;
    std::map<int, double> precision_at;
    std::vector<std::pair<int, double>> curve;  // (rank, precision)
};

// Full evaluation protocol: embed both sides, quantize, rank by Hamming,
// mAP over the full list plus P@K samples. Queries with no relevant
// database item are excluded from the mAP mean.
EvalReport evaluate_cross_modal(const TwoPathwayModel& model, const PairedDataset& dataset,
                                const LabelSet& labels, const SplitSpec& split,
                                Direction direction, const std::vector<int>& k_list);

void save_eval_report(const EvalReport& report, const std::string& json_path,
                      const std::string& curve_csv_path);
EvalReport load_eval_report(const std::string& json_path);

}  // namespace ukdh
