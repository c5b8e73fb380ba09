#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ukdh/matrix.hpp"

namespace ukdh {

// N aligned (image-feature, text-feature) rows. Row i of both matrices
// describes the same underlying instance.
struct PairedDataset {
    Matrix image_features;  // N x d_image
    Matrix text_features;   // N x d_text

    int n() const { return image_features.rows; }
    int d_image() const { return image_features.cols; }
    int d_text() const { return text_features.cols; }
};

// Multi-label ground truth, evaluation-only. labels[i] is a bitset over
// n_classes categories, packed LSB-first into bytes.
struct LabelSet {
    int n_classes = 0;
    std::vector<std::vector<uint8_t>> bits;  // n rows of ceil(n_classes/8) bytes

    int n() const { return static_cast<int>(bits.size()); }
    bool has_label(int i, int c) const {
        return (bits[i][c / 8] >> (c % 8)) & 1;
    }
    void set_label(int i, int c) { bits[i][c / 8] |= uint8_t(1u << (c % 8)); }
};

struct SplitSpec {
    std::vector<int> query_indices;
    std::vector<int> retrieval_indices;
    uint64_t seed = 0;
};

// UKDF binary feature file round-trip.
PairedDataset load_features(const std::string& path);
void save_features(const PairedDataset& ds, const std::string& path);

// UKDL binary label file round-trip.
LabelSet load_labels(const std::string& path);
void save_labels(const LabelSet& labels, const std::string& path);

// Desk-scale stand-in for a real multi-label benchmark: each instance owns
// one or two latent classes, per-modality class prototypes are random unit
// vectors, features are the mean of owned prototypes plus Gaussian noise.
struct SyntheticResult {
    PairedDataset dataset;
    LabelSet labels;
};
SyntheticResult generate_synthetic(int n_pairs, int n_classes, int d_image, int d_text,
                                   double noise, uint64_t seed);

// True iff the label sets of i and j intersect.
bool oracle_relevant(const LabelSet& labels, int i, int j);

// Disjoint query/retrieval split over [0, n), query side first.
SplitSpec make_split(int n, int n_query, uint64_t seed);

// Row subset in index order.
PairedDataset subset_dataset(const PairedDataset& ds, const std::vector<int>& indices);
LabelSet subset_labels(const LabelSet& labels, const std::vector<int>& indices);

}  // namespace ukdh
