#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ukdh/dataset.hpp"
#include "ukdh/model.hpp"

namespace ukdh {

enum class SimilarityKind {
    raw_image,
    raw_text,
    teacher_image,
    teacher_text,
    teacher_combined,
};

const char* similarity_kind_name(SimilarityKind kind);

struct ScoredPair {
    int i = 0;
    int j = 0;
    double score = 0.0;
};

// Sparse thresholded similarity matrix: the selected pairs are exactly the
// entries with S_{i,j} = 1. Self pairs are implicit and never listed.
struct RelevantPairSet {
    std::vector<ScoredPair> pairs;
    std::string source;
    std::optional<int> per_instance_k;

    // neighbor lists (j of every pair (i,j)), built lazily by callers
    std::vector<std::vector<int>> adjacency(int n) const;
    bool contains(int i, int j) const;
};

// Normalized inputs for every kind; raw features are normalized on the fly,
// teacher embeddings are already unit rows. Score is symmetric, in [0,1],
// and 1 on identical inputs.
double similarity(SimilarityKind kind, int i, int j, const PairedDataset& raw,
                  const Matrix* emb_img, const Matrix* emb_txt);

// Top-k candidates by descending score, ties broken by ascending index.
std::vector<int> rank_neighbors(SimilarityKind kind, int i, const std::vector<int>& candidates,
                                int k, const PairedDataset& raw, const Matrix* emb_img,
                                const Matrix* emb_txt);

struct DistillParams {
    int k_img = 10;
    int k_txt = 10;
    // exactly one of these is set
    std::optional<int> total_budget;     // supervised student: global truncation
    std::optional<int> per_instance_k;   // unsupervised student: k kept per instance
};

// Per-instance top-k lists in the teacher's image and text spaces, merged by
// union with score = max of the two nominations.
RelevantPairSet build_relevant_pairs(const TwoPathwayModel& teacher, const PairedDataset& dataset,
                                     const DistillParams& params);

// Same selection applied to a single similarity kind, for diagnostics.
RelevantPairSet build_pairs_single_kind(SimilarityKind kind, const TwoPathwayModel* teacher,
                                        const PairedDataset& dataset, int k_per_instance,
                                        std::optional<int> total_budget);

// Fraction of the k highest-scoring pairs that the label oracle confirms.
double pair_precision(const RelevantPairSet& pairs, const LabelSet& labels, int k);

void save_pairs_csv(const RelevantPairSet& pairs, const std::string& path);
RelevantPairSet load_pairs_csv(const std::string& path);

}  // namespace ukdh
