#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ukdh/dataset.hpp"
#include "ukdh/distill.hpp"
#include "ukdh/model.hpp"

namespace ukdh {

enum class NegativeStrategy { uniform, hard };

struct TripletRef {
    int anchor = 0;    // instance index, anchor_modality side
    int positive = 0;  // instance index, counterpart side
    int negative = 0;  // instance index, counterpart side
};

struct TripletBatch {
    Modality anchor_modality = Modality::image;
    std::vector<TripletRef> triplets;
};

// Positives come from the pair set when one is given (plus the instance's own
// counterpart, S_{i,i} being implicit), otherwise from paired counterparts
// only. Uniform negatives are drawn from non-linked instances; hard negatives
// are the closest non-linked candidates under the current model among a
// sampled pool of 64.
TripletBatch sample_triplets(const PairedDataset& dataset, const RelevantPairSet* pairs,
                             int batch, int neg_per_anchor, NegativeStrategy strategy,
                             const TwoPathwayModel* model, Modality anchor_modality,
                             uint64_t seed);

struct TrainLog {
    std::vector<double> epoch_mean_loss;
    bool diverged = false;

    void save_csv(const std::string& path) const;
};

// Unsupervised triplet training over cross-modal triplets, alternating the
// anchor modality per step. Never reads labels. When `pairs` is supplied the
// same loop trains the S-guided unsupervised student.
TwoPathwayModel train_teacher(const PairedDataset& dataset, const TrainConfig& config, int h,
                              int k, NegativeStrategy strategy, TrainLog* log = nullptr,
                              const RelevantPairSet* pairs = nullptr);

}  // namespace ukdh
