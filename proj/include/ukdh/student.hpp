#pragma once

#include "ukdh/distill.hpp"
#include "ukdh/retrieval.hpp"
#include "ukdh/teacher.hpp"

namespace ukdh {

enum class StudentKind { unsupervised, supervised };

const char* student_kind_name(StudentKind kind);

// Contrastive student: distilled pairs are pulled together across modalities,
// uniformly sampled non-selected cross pairs are pushed apart.
TwoPathwayModel train_student_supervised(const PairedDataset& dataset,
                                         const RelevantPairSet& pairs, const TrainConfig& config,
                                         int h, int k, TrainLog* log = nullptr);

// Triplet student: the teacher's training loop with positives sampled from
// the distilled pair set.
TwoPathwayModel train_student_unsupervised(const PairedDataset& dataset,
                                           const RelevantPairSet& pairs,
                                           const TrainConfig& config, int h, int k,
                                           NegativeStrategy strategy, TrainLog* log = nullptr);

struct GenerationRecord {
    int generation = 0;  // 0 = teacher
    TwoPathwayModel model;
    RelevantPairSet pair_set;
    EvalReport eval_i2t;
    EvalReport eval_t2i;
};

// One distill-then-train round: mine pairs from the previous generation's
// model over the training subset, train a fresh student, evaluate both
// directions on the query/retrieval split of the full dataset.
GenerationRecord run_generation(const TwoPathwayModel& prev_model,
                                const PairedDataset& train_dataset, const TrainConfig& config,
                                int h, int k, StudentKind kind,
                                const DistillParams& distill_params,
                                const PairedDataset& full_dataset, const LabelSet& labels,
                                const SplitSpec& split, const std::vector<int>& k_list,
                                int generation_index);

}  // namespace ukdh
