#include "ukdh/student.hpp"

#include <algorithm>
#include <random>
#include <unordered_set>

#include "ukdh/errors.hpp"
#include "ukdh/losses.hpp"

namespace ukdh {

namespace {

Matrix gather_rows(const Matrix& src, const std::vector<int>& idx) {
    Matrix out(int(idx.size()), src.cols);
    for (size_t i = 0; i < idx.size(); ++i)
        std::copy(src.row(idx[i]), src.row(idx[i]) + src.cols, out.row(int(i)));
    return out;
}

}  // namespace

const char* student_kind_name(StudentKind kind) {
    return kind == StudentKind::unsupervised ? "us" : "ss";
}

TwoPathwayModel train_student_supervised(const PairedDataset& dataset,
                                         const RelevantPairSet& pairs, const TrainConfig& config,
                                         int h, int k, TrainLog* log) {
    if (pairs.pairs.empty()) throw Error(ErrorCode::invalid_argument, "empty pair set");
    int n = dataset.n();

    // selected set membership; the diagonal counts as selected so dissimilar
    // sampling never pushes a paired instance apart
    std::unordered_set<int64_t> selected;
    selected.reserve(pairs.pairs.size() * 2 + n);
    for (const auto& p : pairs.pairs) selected.insert(int64_t(p.i) * n + p.j);
    for (int i = 0; i < n; ++i) selected.insert(int64_t(i) * n + i);

    TwoPathwayModel model = init_model(dataset.d_image(), dataset.d_text(), h, k, config.seed);
    std::mt19937_64 rng(config.seed ^ 0xc2b2ae3d27d4eb4full);
    std::uniform_int_distribution<int> pick_inst(0, n - 1);
    std::uniform_int_distribution<size_t> pick_pair(0, pairs.pairs.size() - 1);
    int steps_per_epoch = std::max(1, n / config.batch_size);
    int half = std::max(1, config.batch_size / 2);  // equal similar/dissimilar counts

    TwoPathwayModel last_good = model;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double loss_sum = 0.0;
        long loss_count = 0;
        bool bad = false;
        for (int step = 0; step < steps_per_epoch && !bad; ++step) {
            std::vector<int> img_idx, txt_idx;
            std::vector<char> similar;
            for (int b = 0; b < half; ++b) {
                const auto& p = pairs.pairs[pick_pair(rng)];
                img_idx.push_back(p.i);
                txt_idx.push_back(p.j);
                similar.push_back(1);
            }
            for (int b = 0; b < half; ++b) {
                int i, j;
                do {
                    i = pick_inst(rng);
                    j = pick_inst(rng);
                } while (selected.count(int64_t(i) * n + j));
                img_idx.push_back(i);
                txt_idx.push_back(j);
                similar.push_back(0);
            }

            int b_total = int(img_idx.size());
            ForwardCache cache_i, cache_t;
            Matrix emb_i = forward(model, gather_rows(dataset.image_features, img_idx),
                                   Modality::image, &cache_i);
            Matrix emb_t = forward(model, gather_rows(dataset.text_features, txt_idx),
                                   Modality::text, &cache_t);

            Matrix g_i(b_total, k), g_t(b_total, k);
            double scale = 1.0 / b_total;
            PairGrads pg;
            for (int b = 0; b < b_total; ++b) {
                double loss = pairwise_contrastive_loss(emb_i.row_span(b), emb_t.row_span(b),
                                                        similar[b], config.margin, &pg);
                loss_sum += loss;
                ++loss_count;
                for (int j = 0; j < k; ++j) {
                    g_i.at(b, j) += scale * pg.img[j];
                    g_t.at(b, j) += scale * pg.txt[j];
                }
            }

            PathwayGrads grads_i = zero_grads(model.image_pathway);
            PathwayGrads grads_t = zero_grads(model.text_pathway);
            accumulate_backward(model, Modality::image, cache_i, g_i, grads_i);
            accumulate_backward(model, Modality::text, cache_t, g_t, grads_t);
            try {
                sgd_step(model.image_pathway, grads_i, config.learning_rate, config.weight_decay);
                sgd_step(model.text_pathway, grads_t, config.learning_rate, config.weight_decay);
            } catch (const Error&) {
                bad = true;
            }
            if (!std::isfinite(loss_sum)) bad = true;
        }

        if (bad || !model.all_finite()) {
            if (log) log->diverged = true;
            return last_good;
        }
        if (log) log->epoch_mean_loss.push_back(loss_count ? loss_sum / loss_count : 0.0);
        last_good = model;
    }
    return model;
}

TwoPathwayModel train_student_unsupervised(const PairedDataset& dataset,
                                           const RelevantPairSet& pairs,
                                           const TrainConfig& config, int h, int k,
                                           NegativeStrategy strategy, TrainLog* log) {
    return train_teacher(dataset, config, h, k, strategy, log, &pairs);
}

GenerationRecord run_generation(const TwoPathwayModel& prev_model,
                                const PairedDataset& train_dataset, const TrainConfig& config,
                                int h, int k, StudentKind kind,
                                const DistillParams& distill_params,
                                const PairedDataset& full_dataset, const LabelSet& labels,
                                const SplitSpec& split, const std::vector<int>& k_list,
                                int generation_index) {
    GenerationRecord rec;
    rec.generation = generation_index;
    rec.pair_set = build_relevant_pairs(prev_model, train_dataset, distill_params);
    if (kind == StudentKind::supervised)
        rec.model = train_student_supervised(train_dataset, rec.pair_set, config, h, k);
    else
        rec.model = train_student_unsupervised(train_dataset, rec.pair_set, config, h, k,
                                               NegativeStrategy::hard);
    rec.eval_i2t = evaluate_cross_modal(rec.model, full_dataset, labels, split,
                                        Direction::image_to_text, k_list);
    rec.eval_t2i = evaluate_cross_modal(rec.model, full_dataset, labels, split,
                                        Direction::text_to_image, k_list);
    return rec;
}

}  // namespace ukdh
