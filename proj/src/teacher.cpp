#include "ukdh/teacher.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <random>

#include "ukdh/errors.hpp"
#include "ukdh/losses.hpp"

namespace ukdh {

namespace {

constexpr int kHardPoolSize = 64;

Modality counterpart(Modality m) {
    return m == Modality::image ? Modality::text : Modality::image;
}

const Matrix& features_of(const PairedDataset& ds, Modality m) {
    return m == Modality::image ? ds.image_features : ds.text_features;
}

Matrix gather_rows(const Matrix& src, const std::vector<int>& idx) {
    Matrix out(int(idx.size()), src.cols);
    for (size_t i = 0; i < idx.size(); ++i)
        std::copy(src.row(idx[i]), src.row(idx[i]) + src.cols, out.row(int(i)));
    return out;
}

// positive pools: instance itself plus any S-linked neighbors, sorted
std::vector<std::vector<int>> build_linked(int n, const RelevantPairSet* pairs) {
    std::vector<std::vector<int>> linked(n);
    for (int i = 0; i < n; ++i) linked[i].push_back(i);
    if (pairs) {
        for (const auto& p : pairs->pairs)
            if (p.i != p.j) linked[p.i].push_back(p.j);
        for (auto& l : linked) {
            std::sort(l.begin(), l.end());
            l.erase(std::unique(l.begin(), l.end()), l.end());
        }
    }
    return linked;
}

bool is_linked(const std::vector<int>& l, int j) {
    return std::binary_search(l.begin(), l.end(), j);
}

TripletBatch sample_core(const PairedDataset& dataset, const std::vector<std::vector<int>>& linked,
                         int batch, int neg_per_anchor, NegativeStrategy strategy,
                         const TwoPathwayModel* model, Modality anchor_modality,
                         std::mt19937_64& rng) {
    int n = dataset.n();
    if (n < 1 || batch < 1) throw Error(ErrorCode::invalid_argument, "empty dataset or batch");
    if (strategy == NegativeStrategy::hard && !model)
        throw Error(ErrorCode::invalid_argument, "hard strategy requires a model");

    std::uniform_int_distribution<int> pick(0, n - 1);
    TripletBatch out;
    out.anchor_modality = anchor_modality;

    std::vector<int> anchors(batch);
    std::vector<int> positives(batch);
    for (int b = 0; b < batch; ++b) {
        anchors[b] = pick(rng);
        const auto& pool = linked[anchors[b]];
        positives[b] = pool[std::uniform_int_distribution<int>(0, int(pool.size()) - 1)(rng)];
    }

    Matrix anchor_emb, pool_emb, pos_emb;
    std::vector<int> pool_idx;
    if (strategy == NegativeStrategy::hard) {
        pool_idx.resize(kHardPoolSize);
        for (int& v : pool_idx) v = pick(rng);
        Modality other = counterpart(anchor_modality);
        pool_emb = forward(*model, gather_rows(features_of(dataset, other), pool_idx), other);
        anchor_emb =
            forward(*model, gather_rows(features_of(dataset, anchor_modality), anchors),
                    anchor_modality);
        pos_emb = forward(*model, gather_rows(features_of(dataset, other), positives), other);
    }

    for (int b = 0; b < batch; ++b) {
        int a = anchors[b];
        if (int(linked[a].size()) >= n)
            throw Error(ErrorCode::invalid_argument, "negative pool exhausted");
        for (int t = 0; t < neg_per_anchor; ++t) {
            int neg = -1;
            if (strategy == NegativeStrategy::hard) {
                // semi-hard: closest non-linked candidate still beyond the
                // positive; outright-closest mining drives the pathways to an
                // antipodal degenerate optimum
                double d_ap = l2_distance(anchor_emb.row_span(b), pos_emb.row_span(b));
                double best_semi = 1e300, best_far = -1.0;
                int semi = -1, far = -1;
                for (int c = 0; c < kHardPoolSize; ++c) {
                    int j = pool_idx[c];
                    if (is_linked(linked[a], j)) continue;
                    double d = l2_distance(anchor_emb.row_span(b), pool_emb.row_span(c));
                    if (d > d_ap && d < best_semi) {
                        best_semi = d;
                        semi = j;
                    }
                    if (d > best_far) {
                        best_far = d;
                        far = j;
                    }
                }
                neg = semi >= 0 ? semi : far;
            }
            if (neg < 0) {  // uniform, or hard pool fully linked
                do {
                    neg = pick(rng);
                } while (is_linked(linked[a], neg));
            }
            out.triplets.push_back({a, positives[b], neg});
        }
    }
    return out;
}

}  // namespace

TripletBatch sample_triplets(const PairedDataset& dataset, const RelevantPairSet* pairs,
                             int batch, int neg_per_anchor, NegativeStrategy strategy,
                             const TwoPathwayModel* model, Modality anchor_modality,
                             uint64_t seed) {
    std::mt19937_64 rng(seed);
    auto linked = build_linked(dataset.n(), pairs);
    return sample_core(dataset, linked, batch, neg_per_anchor, strategy, model, anchor_modality,
                       rng);
}

void TrainLog::save_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::io_failure, "cannot write " + path);
    os << "epoch,mean_loss\n";
    char buf[64];
    for (size_t e = 0; e < epoch_mean_loss.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", e, epoch_mean_loss[e]);
        os << buf;
    }
}

TwoPathwayModel train_teacher(const PairedDataset& dataset, const TrainConfig& config, int h,
                              int k, NegativeStrategy strategy, TrainLog* log,
                              const RelevantPairSet* pairs) {
    if (dataset.n() < 3) throw Error(ErrorCode::invalid_argument, "need at least 3 instances");
    TwoPathwayModel model = init_model(dataset.d_image(), dataset.d_text(), h, k, config.seed);
    auto linked = build_linked(dataset.n(), pairs);

    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
    int steps_per_epoch = std::max(1, dataset.n() / config.batch_size);

    TwoPathwayModel last_good = model;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        double loss_sum = 0.0;
        long loss_count = 0;
        bool bad = false;
        for (int step = 0; step < steps_per_epoch && !bad; ++step) {
            Modality anchor_mod =
                ((epoch * steps_per_epoch + step) % 2 == 0) ? Modality::image : Modality::text;
            Modality other = counterpart(anchor_mod);

            TripletBatch batch =
                sample_core(dataset, linked, config.batch_size, config.negative_samples,
                            strategy, &model, anchor_mod, rng);
            int t_count = int(batch.triplets.size());

            std::vector<int> a_idx(t_count), pn_idx(2 * t_count);
            for (int t = 0; t < t_count; ++t) {
                a_idx[t] = batch.triplets[t].anchor;
                pn_idx[t] = batch.triplets[t].positive;
                pn_idx[t_count + t] = batch.triplets[t].negative;
            }

            ForwardCache cache_a, cache_pn;
            Matrix emb_a = forward(model, gather_rows(features_of(dataset, anchor_mod), a_idx),
                                   anchor_mod, &cache_a);
            Matrix emb_pn = forward(model, gather_rows(features_of(dataset, other), pn_idx),
                                    other, &cache_pn);

            Matrix g_a(t_count, k), g_pn(2 * t_count, k);
            double scale = 1.0 / t_count;
            TripletGrads tg;
            for (int t = 0; t < t_count; ++t) {
                double loss = triplet_loss(emb_a.row_span(t), emb_pn.row_span(t),
                                           emb_pn.row_span(t_count + t), config.margin, &tg);
                loss_sum += loss;
                ++loss_count;
                for (int j = 0; j < k; ++j) {
                    g_a.at(t, j) += scale * tg.anchor[j];
                    g_pn.at(t, j) += scale * tg.positive[j];
                    g_pn.at(t_count + t, j) += scale * tg.negative[j];
                }
            }

            PathwayGrads grads_a = zero_grads(model.pathway(anchor_mod));
            PathwayGrads grads_pn = zero_grads(model.pathway(other));
            accumulate_backward(model, anchor_mod, cache_a, g_a, grads_a);
            accumulate_backward(model, other, cache_pn, g_pn, grads_pn);
            try {
                sgd_step(model.pathway(anchor_mod), grads_a, config.learning_rate,
                         config.weight_decay);
                sgd_step(model.pathway(other), grads_pn, config.learning_rate,
                         config.weight_decay);
            } catch (const Error&) {
                bad = true;
            }
            if (!std::isfinite(loss_sum)) bad = true;
        }

        if (bad || !model.all_finite()) {
            if (log) log->diverged = true;
            return last_good;  // abort with the last finite checkpoint
        }
        if (log) log->epoch_mean_loss.push_back(loss_count ? loss_sum / loss_count : 0.0);
        last_good = model;
    }
    return model;
}

}  // namespace ukdh
