#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ukdh/matrix.hpp"

namespace ukdh {

enum class Modality { image, text };

struct AffineLayer {
    Matrix w;               // out x in
    std::vector<double> b;  // out
};

// One modality pathway: affine -> tanh -> affine -> l2-normalize.
struct Pathway {
    AffineLayer l1;
    AffineLayer l2;
};

// Two-pathway embedding model into a shared k-dimensional space.
struct TwoPathwayModel {
    Pathway image_pathway;
    Pathway text_pathway;
    int d_image = 0;
    int d_text = 0;
    int h = 0;
    int k = 0;

    Pathway& pathway(Modality m) { return m == Modality::image ? image_pathway : text_pathway; }
    const Pathway& pathway(Modality m) const {
        return m == Modality::image ? image_pathway : text_pathway;
    }
    int input_dim(Modality m) const { return m == Modality::image ? d_image : d_text; }
    bool all_finite() const;
};

struct TrainConfig {
    double learning_rate = 0.1;
    double weight_decay = 0.01;
    int batch_size = 64;
    int epochs = 50;
    double margin = 0.5;
    uint64_t seed = 0;
    int negative_samples = 1;  // negatives per anchor
};

// Xavier-uniform weights, zero biases, deterministic per seed.
TwoPathwayModel init_model(int d_image, int d_text, int h, int k, uint64_t seed);

// Normalizes in place; returns false (zero sentinel) when the norm is below
// 1e-12, in which case the vector is zeroed.
bool l2_normalize(std::span<double> v);

// Intermediate activations kept for backprop.
struct ForwardCache {
    Matrix input;      // B x D
    Matrix hidden;     // B x H, post-tanh
    Matrix prenorm;    // B x K
    std::vector<double> prenorm_norm;  // B
    std::vector<uint8_t> degenerate;   // B, 1 where the zero sentinel fired
};

// Embeds a batch of raw features; rows of the result are unit-norm (or zero
// sentinels). Pure function of (model, features).
Matrix forward(const TwoPathwayModel& model, const Matrix& features, Modality modality,
               ForwardCache* cache = nullptr);

struct PathwayGrads {
    Matrix dw1;
    std::vector<double> db1;
    Matrix dw2;
    std::vector<double> db2;
};

PathwayGrads zero_grads(const Pathway& p);
void accumulate_backward(const TwoPathwayModel& model, Modality modality,
                         const ForwardCache& cache, const Matrix& grad_output,
                         PathwayGrads& grads);

// w <- w - lr * (g + weight_decay * w), applied to one pathway.
void sgd_step(Pathway& pathway, const PathwayGrads& grads, double lr, double weight_decay);

// UKDM checkpoint round-trip.
void save_model(const TwoPathwayModel& model, const std::string& path);
TwoPathwayModel load_model(const std::string& path);

}  // namespace ukdh
