#pragma once

#include <span>
#include <vector>

namespace ukdh {

struct TripletGrads {
    std::vector<double> anchor;
    std::vector<double> positive;
    std::vector<double> negative;
};

// Hinge triplet loss max(0, ||a-p|| - ||a-n|| + margin) with exact
// subgradients; the zero branch is taken at the kink.
double triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                    std::span<const double> negative, double margin,
                    TripletGrads* grads = nullptr);

struct PairGrads {
    std::vector<double> img;
    std::vector<double> txt;
};

// Similar pairs are pulled by their Euclidean distance; dissimilar pairs are
// pushed apart up to the margin.
double pairwise_contrastive_loss(std::span<const double> f_img, std::span<const double> f_txt,
                                 bool similar, double margin, PairGrads* grads = nullptr);

}  // namespace ukdh
