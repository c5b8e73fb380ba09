#include "ukdh/losses.hpp"

#include <cmath>

#include "ukdh/errors.hpp"
#include "ukdh/matrix.hpp"

namespace ukdh {

namespace {

constexpr double kDistEps = 1e-12;

void check_finite(std::span<const double> v, const char* what) {
    for (double x : v)
        if (!std::isfinite(x)) throw Error(ErrorCode::non_finite_value, what);
}

// d||a-b||/da = (a-b)/||a-b||; zero at coincident points.
void add_distance_grad(std::span<const double> a, std::span<const double> b, double dist,
                       double scale, std::vector<double>& da, std::vector<double>& db) {
    if (dist <= kDistEps) return;
    for (size_t i = 0; i < a.size(); ++i) {
        double g = scale * (a[i] - b[i]) / dist;
        da[i] += g;
        db[i] -= g;
    }
}

}  // namespace

double triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                    std::span<const double> negative, double margin, TripletGrads* grads) {
    check_finite(anchor, "non-finite anchor");
    check_finite(positive, "non-finite positive");
    check_finite(negative, "non-finite negative");

    double d_ap = l2_distance(anchor, positive);
    double d_an = l2_distance(anchor, negative);
    double raw = d_ap - d_an + margin;

    if (grads) {
        grads->anchor.assign(anchor.size(), 0.0);
        grads->positive.assign(positive.size(), 0.0);
        grads->negative.assign(negative.size(), 0.0);
        if (raw > 0.0) {
            add_distance_grad(anchor, positive, d_ap, 1.0, grads->anchor, grads->positive);
            add_distance_grad(anchor, negative, d_an, -1.0, grads->anchor, grads->negative);
        }
    }
    return raw > 0.0 ? raw : 0.0;
}

double pairwise_contrastive_loss(std::span<const double> f_img, std::span<const double> f_txt,
                                 bool similar, double margin, PairGrads* grads) {
    check_finite(f_img, "non-finite image embedding");
    check_finite(f_txt, "non-finite text embedding");

    double dist = l2_distance(f_img, f_txt);
    if (grads) {
        grads->img.assign(f_img.size(), 0.0);
        grads->txt.assign(f_txt.size(), 0.0);
    }
    if (similar) {
        if (grads) add_distance_grad(f_img, f_txt, dist, 1.0, grads->img, grads->txt);
        return dist;
    }
    double raw = margin - dist;
    if (raw > 0.0 && grads)
        add_distance_grad(f_img, f_txt, dist, -1.0, grads->img, grads->txt);
    return raw > 0.0 ? raw : 0.0;
}

}  // namespace ukdh
