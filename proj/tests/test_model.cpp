#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <functional>
#include <fstream>
#include <random>

#include "ukdh/errors.hpp"
#include "ukdh/losses.hpp"
#include "ukdh/model.hpp"

using namespace ukdh;

namespace {

std::vector<double> random_unit(int dim, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> v(dim);
    for (double& x : v) x = gauss(rng);
    l2_normalize(v);
    return v;
}

// central finite differences against analytic grads, worst relative error
double fd_worst_error(const std::function<double(const std::vector<std::vector<double>>&)>& loss,
                      std::vector<std::vector<double>> inputs,
                      const std::vector<std::vector<double>>& analytic) {
    const double step = 1e-5;
    double worst = 0.0;
    for (size_t v = 0; v < inputs.size(); ++v) {
        for (size_t i = 0; i < inputs[v].size(); ++i) {
            double saved = inputs[v][i];
            inputs[v][i] = saved + step;
            double up = loss(inputs);
            inputs[v][i] = saved - step;
            double dn = loss(inputs);
            inputs[v][i] = saved;
            double fd = (up - dn) / (2 * step);
            double denom = std::max({std::abs(fd), std::abs(analytic[v][i]), 1.0});
            worst = std::max(worst, std::abs(fd - analytic[v][i]) / denom);
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("init determinism and shapes") {
    TwoPathwayModel a = init_model(64, 32, 32, 16, 42);
    TwoPathwayModel b = init_model(64, 32, 32, 16, 42);
    CHECK(a.image_pathway.l1.w.data == b.image_pathway.l1.w.data);
    CHECK(a.text_pathway.l2.w.data == b.text_pathway.l2.w.data);

    // image pathway parameter count: 64*32+32 + 32*16+16 = 2608
    size_t count = a.image_pathway.l1.w.data.size() + a.image_pathway.l1.b.size() +
                   a.image_pathway.l2.w.data.size() + a.image_pathway.l2.b.size();
    CHECK(count == 2608);

    TwoPathwayModel c = init_model(64, 32, 32, 16, 43);
    CHECK(a.image_pathway.l1.w.data != c.image_pathway.l1.w.data);
}

TEST_CASE("l2_normalize") {
    std::vector<double> v{3.0, 4.0};
    CHECK(l2_normalize(v));
    CHECK(v[0] == doctest::Approx(0.6));
    CHECK(v[1] == doctest::Approx(0.8));

    CHECK(l2_normalize(v));  // idempotent on unit vectors
    CHECK(v[0] == doctest::Approx(0.6));

    std::vector<double> z{0.0, 0.0, 0.0};
    CHECK_FALSE(l2_normalize(z));
    CHECK(z == std::vector<double>{0.0, 0.0, 0.0});

    std::vector<double> bad{1.0, std::nan("")};
    CHECK_THROWS_AS(l2_normalize(bad), Error);
}

TEST_CASE("forward outputs unit rows and is pure") {
    TwoPathwayModel m = init_model(8, 6, 12, 4, 42);
    std::mt19937_64 rng(1);
    Matrix x(5, 8);
    std::normal_distribution<double> gauss;
    for (double& v : x.data) v = gauss(rng);

    Matrix out1 = forward(m, x, Modality::image);
    Matrix out2 = forward(m, x, Modality::image);
    CHECK(out1.data == out2.data);
    for (int i = 0; i < 5; ++i)
        CHECK(l2_norm(out1.row_span(i)) == doctest::Approx(1.0).epsilon(1e-6));

    Matrix wrong(5, 6);
    CHECK_THROWS_AS(forward(m, wrong, Modality::image), Error);
}

TEST_CASE("zero model produces zero sentinels") {
    TwoPathwayModel m = init_model(4, 4, 4, 3, 0);
    for (auto* p : {&m.image_pathway, &m.text_pathway}) {
        std::fill(p->l1.w.data.begin(), p->l1.w.data.end(), 0.0);
        std::fill(p->l2.w.data.begin(), p->l2.w.data.end(), 0.0);
    }
    Matrix x(2, 4);
    x.at(0, 0) = 1.0;
    ForwardCache cache;
    Matrix out = forward(m, x, Modality::image, &cache);
    for (double v : out.data) CHECK(v == 0.0);
    CHECK(cache.degenerate == std::vector<uint8_t>{1, 1});
}

TEST_CASE("triplet loss values") {
    std::mt19937_64 rng(2);
    auto a = random_unit(8, rng);
    std::vector<double> n(a);
    for (double& v : n) v = -v;  // antipodal, distance 2

    SUBCASE("inactive hinge") {
        TripletGrads g;
        double loss = triplet_loss(a, a, n, 0.5, &g);
        CHECK(loss == 0.0);
        for (double v : g.anchor) CHECK(v == 0.0);
    }
    SUBCASE("anchor equals negative") {
        // p orthogonal to a: distance sqrt(2)
        std::vector<double> p(8, 0.0);
        // Gram-Schmidt a random vector against a
        auto r = random_unit(8, rng);
        double d = dot(std::span<const double>(r), std::span<const double>(a));
        for (int i = 0; i < 8; ++i) p[i] = r[i] - d * a[i];
        l2_normalize(p);
        double loss = triplet_loss(a, p, a, 0.5);
        CHECK(loss == doctest::Approx(std::sqrt(2.0) + 0.5));
    }
}

TEST_CASE("contrastive loss values") {
    std::vector<double> e1{1.0, 0.0, 0.0};
    std::vector<double> e2{0.0, 1.0, 0.0};
    CHECK(pairwise_contrastive_loss(e1, e1, true, 0.5) == 0.0);
    CHECK(pairwise_contrastive_loss(e1, e2, true, 0.5) == doctest::Approx(std::sqrt(2.0)));
    CHECK(pairwise_contrastive_loss(e1, e2, false, 0.5) == 0.0);
    CHECK(pairwise_contrastive_loss(e1, e1, false, 0.5) == doctest::Approx(0.5));
}

TEST_CASE("triplet gradient matches finite differences") {
    std::mt19937_64 rng(3);
    int checked = 0;
    while (checked < 100) {
        auto a = random_unit(6, rng);
        auto p = random_unit(6, rng);
        auto n = random_unit(6, rng);
        double margin = 0.5;
        double d_ap = l2_distance(std::span<const double>(a), std::span<const double>(p));
        double d_an = l2_distance(std::span<const double>(a), std::span<const double>(n));
        double raw = d_ap - d_an + margin;
        // keep away from the hinge kink and coincident points
        if (raw < 1e-3 || d_ap < 1e-3 || d_an < 1e-3) continue;
        ++checked;

        TripletGrads g;
        triplet_loss(a, p, n, margin, &g);
        double err = fd_worst_error(
            [&](const std::vector<std::vector<double>>& in) {
                return triplet_loss(in[0], in[1], in[2], margin);
            },
            {a, p, n}, {g.anchor, g.positive, g.negative});
        CHECK(err < 1e-4);
    }
}

TEST_CASE("contrastive gradient matches finite differences") {
    std::mt19937_64 rng(4);
    for (bool similar : {true, false}) {
        int checked = 0;
        while (checked < 100) {
            auto fi = random_unit(6, rng);
            auto ft = random_unit(6, rng);
            double margin = 1.0;
            double dist = l2_distance(std::span<const double>(fi), std::span<const double>(ft));
            if (dist < 1e-3) continue;
            if (!similar && std::abs(margin - dist) < 1e-3) continue;
            ++checked;

            PairGrads g;
            pairwise_contrastive_loss(fi, ft, similar, margin, &g);
            double err = fd_worst_error(
                [&](const std::vector<std::vector<double>>& in) {
                    return pairwise_contrastive_loss(in[0], in[1], similar, margin);
                },
                {fi, ft}, {g.img, g.txt});
            CHECK(err < 1e-4);
        }
    }
}

TEST_CASE("sgd step") {
    TwoPathwayModel m = init_model(2, 2, 2, 2, 0);
    Pathway& p = m.image_pathway;
    std::fill(p.l1.w.data.begin(), p.l1.w.data.end(), 1.0);
    PathwayGrads g = zero_grads(p);

    SUBCASE("weight decay only") {
        sgd_step(p, g, 0.1, 0.01);
        CHECK(p.l1.w.data[0] == doctest::Approx(0.999));
    }
    SUBCASE("identity when g=0 and wd=0") {
        auto before = p.l1.w.data;
        sgd_step(p, g, 0.1, 0.0);
        CHECK(p.l1.w.data == before);
    }
    SUBCASE("shape mismatch") {
        g.dw1 = Matrix(3, 3);
        CHECK_THROWS_AS(sgd_step(p, g, 0.1, 0.0), Error);
    }
}

TEST_CASE("contrastive training smoke: loss non-increasing on a similar pair") {
    TwoPathwayModel m = init_model(4, 4, 8, 4, 7);
    Matrix xi(1, 4), xt(1, 4);
    xi.at(0, 0) = 1.0;
    xi.at(0, 2) = -0.5;
    xt.at(0, 1) = 1.0;
    xt.at(0, 3) = 0.25;

    double prev = 1e300;
    for (int step = 0; step < 10; ++step) {
        ForwardCache ci, ct;
        Matrix fi = forward(m, xi, Modality::image, &ci);
        Matrix ft = forward(m, xt, Modality::text, &ct);
        PairGrads pg;
        double loss = pairwise_contrastive_loss(fi.row_span(0), ft.row_span(0), true, 0.5, &pg);
        CHECK(loss <= prev + 1e-12);
        prev = loss;

        Matrix gi(1, 4), gt(1, 4);
        for (int j = 0; j < 4; ++j) {
            gi.at(0, j) = pg.img[j];
            gt.at(0, j) = pg.txt[j];
        }
        PathwayGrads grads_i = zero_grads(m.image_pathway);
        PathwayGrads grads_t = zero_grads(m.text_pathway);
        accumulate_backward(m, Modality::image, ci, gi, grads_i);
        accumulate_backward(m, Modality::text, ct, gt, grads_t);
        sgd_step(m.image_pathway, grads_i, 0.01, 0.0);
        sgd_step(m.text_pathway, grads_t, 0.01, 0.0);
    }
}

TEST_CASE("ukdm checkpoint round trip") {
    TwoPathwayModel m = init_model(8, 6, 12, 4, 99);
    auto p1 = (std::filesystem::temp_directory_path() / "ukdh_m1.ukdm").string();
    auto p2 = (std::filesystem::temp_directory_path() / "ukdh_m2.ukdm").string();
    save_model(m, p1);
    TwoPathwayModel back = load_model(p1);
    CHECK(back.d_image == 8);
    CHECK(back.k == 4);
    save_model(back, p2);

    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    std::string b1{std::istreambuf_iterator<char>(f1), std::istreambuf_iterator<char>()};
    std::string b2{std::istreambuf_iterator<char>(f2), std::istreambuf_iterator<char>()};
    CHECK(b1 == b2);
}
