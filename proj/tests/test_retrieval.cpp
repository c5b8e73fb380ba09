#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "ukdh/errors.hpp"
#include "ukdh/retrieval.hpp"

using namespace ukdh;

namespace {

HashCodeMatrix random_codes(int n, int k, std::mt19937_64& rng) {
    Matrix emb(n, k);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (double& v : emb.data) v = uni(rng);
    return quantize(emb);
}

int naive_hamming(const HashCodeMatrix& a, int i, const HashCodeMatrix& b, int j) {
    int d = 0;
    for (int t = 0; t < a.k; ++t)
        if (a.code(i, t) != b.code(j, t)) ++d;
    return d;
}

// independent brute-force AP re-implementation
double brute_force_ap(const std::vector<char>& rel) {
    int total_relevant = 0;
    for (char c : rel) total_relevant += c ? 1 : 0;
    if (total_relevant == 0) return 0.0;
    double sum = 0.0;
    for (size_t r = 0; r < rel.size(); ++r) {
        if (!rel[r]) continue;
        int hits = 0;
        for (size_t t = 0; t <= r; ++t) hits += rel[t] ? 1 : 0;
        sum += double(hits) / double(r + 1);
    }
    return sum / total_relevant;
}

}  // namespace

TEST_CASE("quantize tie rule and sign flip") {
    Matrix emb(1, 3);
    emb.at(0, 0) = 0.3;
    emb.at(0, 1) = -0.1;
    emb.at(0, 2) = 0.0;
    HashCodeMatrix c = quantize(emb);
    CHECK(c.code(0, 0) == +1);
    CHECK(c.code(0, 1) == -1);
    CHECK(c.code(0, 2) == +1);  // sgn(0) = +1

    HashCodeMatrix c2 = quantize(emb);
    CHECK(c.words == c2.words);

    Matrix flipped = emb;
    flipped.at(0, 2) = 0.5;  // avoid the 0 tie
    emb.at(0, 2) = 0.5;
    for (double& v : flipped.data) v = -v;
    HashCodeMatrix a = quantize(emb), b = quantize(flipped);
    for (int j = 0; j < 3; ++j) CHECK(a.code(0, j) == -b.code(0, j));
}

TEST_CASE("quantize totality fuzz") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 10000; ++trial) {
        Matrix emb(1, 19);
        for (double& v : emb.data) v = gauss(rng);
        HashCodeMatrix c = quantize(emb);
        for (int j = 0; j < 19; ++j) CHECK((c.code(0, j) == 1 || c.code(0, j) == -1));
        CHECK(hamming_distance(c, 0, c, 0) == 0);
        // unused high bits stay clear
        CHECK((c.row(0)[0] >> 19) == 0);
    }
}

TEST_CASE("hamming examples and oracle") {
    Matrix e(2, 4);
    double va[4] = {1, 1, -1, 1}, vb[4] = {1, -1, -1, -1};
    for (int j = 0; j < 4; ++j) {
        e.at(0, j) = va[j];
        e.at(1, j) = vb[j];
    }
    HashCodeMatrix c = quantize(e);
    CHECK(hamming_distance(c, 0, c, 1) == 2);

    std::mt19937_64 rng(6);
    HashCodeMatrix codes = random_codes(200, 97, rng);
    std::uniform_int_distribution<int> pick(0, 199);
    for (int t = 0; t < 10000; ++t) {
        int i = pick(rng), j = pick(rng);
        CHECK(hamming_distance(codes, i, codes, j) == naive_hamming(codes, i, codes, j));
    }
}

TEST_CASE("hamming is a metric") {
    std::mt19937_64 rng(7);
    HashCodeMatrix codes = random_codes(100, 33, rng);
    std::uniform_int_distribution<int> pick(0, 99);
    for (int t = 0; t < 2000; ++t) {
        int a = pick(rng), b = pick(rng), c = pick(rng);
        int dab = hamming_distance(codes, a, codes, b);
        int dba = hamming_distance(codes, b, codes, a);
        int dac = hamming_distance(codes, a, codes, c);
        int dcb = hamming_distance(codes, c, codes, b);
        CHECK(dab == dba);
        CHECK(dab <= dac + dcb);
        if (a == b) CHECK(dab == 0);
    }
}

TEST_CASE("rank_by_hamming") {
    std::mt19937_64 rng(8);
    HashCodeMatrix db = random_codes(150, 16, rng);

    SUBCASE("query code in db ranks first") {
        std::vector<int> order = rank_by_hamming(db, 37, db);
        CHECK(hamming_distance(db, 37, db, order[0]) == 0);
    }
    SUBCASE("all-equal db gives identity permutation") {
        Matrix e(5, 8);
        for (double& v : e.data) v = 1.0;
        HashCodeMatrix eq = quantize(e);
        std::vector<int> order = rank_by_hamming(eq, 0, eq);
        CHECK(order == std::vector<int>{0, 1, 2, 3, 4});
    }
    SUBCASE("agrees with full sort oracle") {
        for (int q = 0; q < 10; ++q) {
            std::vector<int> order = rank_by_hamming(db, q, db);
            std::vector<std::pair<int, int>> oracle;
            for (int i = 0; i < db.n; ++i)
                oracle.emplace_back(hamming_distance(db, q, db, i), i);
            std::sort(oracle.begin(), oracle.end());
            for (int i = 0; i < db.n; ++i) CHECK(order[i] == oracle[i].second);
        }
    }
}

TEST_CASE("average precision") {
    CHECK(average_precision({1, 0, 1}) == doctest::Approx(5.0 / 6.0));
    CHECK(average_precision({1, 1, 1}) == 1.0);
    CHECK(average_precision({0, 0}) == 0.0);
    CHECK(average_precision({1}) == 1.0);
    CHECK_THROWS_AS(average_precision({}), Error);

    std::mt19937_64 rng(9);
    std::bernoulli_distribution coin(0.3);
    std::uniform_int_distribution<int> len(1, 50);
    for (int t = 0; t < 1000; ++t) {
        std::vector<char> rel(len(rng));
        for (char& c : rel) c = coin(rng) ? 1 : 0;
        if (t == 0) std::fill(rel.begin(), rel.end(), 0);  // zero-relevant edge
        if (t == 1) std::fill(rel.begin(), rel.end(), 1);  // all-relevant edge
        CHECK(average_precision(rel) == doctest::Approx(brute_force_ap(rel)).epsilon(1e-12));
    }
}

TEST_CASE("perfect class-prototype embeddings give mAP 1 both directions") {
    // single-label instances whose embeddings in the shared space are exactly
    // their class prototype; ranking is then relevance-perfect by construction
    const int n = 90, n_classes = 3, k = 32;
    std::mt19937_64 rng(13);
    std::normal_distribution<double> gauss;
    Matrix protos(n_classes, k);
    for (double& v : protos.data) v = gauss(rng);
    for (int c = 0; c < n_classes; ++c) l2_normalize(protos.row_span(c));

    Matrix emb(n, k);
    LabelSet labels;
    labels.n_classes = n_classes;
    labels.bits.assign(n, std::vector<uint8_t>(1, 0));
    for (int i = 0; i < n; ++i) {
        int c = i % n_classes;
        labels.set_label(i, c);
        std::copy(protos.row(c), protos.row(c) + k, emb.row(i));
    }

    HashCodeMatrix codes = quantize(emb);
    // prototype codes must be pairwise distinct for the construction to hold
    REQUIRE(hamming_distance(codes, 0, codes, 1) > 0);
    REQUIRE(hamming_distance(codes, 0, codes, 2) > 0);
    REQUIRE(hamming_distance(codes, 1, codes, 2) > 0);

    SplitSpec split = make_split(n, 30, 1);
    for (int pass = 0; pass < 2; ++pass) {  // both directions are symmetric here
        double map_sum = 0.0;
        for (int q : split.query_indices) {
            std::vector<int> dist;
            std::vector<std::pair<int, int>> scored;
            for (size_t t = 0; t < split.retrieval_indices.size(); ++t)
                scored.emplace_back(
                    hamming_distance(codes, q, codes, split.retrieval_indices[t]), int(t));
            std::stable_sort(scored.begin(), scored.end(),
                             [](auto& a, auto& b) { return a.first < b.first; });
            std::vector<char> rel;
            for (auto& [d, t] : scored)
                rel.push_back(oracle_relevant(labels, q, split.retrieval_indices[t]) ? 1 : 0);
            map_sum += average_precision(rel);
        }
        CHECK(map_sum / split.query_indices.size() == doctest::Approx(1.0));
    }
}

TEST_CASE("random model mAP near class prior on balanced data") {
    auto r = generate_synthetic(300, 2, 16, 12, 0.05, 21);
    SplitSpec split = make_split(300, 60, 2);
    TwoPathwayModel m = init_model(16, 12, 32, 8, 1234);
    EvalReport rep = evaluate_cross_modal(m, r.dataset, r.labels, split,
                                          Direction::image_to_text, {10});
    // with 1-2 labels over 2 classes most pairs are relevant; the prior is
    // the mean relevance fraction of the database
    double prior = 0.0;
    for (int q : split.query_indices) {
        int rel = 0;
        for (int i : split.retrieval_indices) rel += oracle_relevant(r.labels, q, i) ? 1 : 0;
        prior += double(rel) / split.retrieval_indices.size();
    }
    prior /= split.query_indices.size();
    CHECK(rep.map == doctest::Approx(prior).epsilon(0.15));
}

TEST_CASE("evaluation determinism and report fields") {
    auto r = generate_synthetic(100, 4, 8, 6, 0.1, 31);
    SplitSpec split = make_split(100, 20, 3);
    TwoPathwayModel m = init_model(8, 6, 16, 8, 77);
    EvalReport a = evaluate_cross_modal(m, r.dataset, r.labels, split,
                                        Direction::text_to_image, {5, 10});
    EvalReport b = evaluate_cross_modal(m, r.dataset, r.labels, split,
                                        Direction::text_to_image, {5, 10});
    CHECK(a.map == b.map);
    CHECK(a.precision_at == b.precision_at);
    CHECK(a.map >= 0.0);
    CHECK(a.map <= 1.0);
    for (const auto& [k, p] : a.precision_at) {
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
    // P@|db| equals the overall relevance fraction, exactly
    EvalReport full = evaluate_cross_modal(m, r.dataset, r.labels, split,
                                           Direction::text_to_image,
                                           {int(split.retrieval_indices.size())});
    double frac = 0.0;
    for (int q : split.query_indices) {
        int rel = 0;
        for (int i : split.retrieval_indices) rel += oracle_relevant(r.labels, q, i) ? 1 : 0;
        frac += double(rel) / split.retrieval_indices.size();
    }
    frac /= split.query_indices.size();
    CHECK(full.precision_at.at(int(split.retrieval_indices.size())) ==
          doctest::Approx(frac).epsilon(1e-12));

    auto jp = (std::filesystem::temp_directory_path() / "ukdh_eval.json").string();
    auto cp = (std::filesystem::temp_directory_path() / "ukdh_curve.csv").string();
    save_eval_report(a, jp, cp);
    EvalReport back = load_eval_report(jp);
    CHECK(back.map == a.map);
    CHECK(back.precision_at == a.precision_at);
}
