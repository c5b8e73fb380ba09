#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "ukdh/dataset.hpp"
#include "ukdh/errors.hpp"

using namespace ukdh;

namespace {

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::string read_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

PairedDataset random_dataset(int n, int di, int dt, uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> uni(-1.0f, 1.0f);
    PairedDataset ds;
    ds.image_features = Matrix(n, di);
    ds.text_features = Matrix(n, dt);
    for (double& v : ds.image_features.data) v = uni(rng);
    for (double& v : ds.text_features.data) v = uni(rng);
    return ds;
}

}  // namespace

TEST_CASE("ukdf header echo") {
    PairedDataset ds = random_dataset(3, 4, 2, 1);
    std::string p = temp_path("ukdh_echo.ukdf");
    save_features(ds, p);
    PairedDataset back = load_features(p);
    CHECK(back.n() == 3);
    CHECK(back.d_image() == 4);
    CHECK(back.d_text() == 2);
}

TEST_CASE("ukdf round trip is byte identical") {
    PairedDataset ds = random_dataset(100, 8, 6, 42);
    std::string p1 = temp_path("ukdh_rt1.ukdf");
    std::string p2 = temp_path("ukdh_rt2.ukdf");
    save_features(ds, p1);
    save_features(load_features(p1), p2);
    CHECK(read_bytes(p1) == read_bytes(p2));

    PairedDataset back = load_features(p1);
    CHECK(back.image_features.data == ds.image_features.data);
    CHECK(back.text_features.data == ds.text_features.data);
}

TEST_CASE("ukdf error paths") {
    std::string p = temp_path("ukdh_err.ukdf");
    save_features(random_dataset(3, 4, 2, 1), p);

    SUBCASE("truncated payload") {
        std::string bytes = read_bytes(p);
        std::ofstream os(p, std::ios::binary);
        os.write(bytes.data(), std::streamsize(bytes.size() - 9));  // drop part of a row
        os.close();
        try {
            load_features(p);
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::truncated_payload);
        }
    }
    SUBCASE("bad magic") {
        std::ofstream os(p, std::ios::binary);
        os << "NOPE1234";
        os.close();
        try {
            load_features(p);
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::bad_magic);
        }
    }
    SUBCASE("missing file") {
        try {
            load_features(temp_path("ukdh_missing.ukdf"));
            FAIL("expected error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::io_failure);
        }
    }
}

TEST_CASE("ukdl round trip") {
    LabelSet ls;
    ls.n_classes = 10;
    ls.bits.assign(5, std::vector<uint8_t>(2, 0));
    ls.set_label(0, 1);
    ls.set_label(0, 9);
    ls.set_label(3, 4);
    ls.set_label(4, 0);
    std::string p = temp_path("ukdh_rt.ukdl");
    save_labels(ls, p);
    LabelSet back = load_labels(p);
    CHECK(back.n_classes == 10);
    CHECK(back.bits == ls.bits);
}

TEST_CASE("synthetic generator determinism") {
    auto a = generate_synthetic(50, 4, 8, 6, 0.1, 7);
    auto b = generate_synthetic(50, 4, 8, 6, 0.1, 7);
    CHECK(a.dataset.image_features.data == b.dataset.image_features.data);
    CHECK(a.dataset.text_features.data == b.dataset.text_features.data);
    CHECK(a.labels.bits == b.labels.bits);

    auto c = generate_synthetic(50, 4, 8, 6, 0.1, 8);
    CHECK(a.dataset.image_features.data != c.dataset.image_features.data);
}

TEST_CASE("sigma zero single-label instances share features within class") {
    auto r = generate_synthetic(200, 4, 8, 6, 0.0, 3);
    for (int i = 0; i < 200; ++i) {
        for (int j = i + 1; j < 200; ++j) {
            int ci = -1, cj = -1, ni = 0, nj = 0;
            for (int c = 0; c < 4; ++c) {
                if (r.labels.has_label(i, c)) { ci = c; ++ni; }
                if (r.labels.has_label(j, c)) { cj = c; ++nj; }
            }
            if (ni != 1 || nj != 1) continue;
            bool same_feat = std::equal(r.dataset.image_features.row(i),
                                        r.dataset.image_features.row(i) + 8,
                                        r.dataset.image_features.row(j));
            CHECK(same_feat == (ci == cj));
            CHECK(oracle_relevant(r.labels, i, j) == (ci == cj));
        }
    }
}

TEST_CASE("synthetic 1-nn image accuracy above 0.9 at sigma 0.1") {
    auto r = generate_synthetic(200, 4, 8, 6, 0.1, 11);
    int correct = 0;
    for (int i = 0; i < 200; ++i) {
        // brute-force 1-NN in raw image space
        double best = 1e300;
        int arg = -1;
        for (int j = 0; j < 200; ++j) {
            if (j == i) continue;
            double d = l2_distance(r.dataset.image_features.row_span(i),
                                   r.dataset.image_features.row_span(j));
            if (d < best) {
                best = d;
                arg = j;
            }
        }
        if (oracle_relevant(r.labels, i, arg)) ++correct;
    }
    CHECK(double(correct) / 200.0 > 0.9);
}

TEST_CASE("oracle relevance") {
    LabelSet ls;
    ls.n_classes = 4;
    ls.bits.assign(3, std::vector<uint8_t>(1, 0));
    ls.set_label(0, 1);
    ls.set_label(0, 3);
    ls.set_label(1, 3);
    ls.set_label(2, 2);
    CHECK(oracle_relevant(ls, 0, 1));
    CHECK_FALSE(oracle_relevant(ls, 0, 2));
    CHECK(oracle_relevant(ls, 1, 1));  // reflexive
    CHECK_THROWS_AS(oracle_relevant(ls, 0, 5), Error);
}

TEST_CASE("generator argument validation") {
    CHECK_THROWS_AS(generate_synthetic(10, 1, 8, 6, 0.1, 0), Error);
    CHECK_THROWS_AS(generate_synthetic(10, 4, 1, 6, 0.1, 0), Error);
    CHECK_THROWS_AS(generate_synthetic(0, 4, 8, 6, 0.1, 0), Error);
}

TEST_CASE("split is disjoint and seeded") {
    SplitSpec s = make_split(100, 20, 5);
    CHECK(s.query_indices.size() == 20);
    CHECK(s.retrieval_indices.size() == 80);
    for (int q : s.query_indices)
        CHECK(std::find(s.retrieval_indices.begin(), s.retrieval_indices.end(), q) ==
              s.retrieval_indices.end());
    SplitSpec s2 = make_split(100, 20, 5);
    CHECK(s.query_indices == s2.query_indices);
}
