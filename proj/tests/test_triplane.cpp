#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "tpg/rng.hpp"
#include "tpg/serial.hpp"
#include "tpg/triplane.hpp"

using namespace tpg;

namespace {

TriplaneField random_triplane(int n_feat, int res, uint64_t seed, float scale = 1.f) {
    TriplaneField T(n_feat, res, res);
    Rng rng(seed);
    for (auto& v : T.planes) v = rng.normalf() * scale;
    return T;
}

}  // namespace

TEST_SUITE("triplane") {

TEST_CASE("sample_feature on a zero field is zero") {
    TriplaneField T(4, 8, 8, 0.f);
    auto f = sample_feature(T, 0.3f, -0.2f, 0.7f);
    REQUIRE(f.size() == 12);
    for (float v : f) CHECK(v == 0.f);
}

TEST_CASE("sample_feature of a constant field returns the constant") {
    TriplaneField T(2, 8, 8, 2.5f);
    Rng rng(7);
    for (int i = 0; i < 20; ++i) {
        float x = static_cast<float>(rng.uniform(-1, 1));
        float y = static_cast<float>(rng.uniform(-1, 1));
        float z = static_cast<float>(rng.uniform(-1, 1));
        for (float v : sample_feature(T, x, y, z)) CHECK(v == doctest::Approx(2.5f).epsilon(1e-6));
    }
}

TEST_CASE("sample_feature rejects points outside the cube") {
    TriplaneField T(1, 4, 4, 0.f);
    CHECK_THROWS_AS(sample_feature(T, 1.2f, 0.f, 0.f), Error);
    CHECK_THROWS_AS(sample_feature(T, 0.f, -1.01f, 0.f), Error);
    CHECK_NOTHROW(sample_feature(T, 1.f, -1.f, 1.f));
}

TEST_CASE("single nonzero texel gives the bilinear weight product") {
    // one texel per plane, fractional query position, checked against the
    // independent 4-texel oracle
    int res = 8;
    TriplaneField T(1, res, res, 0.f);
    T.at(0, 3, 4) = 1.7f;  // xy plane
    T.at(1, 2, 5) = -0.9f; // xz plane
    T.at(2, 6, 1) = 0.4f;  // yz plane
    Rng rng(11);
    for (int it = 0; it < 10; ++it) {
        float x = static_cast<float>(rng.uniform(-0.95, 0.95));
        float y = static_cast<float>(rng.uniform(-0.95, 0.95));
        float z = static_cast<float>(rng.uniform(-0.95, 0.95));
        auto f = sample_feature(T, x, y, z);
        std::vector<double> p0(res * res, 0.0), p1(res * res, 0.0), p2(res * res, 0.0);
        p0[3 * res + 4] = 1.7;
        p1[2 * res + 5] = -0.9;
        p2[6 * res + 1] = 0.4;
        CHECK(f[0] == doctest::Approx(oracle::bilinear(p0, res, res, x, y)).epsilon(1e-5));
        CHECK(f[1] == doctest::Approx(oracle::bilinear(p1, res, res, x, z)).epsilon(1e-5));
        CHECK(f[2] == doctest::Approx(oracle::bilinear(p2, res, res, y, z)).epsilon(1e-5));
    }
}

TEST_CASE("sample_feature is exact at grid nodes and affine between them") {
    int res = 8;
    auto T = random_triplane(1, res, 123);
    // node position of texel (row=2, col=5) on the xy plane
    float ax = (5 + 0.5f) / res * 2 - 1;
    float by = (2 + 0.5f) / res * 2 - 1;
    auto f = sample_feature(T, ax, by, 0.123f);
    CHECK(f[0] == doctest::Approx(T.at(0, 2, 5)).epsilon(1e-6));

    // affine along x between two nodes: midpoint equals the average of ends
    float ax2 = (6 + 0.5f) / res * 2 - 1;
    auto fa = sample_feature(T, ax, by, 0.f);
    auto fb = sample_feature(T, ax2, by, 0.f);
    auto fm = sample_feature(T, 0.5f * (ax + ax2), by, 0.f);
    CHECK(fm[0] == doctest::Approx(0.5f * (fa[0] + fb[0])).epsilon(1e-5));
}

TEST_CASE("sample_feature gradients match finite differences") {
    int res = 8;
    auto T = random_triplane(2, res, 42);
    float x = 0.31f, y = -0.44f, z = 0.12f;
    Rng rng(5);
    std::vector<float> dfeat(6);
    for (auto& v : dfeat) v = rng.normalf();

    auto loss = [&](const TriplaneField& Tq) {
        auto f = sample_feature(Tq, x, y, z);
        double s = 0;
        for (size_t i = 0; i < f.size(); ++i) s += f[i] * dfeat[i];
        return s;
    };

    std::vector<float> dplanes(T.planes.size(), 0.f);
    auto taps = triplane_taps(T.h, T.w, x, y, z);
    sample_feature_backward(taps, T.n_feat, T.h, T.w, dfeat.data(), dplanes.data());

    Rng pick(99);
    for (int it = 0; it < 30; ++it) {
        size_t idx = pick.below(T.planes.size());
        TriplaneField Tp = T, Tm = T;
        float h = 1e-3f;
        Tp.planes[idx] += h;
        Tm.planes[idx] -= h;
        double fd = (loss(Tp) - loss(Tm)) / (2.0 * h);
        if (std::fabs(fd) < 1e-9) {
            CHECK(std::fabs(dplanes[idx]) < 1e-6);
        } else {
            CHECK(dplanes[idx] == doctest::Approx(fd).epsilon(1e-3));
        }
    }

    // position gradient
    auto loss_at = [&](float xx, float yy, float zz) {
        auto f = sample_feature(T, xx, yy, zz);
        double s = 0;
        for (size_t i = 0; i < f.size(); ++i) s += f[i] * dfeat[i];
        return s;
    };
    float dpos[3] = {0, 0, 0};
    sample_feature_pos_grad(T, taps, dfeat.data(), dpos);
    float h = 1e-3f;
    double fdx = (loss_at(x + h, y, z) - loss_at(x - h, y, z)) / (2.0 * h);
    CHECK(dpos[0] == doctest::Approx(fdx).epsilon(2e-3));
}

TEST_CASE("decode with a zero-initialized final layer") {
    Rng rng(3);
    auto dec = FieldDecoder::init(6, 16, 2, rng);
    std::fill(dec.weights.back().begin(), dec.weights.back().end(), 0.f);
    std::fill(dec.biases.back().begin(), dec.biases.back().end(), 0.f);
    std::vector<float> f(6);
    for (auto& v : f) v = rng.normalf();
    auto out = decode(dec, f);
    CHECK(out.d == 0.f);
    for (int c = 0; c < 3; ++c) CHECK(out.rgb[c] == doctest::Approx(0.5f));
}

TEST_CASE("decode is deterministic") {
    Rng rng(17);
    auto dec = FieldDecoder::init(9, 24, 2, rng);
    std::vector<float> f(9);
    for (auto& v : f) v = rng.normalf();
    auto a = decode(dec, f);
    auto b = decode(dec, f);
    CHECK(a.d == b.d);
    for (int c = 0; c < 3; ++c) CHECK(a.rgb[c] == b.rgb[c]);
}

TEST_CASE("decode rejects dimension mismatch") {
    Rng rng(1);
    auto dec = FieldDecoder::init(6, 8, 1, rng);
    std::vector<float> f(5, 0.f);
    CHECK_THROWS_AS(decode(dec, f), Error);
}

TEST_CASE("decode jacobian w.r.t. the feature matches finite differences") {
    Rng rng(8);
    int in = 6;
    auto dec = FieldDecoder::init(in, 16, 2, rng);
    std::vector<float> f(in);
    for (auto& v : f) v = rng.normalf();

    // full jacobian via unit upstream vectors
    for (int o = 0; o < 4; ++o) {
        DecodeCtx ctx;
        float out[4];
        decode_batch(dec, f.data(), 1, out, &ctx);
        std::vector<std::vector<float>> dw, db;
        for (int l = 0; l <= dec.depth; ++l) {
            dw.emplace_back(dec.weights[l].size(), 0.f);
            db.emplace_back(dec.biases[l].size(), 0.f);
        }
        std::vector<float> dout(4, 0.f), dfeat(in, 0.f);
        dout[o] = 1.f;
        decode_backward(dec, ctx, dout.data(), dw, db, dfeat.data());
        for (int i = 0; i < in; ++i) {
            auto fd = oracle::central_diff(
                [&](double v) {
                    auto fq = f;
                    fq[i] = static_cast<float>(v);
                    float oq[4];
                    decode_batch(dec, fq.data(), 1, oq, nullptr);
                    return static_cast<double>(oq[o]);
                },
                f[i], 1e-3);
            if (std::fabs(fd) < 1e-7) {
                CHECK(std::fabs(dfeat[i]) < 1e-4);
            } else {
                CHECK(dfeat[i] == doctest::Approx(fd).epsilon(1e-3));
            }
        }
    }
}

TEST_CASE("compute_stats trivial cases") {
    SUBCASE("all zeros floors the std") {
        std::vector<TriplaneField> ds = {TriplaneField(1, 4, 4, 0.f)};
        auto st = compute_stats(ds);
        for (double m : st.mean) CHECK(m == 0.0);
        for (double s : st.stdev) CHECK(s == 1e-6);
    }
    SUBCASE("symmetric +-1 channel has mean 0 and std 1") {
        TriplaneField T(1, 4, 4, 0.f);
        for (size_t i = 0; i < T.plane_size(); ++i) T.planes[i] = i % 2 ? 1.f : -1.f;
        for (size_t i = T.plane_size(); i < T.planes.size(); ++i) T.planes[i] = 0.f;
        auto st = compute_stats({T});
        CHECK(st.mean[0] == doctest::Approx(0.0));
        CHECK(st.stdev[0] == doctest::Approx(1.0));
    }
    SUBCASE("empty dataset rejected") { CHECK_THROWS_AS(compute_stats({}), Error); }
}

TEST_CASE("compute_stats matches the two-pass oracle") {
    auto A = random_triplane(2, 6, 21, 1.3f);
    auto B = random_triplane(2, 6, 22, 0.7f);
    auto st = compute_stats({A, B});
    for (int c = 0; c < 6; ++c) {
        std::vector<double> vals;
        for (const auto* T : {&A, &B})
            for (size_t i = 0; i < T->plane_size(); ++i)
                vals.push_back(T->planes[c * T->plane_size() + i]);
        auto ref = oracle::two_pass_stats(vals);
        CHECK(st.mean[c] == doctest::Approx(ref.mean).epsilon(1e-10));
        CHECK(st.stdev[c] == doctest::Approx(ref.stdev).epsilon(1e-10));
    }
}

TEST_CASE("compute_stats is permutation invariant") {
    auto A = random_triplane(1, 8, 31);
    auto B = random_triplane(1, 8, 32);
    auto C = random_triplane(1, 8, 33);
    auto s1 = compute_stats({A, B, C});
    auto s2 = compute_stats({C, A, B});
    for (int c = 0; c < 3; ++c) {
        CHECK(s1.mean[c] == doctest::Approx(s2.mean[c]).epsilon(1e-12));
        CHECK(s1.stdev[c] == doctest::Approx(s2.stdev[c]).epsilon(1e-12));
    }
}

TEST_CASE("normalize maps the channel mean to zero and clamps at 16 sigma") {
    TriplaneStats st;
    st.mean = {2.0, 0.0, 0.0};
    st.stdev = {1.0, 1.0, 1.0};
    TriplaneField T(1, 1, 1, 0.f);
    T.planes = {2.f, 32.f, -40.f};
    auto Tn = normalize_triplane(T, st);
    CHECK(Tn.planes[0] == 0.f);                       // entry equal to the mean
    CHECK(Tn.planes[1] == 1.f);                       // 32/16 = 2 -> clamped
    CHECK(Tn.planes[2] == -1.f);                      // clamped below
}

TEST_CASE("normalize output lies in [-1,1] and round-trips on the linear region") {
    auto T = random_triplane(2, 8, 77, 3.f);
    auto st = compute_stats({T});
    auto Tn = normalize_triplane(T, st);
    for (float v : Tn.planes) {
        CHECK(v <= 1.f);
        CHECK(v >= -1.f);
    }
    auto Tr = denormalize_triplane(Tn, st);
    for (size_t i = 0; i < T.planes.size(); ++i) {
        double z = (static_cast<double>(T.planes[i]) - st.mean[i / T.plane_size()]) /
                   st.stdev[i / T.plane_size()];
        if (std::fabs(z) <= 16.0) {
            double scale = std::fabs(st.mean[i / T.plane_size()]) +
                           16.0 * st.stdev[i / T.plane_size()];
            CHECK(std::fabs(Tr.planes[i] - T.planes[i]) <= 4e-7 * scale);
        }
    }
}

TEST_CASE("normalize rejects channel mismatch") {
    TriplaneStats st;
    st.mean = {0, 0, 0};
    st.stdev = {1, 1, 1};
    TriplaneField T(2, 4, 4, 0.f);
    CHECK_THROWS_AS(normalize_triplane(T, st), Error);
}

TEST_CASE("triplane file round-trip and error paths") {
    auto T = random_triplane(3, 8, 55);
    std::string path = "test_triplane_io.trip";
    save_triplane(path, T);
    auto L = load_triplane(path);
    CHECK(L.n_feat == T.n_feat);
    CHECK(L.h == T.h);
    CHECK(L.planes == T.planes);

    auto bytes = read_file(path);
    bytes.resize(bytes.size() / 2);
    write_file_atomic("test_triplane_trunc.trip", bytes.data(), bytes.size());
    CHECK_THROWS_AS(load_triplane("test_triplane_trunc.trip"), Error);
    write_file_atomic("test_triplane_bad.trip", "nope", 4);
    CHECK_THROWS_AS(load_triplane("test_triplane_bad.trip"), Error);
}

TEST_CASE("stats sidecar round-trip") {
    auto T = random_triplane(2, 8, 88);
    auto st = compute_stats({T});
    save_stats("test_stats.json", st);
    auto L = load_stats("test_stats.json");
    CHECK(L.mean == st.mean);
    CHECK(L.stdev == st.stdev);
    CHECK(L.scale == st.scale);
}

}  // TEST_SUITE
