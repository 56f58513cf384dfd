#include <doctest.h>

#include <random>

#include "afdmjsg/channel.hpp"
#include "oracles.hpp"

using namespace afdm;

namespace {

CVec random_cvec(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    CVec v(n);
    for (int i = 0; i < n; ++i) v[i] = Complex(g(rng), g(rng));
    return v;
}

PathSpec random_path(const AfdmConfig& cfg, std::mt19937_64& rng, double nu_max = 1.5) {
    std::normal_distribution<double> g(0.0, std::sqrt(0.5));
    std::uniform_int_distribution<int> delay(0, cfg.n_cpp);
    std::uniform_real_distribution<double> nu(-nu_max, nu_max);
    return PathSpec::make(Complex(g(rng), g(rng)), delay(rng), nu(rng));
}

}  // namespace

TEST_CASE("doppler split into integer and fractional parts") {
    const PathSpec a = PathSpec::make(1.0, 0, 0.5);
    CHECK(a.alpha == 0);
    CHECK(a.beta == doctest::Approx(0.5));
    const PathSpec b = PathSpec::make(1.0, 0, -0.5);
    CHECK(b.alpha == -1);
    CHECK(b.beta == doctest::Approx(0.5));
    const PathSpec c = PathSpec::make(1.0, 0, 1.2);
    CHECK(c.alpha == 1);
    CHECK(c.beta == doctest::Approx(0.2));
    CHECK(c.doppler() == doctest::Approx(1.2));
}

TEST_CASE("sample_channel basics") {
    AfdmConfig cfg{32, 1.0 / 32, 1.0 / 32, 8};
    std::mt19937_64 rng(42);

    SUBCASE("zero doppler cap makes every path static") {
        const PathList paths = sample_paths(3, 0.0, 6, rng);
        for (const auto& p : paths) CHECK(p.doppler() == 0.0);
        CHECK(paths[0].delay == 0);  // first path pinned at zero delay
    }

    SUBCASE("fixed seed reproduces the draw") {
        std::mt19937_64 r1(9), r2(9);
        const PathList a = sample_paths(2, 0.5, 6, r1);
        const PathList b = sample_paths(2, 0.5, 6, r2);
        REQUIRE(a.size() == b.size());
        for (size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].gain == b[i].gain);
            CHECK(a[i].delay == b[i].delay);
            CHECK(a[i].doppler() == b[i].doppler());
        }
    }

    SUBCASE("mean total power is one") {
        double total = 0.0;
        const int draws = 10000;
        for (int i = 0; i < draws; ++i) {
            for (const auto& p : sample_paths(4, 0.3, 6, rng)) total += std::norm(p.gain);
        }
        CHECK(total / draws == doctest::Approx(1.0).epsilon(0.05));
    }

    SUBCASE("delay bound is enforced") {
        CHECK_THROWS(sample_channel(1, 1, 2, 0.0, cfg.n_cpp + 1, cfg, rng));
    }
}

TEST_CASE("apply_time_domain identity and cyclic-shift cases") {
    AfdmConfig cfg{16, 0.0, 0.0, 4};
    std::mt19937_64 rng(1);
    const CVec body = random_cvec(16, rng);
    const CVec s = add_cpp(body, cfg);

    SUBCASE("single unit path is the identity") {
        const PathList paths = {PathSpec::make(1.0, 0, 0.0)};
        const CVec out = apply_time_domain(s, paths, cfg, 0.0, rng);
        CHECK((out - body).cwiseAbs().maxCoeff() < 1e-14);
    }

    SUBCASE("delay-2 path with c1 = 0 is a cyclic shift") {
        const PathList paths = {PathSpec::make(1.0, 2, 0.0)};
        const CVec out = apply_time_domain(s, paths, cfg, 0.0, rng);
        for (int t = 0; t < 16; ++t) CHECK(std::abs(out[t] - body[((t - 2) % 16 + 16) % 16]) < 1e-13);
    }

    SUBCASE("rejects delays beyond the prefix") {
        const PathList paths = {PathSpec::make(1.0, 5, 0.0)};
        CHECK_THROWS(apply_time_domain(s, paths, cfg, 0.0, rng));
    }
}

TEST_CASE("apply_time_domain matches the dense matrix oracle") {
    AfdmConfig cfg{32, 1.0 / 32, 1.0 / 32, 8};
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 5; ++trial) {
        const PathList paths = {random_path(cfg, rng), random_path(cfg, rng)};
        const CVec body = random_cvec(32, rng);
        const CVec out = apply_time_domain(add_cpp(body, cfg), paths, cfg, 0.0, rng);
        Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(32, 32);
        for (const auto& p : paths) h += oracle::path_time_matrix(p, cfg);
        CHECK((out - h * body).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("loop shift arithmetic") {
    AfdmConfig cfg{64, 1.0 / 64, 1.0 / 64, 16};
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> delay(0, 16);
    std::uniform_real_distribution<double> nu(-2.0, 2.0);
    for (int i = 0; i < 100; ++i) {
        const PathSpec p = PathSpec::make(1.0, delay(rng), nu(rng));
        const int want = ((p.alpha + 2 * p.delay) % 64 + 64) % 64;  // 2*N*c1 = 2
        CHECK(loop_shift(p, cfg) == want);
    }
    AfdmConfig bad{64, 0.0101, 0.0, 16};
    CHECK_THROWS(loop_shift(PathSpec::make(1.0, 3, 0.0), bad));
}

TEST_CASE("effective entry closed form against the dense transform") {
    AfdmConfig cfg{16, 1.0 / 16, 1.0 / 16, 5};
    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 8; ++trial) {
        const PathSpec p = random_path(cfg, rng);
        const Eigen::MatrixXcd ref = oracle::effective_dense({p}, cfg) / p.gain;
        for (int n = 0; n < 16; ++n) {
            for (int m = 0; m < 16; ++m) {
                CHECK(std::abs(effective_entry(p, n, m, cfg) - ref(n, m)) < 1e-9);
            }
        }
    }
}

TEST_CASE("effective entry peak and singularity behavior") {
    AfdmConfig cfg{16, 1.0 / 16, 0.0, 5};
    std::mt19937_64 rng(9);

    SUBCASE("integer doppler: unit magnitude on the loop shift") {
        const PathSpec p = PathSpec::make(1.0, 3, 2.0);
        const int ind = loop_shift(p, cfg);
        for (int n = 0; n < 16; ++n) {
            CHECK(std::abs(effective_entry(p, n, (n + ind) % 16, cfg)) ==
                      doctest::Approx(1.0).epsilon(1e-12));
        }
    }

    SUBCASE("fractional doppler: magnitude is maximal at the loop shift") {
        for (int trial = 0; trial < 5; ++trial) {
            const PathSpec p = PathSpec::make(1.0, trial % 4, 1.0 + 0.09 * (trial + 1));
            const int ind = loop_shift(p, cfg);
            const int n = trial * 2;
            const double peak = std::abs(effective_entry(p, n, (n + ind) % 16, cfg));
            for (int m = 0; m < 16; ++m) {
                CHECK(std::abs(effective_entry(p, n, m, cfg)) <= peak + 1e-12);
            }
        }
    }
}

TEST_CASE("build_effective full band") {
    AfdmConfig cfg{16, 1.0 / 16, 1.0 / 16, 5};
    std::mt19937_64 rng(31);

    SUBCASE("row energy equals the path power") {
        const PathSpec p = random_path(cfg, rng);
        const BlockChannel blk = build_effective_block({p}, cfg, kFullBand);
        const Eigen::MatrixXcd h = blk.dense();
        for (int n = 0; n < 16; ++n) {
            CHECK(h.row(n).squaredNorm() == doctest::Approx(std::norm(p.gain)).epsilon(1e-9));
        }
    }

    SUBCASE("integer doppler with k_nu = 0 leaves one shift per path") {
        const PathList paths = {PathSpec::make(0.8, 1, 1.0), PathSpec::make(0.6, 3, -1.0)};
        const BlockChannel blk = build_effective_block(paths, cfg, 0);
        CHECK(blk.shifts.size() == 2);
        // distinct loop shifts: two clean cyclic diagonals even at full band
        const BlockChannel full = build_effective_block(paths, cfg, kFullBand);
        CHECK(full.shifts.size() == 2);
    }

    SUBCASE("band truncation energy is monotone in k_nu") {
        const PathSpec p = random_path(cfg, rng);
        double prev = 0.0;
        for (int k = 0; k <= 7; ++k) {
            const BlockChannel blk = build_effective_block({p}, cfg, k);
            const double energy = blk.dense().squaredNorm();
            CHECK(energy >= prev - 1e-12);
            prev = energy;
        }
        const double full = build_effective_block({p}, cfg, kFullBand).dense().squaredNorm();
        CHECK(prev == doctest::Approx(full).epsilon(1e-9));
    }
}

TEST_CASE("daft-domain equivalence of the whole chain") {
    AfdmConfig cfg{32, 1.0 / 32, 1.0 / 32, 8};
    std::mt19937_64 rng(55);
    for (int trial = 0; trial < 4; ++trial) {
        const PathList paths = {random_path(cfg, rng), random_path(cfg, rng),
                                random_path(cfg, rng)};
        const CVec x = random_cvec(32, rng);
        const CVec time = add_cpp(idaft(x, cfg), cfg);
        const CVec r = daft(apply_time_domain(time, paths, cfg, 0.0, rng), cfg);
        const BlockChannel blk = build_effective_block(paths, cfg, kFullBand);
        CHECK((r - blk.apply(x)).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("mimo stacking") {
    AfdmConfig cfg{8, 1.0 / 8, 1.0 / 8, 3};
    std::mt19937_64 rng(8);
    ChannelRealization ch;
    ch.n_r = 2;
    ch.n_t = 2;
    for (int i = 0; i < 4; ++i) ch.paths.push_back({random_path(cfg, rng), random_path(cfg, rng)});
    const EffectiveChannel h = build_effective(ch, cfg, kFullBand);

    SUBCASE("scenario 1 block product matches the per-antenna sum") {
        const EffectiveChannel s1 = stack_mimo(h, 1);
        const CVec x = random_cvec(16, rng);
        const CVec y = s1.apply(x);
        for (int r = 0; r < 2; ++r) {
            CVec want = CVec::Zero(8);
            for (int t = 0; t < 2; ++t) want += h.block(r, t).apply(x.segment(t * 8, 8));
            CHECK((y.segment(r * 8, 8) - want).cwiseAbs().maxCoeff() < 1e-12);
        }
        CHECK((s1.dense() - h.dense()).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("scenario 2 sums the row blocks") {
        const EffectiveChannel s2 = stack_mimo(h, 2);
        REQUIRE(s2.n_t == 1);
        const CVec x = random_cvec(8, rng);
        for (int r = 0; r < 2; ++r) {
            const CVec want = h.block(r, 0).apply(x) + h.block(r, 1).apply(x);
            CHECK((s2.block(r, 0).apply(x) - want).cwiseAbs().maxCoeff() < 1e-12);
        }
    }

    SUBCASE("identical blocks double under scenario 2") {
        ChannelRealization same;
        same.n_r = 1;
        same.n_t = 2;
        const PathList p = {random_path(cfg, rng)};
        same.paths = {p, p};
        const EffectiveChannel hs = stack_mimo(build_effective(same, cfg, kFullBand), 2);
        const Eigen::MatrixXcd single = build_effective_block(p, cfg, kFullBand).dense();
        CHECK((hs.block(0, 0).dense() - 2.0 * single).cwiseAbs().maxCoeff() < 1e-12);
    }

    SUBCASE("1x1 stacking is the identity") {
        ChannelRealization siso;
        siso.paths = {{random_path(cfg, rng)}};
        const EffectiveChannel hh = build_effective(siso, cfg, kFullBand);
        const EffectiveChannel s1 = stack_mimo(hh, 1);
        CHECK((s1.dense() - hh.dense()).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("channel realization json round trip") {
    AfdmConfig cfg{16, 1.0 / 16, 1.0 / 16, 4};
    std::mt19937_64 rng(21);
    const ChannelRealization ch = sample_channel(2, 1, 3, 0.7, 4, cfg, rng);
    const ChannelRealization back = realization_from_json(realization_to_json(ch));
    REQUIRE(back.paths.size() == ch.paths.size());
    for (size_t i = 0; i < ch.paths.size(); ++i) {
        for (size_t p = 0; p < ch.paths[i].size(); ++p) {
            CHECK(std::abs(back.paths[i][p].gain - ch.paths[i][p].gain) < 1e-15);
            CHECK(back.paths[i][p].delay == ch.paths[i][p].delay);
            CHECK(back.paths[i][p].doppler() == doctest::Approx(ch.paths[i][p].doppler()));
        }
    }
}
