#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <vector>

#include "graybox/datagen.hpp"
#include "graybox/errors.hpp"
#include "graybox/rng.hpp"

using namespace graybox;

namespace {

BioreactorConfig desk_cfg(int n_steps = 64) {
    BioreactorConfig cfg;
    cfg.n_steps = n_steps;
    return cfg;
}

GenConfig tiny_gen(int per_split) {
    GenConfig gen;
    gen.n_train = per_split;
    gen.n_validation = per_split;
    gen.n_test = per_split;
    return gen;
}

bool same_sample(const SampleWithTruth& a, const SampleWithTruth& b) {
    if (a.sample.x0.x != b.sample.x0.x || a.sample.x0.s != b.sample.x0.s ||
        a.sample.x0.v != b.sample.x0.v) {
        return false;
    }
    if (a.sample.s_in != b.sample.s_in) return false;
    if (a.truth.states.size() != b.truth.states.size()) return false;
    for (std::size_t t = 0; t < a.truth.states.size(); ++t) {
        if (a.truth.states[t].x != b.truth.states[t].x ||
            a.truth.states[t].s != b.truth.states[t].s ||
            a.truth.states[t].v != b.truth.states[t].v) {
            return false;
        }
    }
    return true;
}

double sample_variance(const std::vector<double>& xs) {
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return var / static_cast<double>(xs.size() - 1);
}

}  // namespace

TEST_CASE("initial state: degenerate variances collapse to the policy floor") {
    GenConfig gen;
    gen.x0_variance = 0.0;
    gen.s0_variance = 0.0;
    gen.v0_variance = 0.0;
    gen.v0_mean = 0.0;
    gen.v0_floor = 1.0;
    Rng rng(1);
    for (int i = 0; i < 10; ++i) {
        const State st = sample_initial_state(rng, gen);
        CHECK(st.x == 0.0);
        CHECK(st.s == 0.0);
        CHECK(st.v == 1.0);
    }
}

TEST_CASE("initial state: same seed gives identical draws") {
    GenConfig gen;
    Rng a(123), b(123);
    for (int i = 0; i < 5; ++i) {
        const State x = sample_initial_state(a, gen);
        const State y = sample_initial_state(b, gen);
        CHECK(x.x == y.x);
        CHECK(x.s == y.s);
        CHECK(x.v == y.v);
    }
}

TEST_CASE("initial state: pre-policy sample variances match the configuration") {
    GenConfig gen;
    Rng rng(2026);
    std::vector<double> xs, ss, vs;
    for (int i = 0; i < 10000; ++i) {
        const State st = draw_initial_state_raw(rng, gen);
        xs.push_back(st.x);
        ss.push_back(st.s);
        vs.push_back(st.v);
    }
    CHECK(sample_variance(xs) == doctest::Approx(0.1).epsilon(0.05));
    CHECK(sample_variance(ss) == doctest::Approx(0.01).epsilon(0.05));
    CHECK(sample_variance(vs) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("feed series: zero increment variance gives a constant series") {
    GenConfig gen;
    gen.sin_step_variance = 0.0;
    Rng rng(9);
    const std::vector<double> series = sample_sin_series(rng, 50, gen);
    for (double v : series) CHECK(v == series[0]);
}

TEST_CASE("feed series: same seed gives identical series") {
    GenConfig gen;
    Rng a(4), b(4);
    CHECK(sample_sin_series(a, 100, gen) == sample_sin_series(b, 100, gen));
}

TEST_CASE("feed series: terminal variance accumulates like a random walk") {
    GenConfig gen;
    gen.reflect_sin = false;  // the pre-policy walk
    std::vector<double> drifts;
    for (int i = 0; i < 10000; ++i) {
        Rng rng(derive_seed(555, {static_cast<std::uint64_t>(i)}));
        const std::vector<double> series = sample_sin_series(rng, 100, gen);
        drifts.push_back(series[99] - series[0]);
    }
    CHECK(sample_variance(drifts) == doctest::Approx(99 * 0.01).epsilon(0.05));
}

TEST_CASE("corpus: tiny corpus is deterministic and distinct") {
    const BioreactorConfig cfg = desk_cfg();
    const GenConfig gen = tiny_gen(2);
    const Corpus a = generate_corpus(7, cfg, gen);
    const Corpus b = generate_corpus(7, cfg, gen);

    REQUIRE(a.train.size() == 2);
    REQUIRE(a.validation.size() == 2);
    REQUIRE(a.test.size() == 2);

    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(same_sample(a.train[i], b.train[i]));
        CHECK(same_sample(a.validation[i], b.validation[i]));
        CHECK(same_sample(a.test[i], b.test[i]));
    }

    // All six samples distinct.
    const std::vector<const SampleWithTruth*> all = {&a.train[0], &a.train[1],
                                                     &a.validation[0], &a.validation[1],
                                                     &a.test[0], &a.test[1]};
    for (std::size_t i = 0; i < all.size(); ++i) {
        for (std::size_t j = i + 1; j < all.size(); ++j) {
            CHECK(!same_sample(*all[i], *all[j]));
        }
    }
}

TEST_CASE("corpus: ground-truth volumes are exactly linear in time") {
    const Corpus c = generate_corpus(11, desk_cfg(), tiny_gen(3));
    const double eps = std::numeric_limits<double>::epsilon();
    for (const auto* split : {&c.train, &c.validation, &c.test}) {
        for (const SampleWithTruth& item : *split) {
            const double v0 = item.truth.states[0].v;
            for (std::size_t t = 0; t < item.truth.states.size(); ++t) {
                const double expect = v0 + c.cfg.feed_rate * c.cfg.dt * static_cast<double>(t);
                CHECK(std::abs(item.truth.states[t].v - expect) <=
                      c.cfg.n_steps * eps * std::max(1.0, item.truth.states[t].v));
            }
        }
    }
}

TEST_CASE("corpus: split streams are independent of other splits' sizes") {
    const BioreactorConfig cfg = desk_cfg();
    GenConfig small = tiny_gen(2);
    GenConfig bigger = tiny_gen(2);
    bigger.n_train = 5;
    const Corpus a = generate_corpus(13, cfg, small);
    const Corpus b = generate_corpus(13, cfg, bigger);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(same_sample(a.validation[i], b.validation[i]));
        CHECK(same_sample(a.test[i], b.test[i]));
        CHECK(same_sample(a.train[i], b.train[i]));
    }
}

TEST_CASE("corpus: thread count does not change the result") {
    const BioreactorConfig cfg = desk_cfg();
    const GenConfig gen = tiny_gen(4);
    setenv("GRAYBOX_THREADS", "1", 1);
    const Corpus serial = generate_corpus(17, cfg, gen);
    setenv("GRAYBOX_THREADS", "4", 1);
    const Corpus parallel = generate_corpus(17, cfg, gen);
    unsetenv("GRAYBOX_THREADS");
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(same_sample(serial.train[i], parallel.train[i]));
        CHECK(same_sample(serial.test[i], parallel.test[i]));
    }
}

TEST_CASE("corpus: running maxima keep growing past step 256 at full defaults") {
    BioreactorConfig cfg;  // full 2048-step configuration
    GenConfig gen = tiny_gen(64);
    const Corpus c = generate_corpus(1, cfg, gen);
    const SplitMaxima m = split_maxima(c.test);

    bool x_grew = false, s_grew = false;
    for (std::size_t t = 257; t < m.running_max_x.size(); ++t) {
        if (m.running_max_x[t] > m.running_max_x[t - 1]) x_grew = true;
        if (m.running_max_s[t] > m.running_max_s[t - 1]) s_grew = true;
    }
    CHECK(x_grew);
    CHECK(s_grew);
}

TEST_CASE("coarsen: factor 1 is the identity") {
    const Corpus c = generate_corpus(19, desk_cfg(), tiny_gen(1));
    const SampleWithTruth out = coarsen(c.train[0], 1);
    CHECK(same_sample(out, c.train[0]));
}

TEST_CASE("coarsen: strides, horizon, and final time") {
    const BioreactorConfig cfg = desk_cfg(2048);
    GenConfig gen = tiny_gen(1);
    const Corpus c = generate_corpus(23, cfg, gen);
    const SampleWithTruth out = coarsen(c.train[0], 8);
    const BioreactorConfig coarse = coarsen_config(cfg, 8);

    CHECK(out.sample.s_in.size() == 256);
    CHECK(out.truth.states.size() == 257);
    CHECK(coarse.n_steps == 256);
    CHECK(coarse.dt * coarse.n_steps == doctest::Approx(cfg.dt * cfg.n_steps).epsilon(1e-15));
    for (int t = 0; t < 256; ++t) {
        CHECK(out.sample.s_in[t] == c.train[0].sample.s_in[static_cast<std::size_t>(t) * 8]);
        CHECK(out.truth.states[t].x == c.train[0].truth.states[static_cast<std::size_t>(t) * 8].x);
    }
    CHECK(out.truth.states[256].x == c.train[0].truth.states[2048].x);

    // Subsampled volume stays exactly on the coarse line.
    const double eps = std::numeric_limits<double>::epsilon();
    const double v0 = out.truth.states[0].v;
    for (int t = 0; t <= 256; ++t) {
        const double expect = v0 + coarse.feed_rate * coarse.dt * t;
        CHECK(std::abs(out.truth.states[t].v - expect) <=
              cfg.n_steps * eps * std::max(1.0, out.truth.states[t].v));
    }
}

TEST_CASE("coarsen: composition on arrays is exact") {
    const Corpus c = generate_corpus(29, desk_cfg(48), tiny_gen(1));
    const SampleWithTruth once = coarsen(c.train[0], 12);
    const SampleWithTruth twice = coarsen(coarsen(c.train[0], 4), 3);
    CHECK(once.sample.s_in == twice.sample.s_in);
    for (std::size_t t = 0; t < once.truth.states.size(); ++t) {
        CHECK(once.truth.states[t].x == twice.truth.states[t].x);
        CHECK(once.truth.states[t].s == twice.truth.states[t].s);
        CHECK(once.truth.states[t].v == twice.truth.states[t].v);
    }
}

TEST_CASE("coarsen: non-dividing factor is a contract error") {
    const Corpus c = generate_corpus(31, desk_cfg(63), tiny_gen(1));
    CHECK_THROWS_AS(coarsen(c.train[0], 8), contract_error);
    CHECK_THROWS_AS(coarsen_config(c.cfg, 8), contract_error);
}

TEST_CASE("corpus file: round trip is bit-exact") {
    const Corpus c = generate_corpus(37, desk_cfg(), tiny_gen(3));
    const std::string path = "test_corpus_roundtrip.gbx";
    save_corpus(path, c);
    const Corpus d = load_corpus(path);
    std::remove(path.c_str());

    CHECK(d.seed == c.seed);
    CHECK(d.cfg.dt == c.cfg.dt);
    CHECK(d.cfg.n_steps == c.cfg.n_steps);
    CHECK(d.gen.sin0_mean == c.gen.sin0_mean);
    CHECK(d.rejected_samples == c.rejected_samples);
    REQUIRE(d.train.size() == c.train.size());
    for (std::size_t i = 0; i < c.train.size(); ++i) {
        CHECK(same_sample(c.train[i], d.train[i]));
    }
    for (std::size_t i = 0; i < c.test.size(); ++i) {
        CHECK(same_sample(c.test[i], d.test[i]));
    }
}

TEST_CASE("stats csv: header and row count") {
    const Corpus c = generate_corpus(41, desk_cfg(16), tiny_gen(2));
    const SplitMaxima m = split_maxima(c.test);
    std::ostringstream out;
    write_stats_csv(out, m);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "step,max_X,max_S,running_max_X,running_max_S");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 17);
}
