#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <vector>

#include "graybox/checkpoint.hpp"
#include "graybox/errors.hpp"
#include "graybox/mlp.hpp"
#include "graybox/rng.hpp"

using namespace graybox;

namespace {

// Straight-line re-implementation of the two-layer formula, kept independent
// of the library code path.
double forward_oracle(const MlpParams& p, double x, double s) {
    const int h = p.hidden();
    std::vector<double> pre(h);
    for (int j = 0; j < h; ++j) {
        pre[j] = p.w1[2 * j] * x + p.w1[2 * j + 1] * s + p.b1[j];
    }
    double out = p.b2;
    for (int j = 0; j < h; ++j) {
        out += p.w2[j] * (pre[j] > 0 ? pre[j] : 0.0);
    }
    return out;
}

double& param_at(MlpParams& p, std::size_t i) {
    if (i < p.w1.size()) return p.w1[i];
    i -= p.w1.size();
    if (i < p.b1.size()) return p.b1[i];
    i -= p.b1.size();
    if (i < p.w2.size()) return p.w2[i];
    return p.b2;
}

double grad_at(const MlpGrads& g, std::size_t i) {
    if (i < g.w1.size()) return g.w1[i];
    i -= g.w1.size();
    if (i < g.b1.size()) return g.b1[i];
    i -= g.b1.size();
    if (i < g.w2.size()) return g.w2[i];
    return g.b2;
}

MlpParams seeded_params(int hidden, std::uint64_t seed) {
    return mlp_init(hidden, default_init(hidden, seed));
}

}  // namespace

TEST_CASE("relu basics") {
    CHECK(relu(1.5) == 1.5);
    CHECK(relu(-2.0) == 0.0);
    CHECK(relu(0.0) == 0.0);
}

TEST_CASE("forward: zero network returns zero") {
    const MlpParams p = MlpParams::zeros(3);
    CHECK(mlp_forward(p, 0.7, -1.3) == 0.0);
}

TEST_CASE("forward: single-unit pass-through of first input") {
    MlpParams p = MlpParams::zeros(1);
    p.w1 = {1.0, 0.0};
    p.w2 = {1.0};
    CHECK(mlp_forward(p, 3.0, 99.0) == 3.0);
}

TEST_CASE("forward matches the straight-line oracle") {
    const MlpParams p = seeded_params(4, 11);
    const double got = mlp_forward(p, 0.5, 0.2);
    const double want = forward_oracle(p, 0.5, 0.2);
    CHECK(got == doctest::Approx(want).epsilon(1e-15));
}

TEST_CASE("forward is deterministic and positively homogeneous in w2") {
    const MlpParams p = seeded_params(8, 5);
    const double a = mlp_forward(p, 0.3, 0.9);
    CHECK(a == mlp_forward(p, 0.3, 0.9));

    // Powers of two scale without rounding.
    for (double c : {2.0, 0.5, 4.0}) {
        MlpParams q = p;
        for (double& w : q.w2) w *= c;
        CHECK(mlp_forward(q, 0.3, 0.9) - q.b2 == c * (a - p.b2));
    }
}

TEST_CASE("backward: zero upstream gives zero gradients") {
    const MlpParams p = seeded_params(6, 3);
    const MlpBackward b = mlp_backward(p, 0.4, 0.1, 0.0);
    CHECK(b.grad_x == 0.0);
    CHECK(b.grad_s == 0.0);
    CHECK(b.grads.global_norm() == 0.0);
}

TEST_CASE("backward: affine region input gradient") {
    // All preactivations strictly positive: d(out)/dx = w2 . w1[:,0].
    MlpParams p = seeded_params(5, 7);
    for (double& b : p.b1) b = 10.0;  // push every unit into the active region
    const double upstream = 1.7;
    const MlpBackward b = mlp_backward(p, 0.2, 0.3, upstream);
    double want = 0.0;
    for (int j = 0; j < p.hidden(); ++j) want += p.w2[j] * p.w1[2 * j];
    CHECK(b.grad_x == doctest::Approx(upstream * want).epsilon(1e-14));
}

TEST_CASE("backward matches central finite differences") {
    const double h = 1e-6;
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull}) {
        const MlpParams p = seeded_params(4, seed);
        const double x = 0.5, s = 0.2;

        // Kink exclusion: skip seeds that put a preactivation near zero.
        bool near_kink = false;
        for (int j = 0; j < p.hidden(); ++j) {
            if (std::abs(p.w1[2 * j] * x + p.w1[2 * j + 1] * s + p.b1[j]) < 1e-8) {
                near_kink = true;
            }
        }
        if (near_kink) continue;

        const MlpBackward b = mlp_backward(p, x, s, 1.0);
        for (std::size_t i = 0; i < p.parameter_count(); ++i) {
            MlpParams q = p;
            param_at(q, i) += h;
            const double up = mlp_forward(q, x, s);
            param_at(q, i) -= 2 * h;
            const double down = mlp_forward(q, x, s);
            const double fd = (up - down) / (2 * h);
            const double ana = grad_at(b.grads, i);
            const double scale = std::max({std::abs(fd), std::abs(ana), 1e-10});
            CHECK(std::abs(fd - ana) / scale <= 1e-6);
        }

        // Input gradients by the same oracle.
        const double fx = (mlp_forward(p, x + h, s) - mlp_forward(p, x - h, s)) / (2 * h);
        const double fs = (mlp_forward(p, x, s + h) - mlp_forward(p, x, s - h)) / (2 * h);
        CHECK(std::abs(fx - b.grad_x) / std::max({std::abs(fx), std::abs(b.grad_x), 1e-10}) <=
              1e-6);
        CHECK(std::abs(fs - b.grad_s) / std::max({std::abs(fs), std::abs(b.grad_s), 1e-10}) <=
              1e-6);
    }
}

TEST_CASE("init: degenerate uniform scale gives zero params") {
    InitSpec spec;  // all groups uniform with scale 0
    spec.seed = 42;
    const MlpParams p = mlp_init(8, spec);
    for (double w : p.w1) CHECK(w == 0.0);
    for (double b : p.b1) CHECK(b == 0.0);
    for (double w : p.w2) CHECK(w == 0.0);
    CHECK(p.b2 == 0.0);
}

TEST_CASE("init: same seed is bit-identical, different seed is not") {
    const MlpParams a = seeded_params(16, 99);
    const MlpParams b = seeded_params(16, 99);
    const MlpParams c = seeded_params(16, 100);
    CHECK(a.w1 == b.w1);
    CHECK(a.b1 == b.b1);
    CHECK(a.w2 == b.w2);
    CHECK(a.b2 == b.b2);
    CHECK(a.w1 != c.w1);
}

TEST_CASE("init: hidden < 1 is a configuration error") {
    CHECK_THROWS_AS(mlp_init(0, default_init(1, 0)), config_error);
}

TEST_CASE("init: log-uniform bias magnitudes pass a KS uniformity check") {
    // Pool log|b1| over enough draws to reach ~10k points and compare the
    // empirical CDF with the uniform CDF on [log(1e-3), log(1)].
    InitSpec spec;
    spec.b1 = {InitScheme::log_uniform, 1e-3, 1.0};
    const int hidden = 64;
    const int pools = 157;  // 157 * 64 = 10048 draws

    std::vector<double> logs;
    logs.reserve(static_cast<std::size_t>(hidden) * pools);
    for (int k = 0; k < pools; ++k) {
        spec.seed = 1000 + static_cast<std::uint64_t>(k);
        const MlpParams p = mlp_init(hidden, spec);
        for (double b : p.b1) {
            CHECK(b != 0.0);
            logs.push_back(std::log(std::abs(b)));
        }
    }
    std::sort(logs.begin(), logs.end());

    const double lo = std::log(1e-3), hi = std::log(1.0);
    const double n = static_cast<double>(logs.size());
    double d_stat = 0.0;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const double cdf = (logs[i] - lo) / (hi - lo);
        CHECK(cdf >= 0.0);
        CHECK(cdf <= 1.0);
        d_stat = std::max(d_stat, std::abs(cdf - static_cast<double>(i + 1) / n));
        d_stat = std::max(d_stat, std::abs(cdf - static_cast<double>(i) / n));
    }
    // Two-sided KS critical value at the 1% level.
    CHECK(d_stat < 1.628 / std::sqrt(n));
}

TEST_CASE("checkpoint round trip is bit-exact") {
    const MlpParams p = seeded_params(16, 2024);
    const std::string path = "test_mlp_ckpt.bin";
    save_checkpoint(path, p);
    const MlpParams q = load_checkpoint(path);
    CHECK(p.w1 == q.w1);
    CHECK(p.b1 == q.b1);
    CHECK(p.w2 == q.w2);
    CHECK(p.b2 == q.b2);
    std::remove(path.c_str());
}

TEST_CASE("checkpoint rejects garbage") {
    const std::string path = "test_mlp_bad.bin";
    {
        FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("not a checkpoint", f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(load_checkpoint(path), config_error);
    std::remove(path.c_str());
}
