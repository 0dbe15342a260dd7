#include "graybox/mlp.hpp"

#include <cmath>

#include "graybox/errors.hpp"
#include "graybox/rng.hpp"

namespace graybox {

namespace {

bool all_finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace

MlpParams MlpParams::zeros(int hidden) {
    if (hidden < 1) throw config_error("hidden width must be >= 1");
    MlpParams p;
    p.w1.assign(static_cast<std::size_t>(hidden) * 2, 0.0);
    p.b1.assign(hidden, 0.0);
    p.w2.assign(hidden, 0.0);
    p.b2 = 0.0;
    return p;
}

void MlpParams::validate() const {
    const std::size_t h = b1.size();
    if (h < 1) throw config_error("hidden width must be >= 1");
    if (w1.size() != 2 * h || w2.size() != h) {
        throw config_error("mlp parameter shapes are inconsistent");
    }
    if (!graybox::all_finite(w1) || !graybox::all_finite(b1) ||
        !graybox::all_finite(w2) || !std::isfinite(b2)) {
        throw config_error("mlp parameters contain non-finite entries");
    }
}

MlpGrads MlpGrads::zeros(int hidden) {
    if (hidden < 1) throw config_error("hidden width must be >= 1");
    MlpGrads g;
    g.w1.assign(static_cast<std::size_t>(hidden) * 2, 0.0);
    g.b1.assign(hidden, 0.0);
    g.w2.assign(hidden, 0.0);
    g.b2 = 0.0;
    return g;
}

void MlpGrads::accumulate(const MlpGrads& other) {
    if (other.b1.size() != b1.size()) throw contract_error("gradient shapes differ");
    for (std::size_t i = 0; i < w1.size(); ++i) w1[i] += other.w1[i];
    for (std::size_t i = 0; i < b1.size(); ++i) b1[i] += other.b1[i];
    for (std::size_t i = 0; i < w2.size(); ++i) w2[i] += other.w2[i];
    b2 += other.b2;
}

void MlpGrads::scale(double factor) {
    for (double& x : w1) x *= factor;
    for (double& x : b1) x *= factor;
    for (double& x : w2) x *= factor;
    b2 *= factor;
}

double MlpGrads::global_norm() const {
    double sq = 0.0;
    for (double x : w1) sq += x * x;
    for (double x : b1) sq += x * x;
    for (double x : w2) sq += x * x;
    sq += b2 * b2;
    return std::sqrt(sq);
}

bool MlpGrads::all_finite() const {
    return graybox::all_finite(w1) && graybox::all_finite(b1) &&
           graybox::all_finite(w2) && std::isfinite(b2);
}

namespace {

void validate_group(const GroupSpec& g, const char* name) {
    switch (g.scheme) {
        case InitScheme::uniform:
        case InitScheme::normal:
            if (!(g.a >= 0.0) || !std::isfinite(g.a)) {
                throw config_error(std::string("init scale for ") + name + " must be >= 0");
            }
            break;
        case InitScheme::log_uniform:
            if (!(g.a > 0.0) || !(g.b >= g.a) || !std::isfinite(g.b)) {
                throw config_error(std::string("log-uniform bounds for ") + name +
                                   " must satisfy 0 < a <= b");
            }
            break;
        case InitScheme::log_normal:
            if (!(g.a > 0.0) || !(g.b >= 0.0) || !std::isfinite(g.b)) {
                throw config_error(std::string("log-normal parameters for ") + name +
                                   " must satisfy a > 0, b >= 0");
            }
            break;
    }
}

double draw_one(Rng& rng, const GroupSpec& g) {
    switch (g.scheme) {
        case InitScheme::uniform:
            return rng.uniform(-g.a, g.a);
        case InitScheme::normal:
            return rng.normal(0.0, g.a);
        case InitScheme::log_uniform: {
            const double magnitude = std::exp(rng.uniform(std::log(g.a), std::log(g.b)));
            const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
            return sign * magnitude;
        }
        case InitScheme::log_normal: {
            const double magnitude = std::exp(rng.normal(std::log(g.a), g.b));
            const double sign = rng.uniform01() < 0.5 ? -1.0 : 1.0;
            return sign * magnitude;
        }
    }
    throw config_error("unknown init scheme");
}

}  // namespace

void InitSpec::validate() const {
    validate_group(w1, "w1");
    validate_group(b1, "b1");
    validate_group(w2, "w2");
    validate_group(b2, "b2");
}

InitSpec default_init(int hidden, std::uint64_t seed) {
    if (hidden < 1) throw config_error("hidden width must be >= 1");
    InitSpec spec;
    spec.w1 = {InitScheme::normal, std::sqrt(2.0 / 2.0), 0.0};
    spec.w2 = {InitScheme::normal, std::sqrt(2.0 / hidden), 0.0};
    spec.b1 = {InitScheme::uniform, 0.0, 0.0};
    spec.b2 = {InitScheme::uniform, 0.0, 0.0};
    spec.seed = seed;
    return spec;
}

double mlp_forward(const MlpParams& p, double x, double s) {
    const int h = p.hidden();
    double acc = 0.0;
    for (int j = 0; j < h; ++j) {
        const double pre = p.w1[2 * j] * x + p.w1[2 * j + 1] * s + p.b1[j];
        acc += p.w2[j] * relu(pre);
    }
    const double out = acc + p.b2;
    if (!std::isfinite(out)) {
        throw numeric_error("mlp_forward produced a non-finite value");
    }
    return out;
}

MlpBackward mlp_backward(const MlpParams& p, double x, double s, double upstream) {
    if (!std::isfinite(x) || !std::isfinite(s) || !std::isfinite(upstream)) {
        throw numeric_error("mlp_backward received a non-finite input");
    }
    const int h = p.hidden();
    MlpBackward out;
    out.grads = MlpGrads::zeros(h);
    for (int j = 0; j < h; ++j) {
        const double pre = p.w1[2 * j] * x + p.w1[2 * j + 1] * s + p.b1[j];
        const double act = relu(pre);
        out.grads.w2[j] = upstream * act;
        if (pre > 0.0) {
            const double up_hidden = upstream * p.w2[j];
            out.grads.w1[2 * j] = up_hidden * x;
            out.grads.w1[2 * j + 1] = up_hidden * s;
            out.grads.b1[j] = up_hidden;
            out.grad_x += up_hidden * p.w1[2 * j];
            out.grad_s += up_hidden * p.w1[2 * j + 1];
        }
    }
    out.grads.b2 = upstream;
    return out;
}

MlpParams mlp_init(int hidden, const InitSpec& spec) {
    if (hidden < 1) throw config_error("hidden width must be >= 1");
    spec.validate();
    Rng rng(spec.seed);
    MlpParams p = MlpParams::zeros(hidden);
    for (double& w : p.w1) w = draw_one(rng, spec.w1);
    for (double& b : p.b1) b = draw_one(rng, spec.b1);
    for (double& w : p.w2) w = draw_one(rng, spec.w2);
    p.b2 = draw_one(rng, spec.b2);
    return p;
}

}  // namespace graybox
