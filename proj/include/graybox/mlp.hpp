#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace graybox {

/// Parameters of the two-layer ReLU network estimating the reaction rate from
/// the (reactant, substrate) pair. w1 is hidden x 2 row-major, b1 and w2 hold
/// one entry per hidden unit, b2 is the scalar output bias.
struct MlpParams {
    std::vector<double> w1;
    std::vector<double> b1;
    std::vector<double> w2;
    double b2 = 0.0;

    int hidden() const { return static_cast<int>(b1.size()); }
    std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + 1; }

    static MlpParams zeros(int hidden);

    /// Throws config_error on inconsistent shapes or non-finite entries.
    void validate() const;
};

/// Partials of a scalar loss, one entry per parameter in MlpParams.
struct MlpGrads {
    std::vector<double> w1;
    std::vector<double> b1;
    std::vector<double> w2;
    double b2 = 0.0;

    int hidden() const { return static_cast<int>(b1.size()); }
    static MlpGrads zeros(int hidden);

    void accumulate(const MlpGrads& other);
    void scale(double factor);
    double global_norm() const;
    bool all_finite() const;
};

enum class InitScheme { uniform, normal, log_uniform, log_normal };

/// Draw description for one parameter group. Meaning of (a, b):
///   uniform      U[-a, a]                                   (b unused)
///   normal       N(0, a^2)                                  (b unused)
///   log_uniform  magnitude log-uniform on [a, b], sign uniform in {-1, +1}
///   log_normal   log magnitude N(log a, b^2), sign uniform in {-1, +1}
struct GroupSpec {
    InitScheme scheme = InitScheme::uniform;
    double a = 0.0;
    double b = 0.0;
};

struct InitSpec {
    GroupSpec w1;
    GroupSpec b1;
    GroupSpec w2;
    GroupSpec b2;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Variance-preserving defaults: weights normal with stddev sqrt(2 / fan_in)
/// (fan_in is 2 for w1 and `hidden` for w2), biases zero.
InitSpec default_init(int hidden, std::uint64_t seed);

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

/// w2 . relu(w1 (x, s) + b1) + b2. Throws numeric_error if the result is not
/// finite.
double mlp_forward(const MlpParams& p, double x, double s);

struct MlpBackward {
    MlpGrads grads;
    double grad_x = 0.0;
    double grad_s = 0.0;
};

/// Exact reverse-mode derivatives of upstream * mlp_forward(p, x, s) with
/// respect to every parameter and both inputs. The relu subgradient at
/// exactly zero is taken as zero.
MlpBackward mlp_backward(const MlpParams& p, double x, double s, double upstream);

/// Draws parameters per spec; deterministic given spec.seed. Draw order is
/// w1 row-major, then b1, then w2, then b2.
MlpParams mlp_init(int hidden, const InitSpec& spec);

}  // namespace graybox
