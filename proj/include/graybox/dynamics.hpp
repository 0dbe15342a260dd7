#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace graybox {

/// Physical state of the reactor at one time step: reactant concentration x,
/// substrate concentration s, total volume v.
struct State {
    double x = 0.0;
    double s = 0.0;
    double v = 0.0;
};

/// Known constants of the fedbatch model plus the ground-truth Haldane
/// parameters used for corpus generation.
struct BioreactorConfig {
    double k1 = 2.0;           ///< yield constant
    double feed_rate = 0.05;   ///< constant feed rate F
    double dt = 0.05;
    int n_steps = 2048;
    double mu_star = 0.5;
    double k_m = 0.12;
    double k_i = 0.9;
    double state_bound = 1e6;  ///< |component| limit before a step counts as blowup

    void validate() const;
};

struct Trajectory {
    std::vector<State> states;  ///< n_steps + 1 entries; index 0 is the initial state
    std::vector<double> s_in;   ///< n_steps entries

    int n_steps() const { return static_cast<int>(s_in.size()); }
};

/// Initial condition plus the time-varying feed concentration series.
struct Sample {
    State x0;
    std::vector<double> s_in;
};

struct SampleWithTruth {
    Sample sample;
    Trajectory truth;
};

/// Haldane ground-truth rate: s * mu_star / (s + k_m + s^2 / k_i).
/// Independent of the reactant concentration.
double haldane_mu(double s, const BioreactorConfig& cfg);

struct StateRates {
    double dx = 0.0;
    double ds = 0.0;
    double dv = 0.0;
};

/// Right-hand side of the fedbatch ODEs at the given state, rate value, and
/// feed concentration. Throws contract_error when the volume is not positive.
StateRates rhs(const State& st, double mu_val, double s_in, const BioreactorConfig& cfg);

/// One explicit Euler step: st + dt * rhs(...). Throws blowup_error (with
/// step index -1) when the result is not finite.
State euler_step(const State& st, double s_in, double mu_val, const BioreactorConfig& cfg);

using MuFn = std::function<double(double x, double s)>;

/// Integrates cfg.n_steps Euler steps from x0, evaluating mu_fn once per step
/// at the current state. Either returns a fully finite trajectory or throws
/// blowup_error naming the first step whose state is non-finite or exceeds
/// cfg.state_bound in magnitude.
Trajectory integrate(const State& x0, std::span<const double> s_in_series,
                     const MuFn& mu_fn, const BioreactorConfig& cfg);

MuFn haldane_mu_fn(const BioreactorConfig& cfg);

/// CSV export: header t,X,S,V,S_in, one row per step at 17 significant
/// digits; t is physical time, the final row's S_in cell is empty.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj, double dt);

}  // namespace graybox
