#include "graybox/dynamics.hpp"

#include <cmath>
#include <ostream>
#include <string>

#include "graybox/errors.hpp"
#include "graybox/text.hpp"

namespace graybox {

void BioreactorConfig::validate() const {
    if (!(dt > 0.0)) throw config_error("dt must be positive");
    if (n_steps < 1) throw config_error("n_steps must be >= 1");
    if (!(feed_rate >= 0.0)) throw config_error("feed rate must be >= 0");
    if (!(k_m > 0.0)) throw config_error("k_m must be positive");
    if (!(k_i > 0.0)) throw config_error("k_i must be positive");
    if (!(mu_star > 0.0)) throw config_error("mu_star must be positive");
    if (!(k1 > 0.0)) throw config_error("k1 must be positive");
    if (!(state_bound > 0.0)) throw config_error("state bound must be positive");
}

double haldane_mu(double s, const BioreactorConfig& cfg) {
    return s * cfg.mu_star / (s + cfg.k_m + s * s / cfg.k_i);
}

StateRates rhs(const State& st, double mu_val, double s_in, const BioreactorConfig& cfg) {
    if (!(st.v > 0.0)) {
        throw contract_error("rhs requires a positive volume, got " + g17(st.v));
    }
    StateRates r;
    r.dx = mu_val * st.x - cfg.feed_rate * st.x / st.v;
    r.ds = -cfg.k1 * mu_val * st.x + cfg.feed_rate * (s_in - st.s) / st.v;
    r.dv = cfg.feed_rate;
    return r;
}

State euler_step(const State& st, double s_in, double mu_val, const BioreactorConfig& cfg) {
    const StateRates r = rhs(st, mu_val, s_in, cfg);
    State next;
    next.x = st.x + cfg.dt * r.dx;
    next.s = st.s + cfg.dt * r.ds;
    next.v = st.v + cfg.dt * r.dv;
    if (!std::isfinite(next.x) || !std::isfinite(next.s) || !std::isfinite(next.v)) {
        throw blowup_error("euler step produced a non-finite state", -1);
    }
    return next;
}

Trajectory integrate(const State& x0, std::span<const double> s_in_series,
                     const MuFn& mu_fn, const BioreactorConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(s_in_series.size()) != cfg.n_steps) {
        throw contract_error("s_in series length does not match n_steps");
    }
    if (!(x0.v > 0.0)) throw contract_error("initial volume must be positive");

    Trajectory traj;
    traj.states.reserve(cfg.n_steps + 1);
    traj.states.push_back(x0);
    traj.s_in.assign(s_in_series.begin(), s_in_series.end());

    for (int t = 0; t < cfg.n_steps; ++t) {
        const State& cur = traj.states.back();
        State next;
        try {
            const double mu_val = mu_fn(cur.x, cur.s);
            next = euler_step(cur, s_in_series[t], mu_val, cfg);
        } catch (const blowup_error&) {
            throw blowup_error("trajectory blew up", t + 1);
        } catch (const numeric_error&) {
            throw blowup_error("trajectory blew up", t + 1);
        }
        if (std::abs(next.x) > cfg.state_bound || std::abs(next.s) > cfg.state_bound ||
            std::abs(next.v) > cfg.state_bound) {
            throw blowup_error("trajectory exceeded the state bound", t + 1);
        }
        traj.states.push_back(next);
    }
    return traj;
}

MuFn haldane_mu_fn(const BioreactorConfig& cfg) {
    return [cfg](double, double s) { return haldane_mu(s, cfg); };
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, double dt) {
    out << "t,X,S,V,S_in\n";
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const State& st = traj.states[i];
        out << g17(static_cast<double>(i) * dt) << ',' << g17(st.x) << ',' << g17(st.s)
            << ',' << g17(st.v) << ',';
        if (i < traj.s_in.size()) out << g17(traj.s_in[i]);
        out << '\n';
    }
}

}  // namespace graybox
