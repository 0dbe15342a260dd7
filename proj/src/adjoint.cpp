#include "graybox/adjoint.hpp"

#include <cmath>

#include "graybox/errors.hpp"
#include "graybox/parallel.hpp"

namespace graybox {

MaskMode parse_mask_mode(const std::string& name) {
    if (name == "s_only_dense") return MaskMode::s_only_dense;
    if (name == "xs_every_8th") return MaskMode::xs_every_8th;
    if (name == "xs_dense") return MaskMode::xs_dense;
    throw config_error("unknown mask mode: " + name);
}

const char* mask_mode_name(MaskMode mode) {
    switch (mode) {
        case MaskMode::s_only_dense: return "s_only_dense";
        case MaskMode::xs_every_8th: return "xs_every_8th";
        case MaskMode::xs_dense: return "xs_dense";
    }
    return "?";
}

long ObservationMask::n_observed_steps() const {
    long n = 0;
    for (std::size_t t = 0; t < observe_x.size(); ++t) {
        if (observe_x[t] || observe_s[t]) ++n;
    }
    return n;
}

void ObservationMask::validate() const {
    if (observe_x.size() != observe_s.size()) {
        throw contract_error("mask channel lengths differ");
    }
    if (n_observed_steps() == 0) {
        throw contract_error("mask observes nothing");
    }
}

ObservationMask make_mask(MaskMode mode, int n_steps) {
    if (n_steps < 1) throw config_error("mask length must be >= 1");
    ObservationMask m;
    m.observe_x.assign(n_steps, false);
    m.observe_s.assign(n_steps, false);
    switch (mode) {
        case MaskMode::s_only_dense:
            m.observe_s.assign(n_steps, true);
            break;
        case MaskMode::xs_every_8th:
            for (int t = 7; t < n_steps; t += 8) {
                m.observe_x[t] = true;
                m.observe_s[t] = true;
            }
            break;
        case MaskMode::xs_dense:
            m.observe_x.assign(n_steps, true);
            m.observe_s.assign(n_steps, true);
            break;
    }
    m.validate();
    return m;
}

LossReport make_loss_report(double total, long n_samples, long n_observed_steps) {
    LossReport r;
    r.total = total;
    r.n_samples = n_samples;
    r.n_observed_steps = n_observed_steps;
    const double denom = static_cast<double>(n_samples) * static_cast<double>(n_observed_steps);
    r.per_sample_per_step = denom > 0.0 ? total / denom : 0.0;
    r.loss_ratio = r.per_sample_per_step / adequate_loss_threshold;
    return r;
}

LossReport trajectory_loss(const Trajectory& pred, const Trajectory& truth,
                           const ObservationMask& mask) {
    const int n = mask.n_steps();
    if (pred.n_steps() != n || truth.n_steps() != n) {
        throw contract_error("trajectory horizons do not match the mask");
    }
    double total = 0.0;
    for (int t = 0; t < n; ++t) {
        const State& p = pred.states[t + 1];
        const State& g = truth.states[t + 1];
        if (mask.observe_x[t]) {
            const double d = p.x - g.x;
            total += d * d;
        }
        if (mask.observe_s[t]) {
            const double d = p.s - g.s;
            total += d * d;
        }
    }
    return make_loss_report(total, 1, mask.n_observed_steps());
}

MuFn mlp_mu_fn(const MlpParams& p, bool clamp_nonneg) {
    if (clamp_nonneg) {
        return [p](double x, double s) { return std::max(mlp_forward(p, x, s), 0.0); };
    }
    return [p](double x, double s) { return mlp_forward(p, x, s); };
}

namespace {

struct SampleResult {
    MlpGrads grads;
    double loss_total = 0.0;
};

// Forward pass with recorded network outputs, then the reverse sweep.
SampleResult bptt_sample(const MlpParams& p, const SampleWithTruth& item,
                         const ObservationMask& mask, const BioreactorConfig& cfg,
                         bool clamp_mu, long sample_index) {
    const int n = cfg.n_steps;
    if (item.sample.s_in.size() != static_cast<std::size_t>(n) ||
        item.truth.n_steps() != n || mask.n_steps() != n) {
        throw contract_error("sample, truth, and mask horizons do not match n_steps");
    }

    std::vector<double> mu_raw(n, 0.0);
    Trajectory pred;
    try {
        int k = 0;
        const MuFn recorder = [&](double x, double s) {
            const double raw = mlp_forward(p, x, s);
            mu_raw[k++] = raw;
            return clamp_mu ? std::max(raw, 0.0) : raw;
        };
        pred = integrate(item.sample.x0, item.sample.s_in, recorder, cfg);
    } catch (const blowup_error& e) {
        throw blowup_error(e.what(), e.step, sample_index);
    }

    SampleResult out;
    out.loss_total = trajectory_loss(pred, item.truth, mask).total;
    out.grads = MlpGrads::zeros(p.hidden());

    // Adjoint of the state at step t+1, accumulated from the last step down.
    double ax = mask.observe_x[n - 1] ? 2.0 * (pred.states[n].x - item.truth.states[n].x) : 0.0;
    double as = mask.observe_s[n - 1] ? 2.0 * (pred.states[n].s - item.truth.states[n].s) : 0.0;
    double av = 0.0;

    for (int t = n - 1; t >= 0; --t) {
        const State& st = pred.states[t];
        const double gate = clamp_mu ? (mu_raw[t] > 0.0 ? 1.0 : 0.0) : 1.0;
        const double mu_used = clamp_mu ? std::max(mu_raw[t], 0.0) : mu_raw[t];

        const double up_mu = gate * cfg.dt * st.x * (ax - as * cfg.k1);
        const MlpBackward back = mlp_backward(p, st.x, st.s, up_mu);
        out.grads.accumulate(back.grads);

        const double vinv = 1.0 / st.v;
        double nx = ax * (1.0 + cfg.dt * (mu_used - cfg.feed_rate * vinv)) -
                    as * cfg.dt * cfg.k1 * mu_used + back.grad_x;
        double ns = as * (1.0 - cfg.dt * cfg.feed_rate * vinv) + back.grad_s;
        double nv = ax * cfg.dt * cfg.feed_rate * st.x * vinv * vinv -
                    as * cfg.dt * cfg.feed_rate * (item.sample.s_in[t] - st.s) * vinv * vinv +
                    av;
        if (t >= 1) {
            if (mask.observe_x[t - 1]) nx += 2.0 * (pred.states[t].x - item.truth.states[t].x);
            if (mask.observe_s[t - 1]) ns += 2.0 * (pred.states[t].s - item.truth.states[t].s);
        }
        ax = nx;
        as = ns;
        av = nv;
    }

    if (!out.grads.all_finite()) {
        throw numeric_error("bptt produced a non-finite gradient");
    }
    return out;
}

}  // namespace

BatchGradient bptt_gradient(const MlpParams& p, std::span<const SampleWithTruth> batch,
                            const ObservationMask& mask, const BioreactorConfig& cfg,
                            bool clamp_mu) {
    if (batch.empty()) throw contract_error("empty batch");
    mask.validate();

    std::vector<SampleResult> results(batch.size());
    parallel_for(batch.size(), [&](std::size_t i) {
        results[i] = bptt_sample(p, batch[i], mask, cfg, clamp_mu, static_cast<long>(i));
    });

    BatchGradient out;
    out.grads = MlpGrads::zeros(p.hidden());
    double total = 0.0;
    for (const SampleResult& r : results) {
        out.grads.accumulate(r.grads);
        total += r.loss_total;
    }
    out.loss = make_loss_report(total, static_cast<long>(batch.size()), mask.n_observed_steps());
    return out;
}

LossReport batch_loss(const MlpParams& p, std::span<const SampleWithTruth> batch,
                      const ObservationMask& mask, const BioreactorConfig& cfg,
                      bool clamp_mu) {
    if (batch.empty()) throw contract_error("empty batch");
    mask.validate();
    const MuFn mu = mlp_mu_fn(p, clamp_mu);
    std::vector<double> totals(batch.size(), 0.0);
    parallel_for(batch.size(), [&](std::size_t i) {
        try {
            const Trajectory pred = integrate(batch[i].sample.x0, batch[i].sample.s_in, mu, cfg);
            totals[i] = trajectory_loss(pred, batch[i].truth, mask).total;
        } catch (const blowup_error& e) {
            throw blowup_error(e.what(), e.step, static_cast<long>(i));
        }
    });
    double total = 0.0;
    for (double t : totals) total += t;
    return make_loss_report(total, static_cast<long>(batch.size()), mask.n_observed_steps());
}

namespace {

double loss_at(const MlpParams& p, std::span<const SampleWithTruth> batch,
               const ObservationMask& mask, const BioreactorConfig& cfg, bool clamp_mu) {
    const MuFn mu = mlp_mu_fn(p, clamp_mu);
    double total = 0.0;
    for (const SampleWithTruth& item : batch) {
        const Trajectory pred = integrate(item.sample.x0, item.sample.s_in, mu, cfg);
        total += trajectory_loss(pred, item.truth, mask).total;
    }
    return total;
}

}  // namespace

MlpGrads fd_gradient(const MlpParams& p, std::span<const SampleWithTruth> batch,
                     const ObservationMask& mask, const BioreactorConfig& cfg,
                     double step, bool clamp_mu) {
    if (!(step > 0.0)) throw contract_error("finite-difference step must be positive");
    if (batch.empty()) throw contract_error("empty batch");
    mask.validate();

    const int h = p.hidden();
    const std::size_t count = p.parameter_count();
    MlpGrads g = MlpGrads::zeros(h);

    auto param_ref = [](MlpParams& q, std::size_t i) -> double& {
        if (i < q.w1.size()) return q.w1[i];
        i -= q.w1.size();
        if (i < q.b1.size()) return q.b1[i];
        i -= q.b1.size();
        if (i < q.w2.size()) return q.w2[i];
        return q.b2;
    };
    auto grad_ref = [](MlpGrads& q, std::size_t i) -> double& {
        if (i < q.w1.size()) return q.w1[i];
        i -= q.w1.size();
        if (i < q.b1.size()) return q.b1[i];
        i -= q.b1.size();
        if (i < q.w2.size()) return q.w2[i];
        return q.b2;
    };

    parallel_for(count, [&](std::size_t i) {
        MlpParams q = p;
        double& slot = param_ref(q, i);
        const double original = slot;
        slot = original + step;
        const double up = loss_at(q, batch, mask, cfg, clamp_mu);
        slot = original - step;
        const double down = loss_at(q, batch, mask, cfg, clamp_mu);
        grad_ref(g, i) = (up - down) / (2.0 * step);
    });
    return g;
}

}  // namespace graybox
