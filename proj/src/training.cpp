#include "graybox/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>

#include "graybox/errors.hpp"
#include "graybox/parallel.hpp"
#include "graybox/text.hpp"

namespace graybox {

AdamState AdamState::fresh(int hidden) {
    AdamState a;
    a.m = MlpGrads::zeros(hidden);
    a.v = MlpGrads::zeros(hidden);
    a.t = 0;
    return a;
}

namespace {

void adam_update_span(std::span<double> params, std::span<const double> grads,
                      std::span<double> m, std::span<double> v, const AdamState& a,
                      double lr, double bc1, double bc2) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = a.beta1 * m[i] + (1.0 - a.beta1) * grads[i];
        v[i] = a.beta2 * v[i] + (1.0 - a.beta2) * grads[i] * grads[i];
        params[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + a.epsilon);
    }
}

}  // namespace

void adam_step(AdamState& a, MlpParams& p, const MlpGrads& g, double learning_rate) {
    if (!(learning_rate > 0.0)) throw config_error("learning rate must be positive");
    if (g.hidden() != p.hidden() || a.m.hidden() != p.hidden()) {
        throw contract_error("adam shapes do not match the parameters");
    }
    a.t += 1;
    const double bc1 = 1.0 - std::pow(a.beta1, static_cast<double>(a.t));
    const double bc2 = 1.0 - std::pow(a.beta2, static_cast<double>(a.t));
    adam_update_span(p.w1, g.w1, a.m.w1, a.v.w1, a, learning_rate, bc1, bc2);
    adam_update_span(p.b1, g.b1, a.m.b1, a.v.b1, a, learning_rate, bc1, bc2);
    adam_update_span(p.w2, g.w2, a.m.w2, a.v.w2, a, learning_rate, bc1, bc2);
    {
        double pb[1] = {p.b2};
        const double gb[1] = {g.b2};
        double mb[1] = {a.m.b2};
        double vb[1] = {a.v.b2};
        adam_update_span(pb, gb, mb, vb, a, learning_rate, bc1, bc2);
        p.b2 = pb[0];
        a.m.b2 = mb[0];
        a.v.b2 = vb[0];
    }
    if (!std::isfinite(p.b2) || !a.m.all_finite() || !a.v.all_finite()) {
        throw numeric_error("adam update produced non-finite values");
    }
    for (double w : p.w1) {
        if (!std::isfinite(w)) throw numeric_error("adam update produced non-finite values");
    }
    for (double b : p.b1) {
        if (!std::isfinite(b)) throw numeric_error("adam update produced non-finite values");
    }
    for (double w : p.w2) {
        if (!std::isfinite(w)) throw numeric_error("adam update produced non-finite values");
    }
}

StopDecision check_stopping(StopMonitor& mon, const LossReport& train, const LossReport& val) {
    const double train_pss = train.per_sample_per_step;
    const double val_pss = val.per_sample_per_step;

    if (val_pss < mon.best_val_loss) mon.best_val_loss = val_pss;
    if (train_pss < mon.best_train_loss) {
        mon.best_train_loss = train_pss;
        mon.epochs_since_improvement = 0;
    } else {
        mon.epochs_since_improvement += 1;
    }

    if (val_pss < mon.adequate) return StopDecision::adequate_performance;
    if (mon.best_val_loss / train_pss > mon.generalization_limit) {
        return StopDecision::generalization_failure;
    }
    if (mon.epochs_since_improvement >= mon.patience) {
        return StopDecision::improvement_failure;
    }
    return StopDecision::keep_going;
}

const char* termination_reason_name(TerminationReason reason) {
    switch (reason) {
        case TerminationReason::improvement_failure: return "improvement_failure";
        case TerminationReason::generalization_failure: return "generalization_failure";
        case TerminationReason::adequate_performance: return "adequate_performance";
        case TerminationReason::epoch_limit: return "epoch_limit";
        case TerminationReason::blowup_abort: return "blowup_abort";
    }
    return "?";
}

void TrainConfig::validate(int n_steps) const {
    if (!(learning_rate > 0.0)) throw config_error("learning rate must be positive");
    if (batch_size < 1) throw config_error("batch size must be >= 1");
    if (epochs_max < 1) throw config_error("epoch limit must be >= 1");
    if (hidden < 1) throw config_error("hidden width must be >= 1");
    if (stage1_coarsen_factor < 1 || n_steps % stage1_coarsen_factor != 0) {
        throw config_error("stage-1 coarsen factor must divide n_steps");
    }
}

LossReport run_epoch(MlpParams& p, AdamState& adam, std::span<const SampleWithTruth> split,
                     const ObservationMask& mask, const BioreactorConfig& cfg,
                     const TrainConfig& tcfg, std::uint64_t shuffle_seed) {
    if (split.empty()) throw contract_error("empty training split");
    if (tcfg.batch_size > static_cast<int>(split.size())) {
        throw contract_error("batch size exceeds the split size");
    }

    std::vector<std::size_t> order(split.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(shuffle_seed);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i + 1));
        std::swap(order[i], order[j]);
    }

    double total = 0.0;
    std::vector<SampleWithTruth> batch;
    batch.reserve(tcfg.batch_size);
    for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
        const std::size_t stop = std::min(order.size(), start + tcfg.batch_size);
        batch.clear();
        for (std::size_t i = start; i < stop; ++i) batch.push_back(split[order[i]]);

        BatchGradient bg = bptt_gradient(p, batch, mask, cfg, tcfg.clamp_mu);
        total += bg.loss.total;
        if (tcfg.clip_norm > 0.0) {
            const double norm = bg.grads.global_norm();
            if (norm > tcfg.clip_norm) bg.grads.scale(tcfg.clip_norm / norm);
        }
        adam_step(adam, p, bg.grads, tcfg.learning_rate);
    }
    return make_loss_report(total, static_cast<long>(split.size()), mask.n_observed_steps());
}

namespace {

TerminationReason to_reason(StopDecision d) {
    switch (d) {
        case StopDecision::improvement_failure: return TerminationReason::improvement_failure;
        case StopDecision::generalization_failure:
            return TerminationReason::generalization_failure;
        case StopDecision::adequate_performance: return TerminationReason::adequate_performance;
        case StopDecision::keep_going: break;
    }
    throw contract_error("keep_going is not a termination reason");
}

}  // namespace

StageSummary train_stage(int stage_id, MlpParams& p,
                         std::span<const SampleWithTruth> train_split,
                         std::span<const SampleWithTruth> val_split,
                         const BioreactorConfig& cfg, const TrainConfig& tcfg,
                         TrainHistory& history, const EpochCallback& on_epoch) {
    const ObservationMask mask = make_mask(tcfg.mask_mode, cfg.n_steps);
    AdamState adam = AdamState::fresh(p.hidden());
    StopMonitor mon;

    StageSummary summary;
    summary.stage = stage_id;

    for (int epoch = 1; epoch <= tcfg.epochs_max; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        EpochRecord rec;
        rec.stage = stage_id;
        rec.epoch = epoch;
        try {
            const std::uint64_t shuffle_seed =
                derive_seed(tcfg.seed, {static_cast<std::uint64_t>(stage_id),
                                        static_cast<std::uint64_t>(epoch)});
            rec.train = run_epoch(p, adam, train_split, mask, cfg, tcfg, shuffle_seed);
            rec.validation = batch_loss(p, val_split, mask, cfg, tcfg.clamp_mu);
        } catch (const blowup_error& e) {
            summary.reason = TerminationReason::blowup_abort;
            summary.epochs = epoch - 1;
            history.abort_message = std::string(e.what()) + " (stage " +
                                    std::to_string(stage_id) + ", epoch " +
                                    std::to_string(epoch) + ", sample " +
                                    std::to_string(e.sample) + ", step " +
                                    std::to_string(e.step) + ")";
            history.stages.push_back(summary);
            return summary;
        }
        rec.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        history.epochs.push_back(rec);
        if (on_epoch) on_epoch(rec, p);

        summary.epochs = epoch;
        summary.final_train_ratio = rec.train.loss_ratio;
        summary.final_val_ratio = rec.validation.loss_ratio;

        const StopDecision d = check_stopping(mon, rec.train, rec.validation);
        if (d != StopDecision::keep_going) {
            summary.reason = to_reason(d);
            history.stages.push_back(summary);
            return summary;
        }
    }
    summary.reason = TerminationReason::epoch_limit;
    history.stages.push_back(summary);
    return summary;
}

TrainResult train_two_stage(const Corpus& corpus, const TrainConfig& tcfg,
                            const InitSpec& init, const EpochCallback& on_epoch) {
    corpus.cfg.validate();
    tcfg.validate(corpus.cfg.n_steps);

    TrainResult result;
    result.params = mlp_init(tcfg.hidden, init);

    {
        const BioreactorConfig coarse_cfg =
            coarsen_config(corpus.cfg, tcfg.stage1_coarsen_factor);
        const std::vector<SampleWithTruth> coarse_train =
            coarsen_split(corpus.train, tcfg.stage1_coarsen_factor);
        const std::vector<SampleWithTruth> coarse_val =
            coarsen_split(corpus.validation, tcfg.stage1_coarsen_factor);
        train_stage(1, result.params, coarse_train, coarse_val, coarse_cfg, tcfg,
                    result.history, on_epoch);
        if (result.history.aborted()) return result;
    }

    train_stage(2, result.params, corpus.train, corpus.validation, corpus.cfg, tcfg,
                result.history, on_epoch);
    return result;
}

TrainResult train_single_stage(const Corpus& corpus, const TrainConfig& tcfg,
                               const MlpParams& initial, const EpochCallback& on_epoch) {
    corpus.cfg.validate();
    initial.validate();
    TrainConfig cfg_checked = tcfg;
    cfg_checked.hidden = initial.hidden();
    cfg_checked.validate(corpus.cfg.n_steps);

    TrainResult result;
    result.params = initial;
    train_stage(2, result.params, corpus.train, corpus.validation, corpus.cfg, cfg_checked,
                result.history, on_epoch);
    return result;
}

LossReport evaluate(const MlpParams& p, std::span<const SampleWithTruth> split,
                    const BioreactorConfig& cfg, MaskMode /*mask_mode*/) {
    if (split.empty()) throw contract_error("empty split");
    const ObservationMask dense = make_mask(MaskMode::xs_dense, cfg.n_steps);
    return batch_loss(p, split, dense, cfg);
}

std::vector<LossReport> per_sample_losses(const MlpParams& p,
                                          std::span<const SampleWithTruth> split,
                                          const BioreactorConfig& cfg) {
    if (split.empty()) throw contract_error("empty split");
    const ObservationMask dense = make_mask(MaskMode::xs_dense, cfg.n_steps);
    const MuFn mu = mlp_mu_fn(p);
    std::vector<LossReport> out(split.size());
    parallel_for(split.size(), [&](std::size_t i) {
        try {
            const Trajectory pred = integrate(split[i].sample.x0, split[i].sample.s_in, mu, cfg);
            out[i] = trajectory_loss(pred, split[i].truth, dense);
        } catch (const blowup_error& e) {
            throw blowup_error(e.what(), e.step, static_cast<long>(i));
        }
    });
    return out;
}

double Region::x_at(int i) const {
    return nx > 1 ? x_lo + (x_hi - x_lo) * i / (nx - 1) : x_lo;
}

double Region::s_at(int j) const {
    return ns > 1 ? s_lo + (s_hi - s_lo) * j / (ns - 1) : s_lo;
}

Region visited_region(std::span<const SampleWithTruth> split, int nx, int ns) {
    if (split.empty()) throw contract_error("empty split");
    if (nx < 2 || ns < 2) throw contract_error("grid must be at least 2x2");

    Region r;
    r.nx = nx;
    r.ns = ns;
    r.x_lo = 0.0;
    r.s_lo = 0.0;
    r.x_hi = 0.0;
    r.s_hi = 0.0;
    for (const SampleWithTruth& item : split) {
        for (const State& st : item.truth.states) {
            r.x_hi = std::max(r.x_hi, st.x);
            r.s_hi = std::max(r.s_hi, st.s);
        }
    }
    if (!(r.x_hi > 0.0)) r.x_hi = 1.0;
    if (!(r.s_hi > 0.0)) r.s_hi = 1.0;

    r.visited.assign(static_cast<std::size_t>(nx) * ns, 0);
    for (const SampleWithTruth& item : split) {
        for (const State& st : item.truth.states) {
            const int i = static_cast<int>(std::lround((st.x - r.x_lo) / (r.x_hi - r.x_lo) *
                                                       (nx - 1)));
            const int j = static_cast<int>(std::lround((st.s - r.s_lo) / (r.s_hi - r.s_lo) *
                                                       (ns - 1)));
            if (i >= 0 && i < nx && j >= 0 && j < ns) {
                r.visited[static_cast<std::size_t>(i) * ns + j] = 1;
            }
        }
    }
    return r;
}

double mu_surface_error(const MlpParams& p, const BioreactorConfig& cfg, const Region& region) {
    if (region.nx < 1 || region.ns < 1) throw contract_error("empty region");
    if (!region.visited.empty() &&
        region.visited.size() != static_cast<std::size_t>(region.nx) * region.ns) {
        throw contract_error("visited mask does not match the grid");
    }
    double sum_sq = 0.0;
    long count = 0;
    for (int i = 0; i < region.nx; ++i) {
        for (int j = 0; j < region.ns; ++j) {
            if (!region.visited.empty() &&
                !region.visited[static_cast<std::size_t>(i) * region.ns + j]) {
                continue;
            }
            const double x = region.x_at(i);
            const double s = region.s_at(j);
            const double d = mlp_forward(p, x, s) - haldane_mu(s, cfg);
            sum_sq += d * d;
            ++count;
        }
    }
    if (count == 0) throw contract_error("empty region");
    return std::sqrt(sum_sq / static_cast<double>(count));
}

void write_history_csv(std::ostream& out, const TrainHistory& history) {
    out << "stage,epoch,train_loss,train_ratio,val_loss,val_ratio,wall_seconds\n";
    for (const EpochRecord& rec : history.epochs) {
        out << rec.stage << ',' << rec.epoch << ',' << g17(rec.train.per_sample_per_step)
            << ',' << g17(rec.train.loss_ratio) << ',' << g17(rec.validation.per_sample_per_step)
            << ',' << g17(rec.validation.loss_ratio) << ',' << g17(rec.wall_seconds) << '\n';
    }
    for (const StageSummary& st : history.stages) {
        out << "termination,stage=" << st.stage << ",reason="
            << termination_reason_name(st.reason) << ",epochs=" << st.epochs
            << ",final_train_ratio=" << g17(st.final_train_ratio)
            << ",final_val_ratio=" << g17(st.final_val_ratio) << '\n';
    }
    if (history.aborted()) {
        out << "abort,message=" << history.abort_message << '\n';
    }
}

}  // namespace graybox
