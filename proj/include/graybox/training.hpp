#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "graybox/adjoint.hpp"
#include "graybox/datagen.hpp"

namespace graybox {

struct AdamState {
    MlpGrads m;
    MlpGrads v;
    long t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState fresh(int hidden);
};

/// One bias-corrected Adam update, applied in place. t advances by one.
void adam_step(AdamState& a, MlpParams& p, const MlpGrads& g, double learning_rate);

struct StopMonitor {
    double best_train_loss = std::numeric_limits<double>::infinity();
    double best_val_loss = std::numeric_limits<double>::infinity();
    int epochs_since_improvement = 0;
    int patience = 12;
    double generalization_limit = 2.0;
    double adequate = adequate_loss_threshold;
};

enum class StopDecision {
    keep_going,
    improvement_failure,
    generalization_failure,
    adequate_performance,
};

/// Updates the monitor with one epoch's reports and decides. Precedence:
/// adequate performance, then generalization failure, then improvement
/// failure. Losses are compared as per-sample-per-step values.
StopDecision check_stopping(StopMonitor& mon, const LossReport& train, const LossReport& val);

enum class TerminationReason {
    improvement_failure,
    generalization_failure,
    adequate_performance,
    epoch_limit,
    blowup_abort,
};

const char* termination_reason_name(TerminationReason reason);

struct TrainConfig {
    double learning_rate = 1e-4;
    int batch_size = 32;
    int epochs_max = 2000;
    std::uint64_t seed = 0;
    int stage1_coarsen_factor = 8;
    MaskMode mask_mode = MaskMode::s_only_dense;
    double clip_norm = 1e3;  ///< gradient global-norm clip; <= 0 disables
    int hidden = 16;
    bool clamp_mu = false;

    void validate(int n_steps) const;
};

struct EpochRecord {
    int stage = 0;
    int epoch = 0;  ///< 1-based within the stage
    LossReport train;
    LossReport validation;
    double wall_seconds = 0.0;
};

struct StageSummary {
    int stage = 0;
    TerminationReason reason = TerminationReason::epoch_limit;
    int epochs = 0;
    double final_train_ratio = 0.0;
    double final_val_ratio = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::vector<StageSummary> stages;
    std::string abort_message;  ///< non-empty only after a blowup abort

    bool aborted() const { return !abort_message.empty(); }
};

/// Invoked after every epoch with the fresh record and current parameters.
using EpochCallback = std::function<void(const EpochRecord&, const MlpParams&)>;

/// One pass over the split: seeded shuffle, consecutive batches (final ragged
/// batch included), one gradient + Adam update per batch. Returns the
/// aggregate loss over all samples at the pre-update parameters of their
/// batch.
LossReport run_epoch(MlpParams& p, AdamState& adam, std::span<const SampleWithTruth> split,
                     const ObservationMask& mask, const BioreactorConfig& cfg,
                     const TrainConfig& tcfg, std::uint64_t shuffle_seed);

/// Runs epochs until a stopping decision, the epoch limit, or a blowup.
/// Appends to `history` and returns the stage summary.
StageSummary train_stage(int stage_id, MlpParams& p,
                         std::span<const SampleWithTruth> train_split,
                         std::span<const SampleWithTruth> val_split,
                         const BioreactorConfig& cfg, const TrainConfig& tcfg,
                         TrainHistory& history, const EpochCallback& on_epoch = {});

struct TrainResult {
    MlpParams params;
    TrainHistory history;
};

/// Stage 1 trains on the corpus coarsened by tcfg.stage1_coarsen_factor,
/// stage 2 continues from the stage-1 parameters at full resolution. Each
/// stage starts from a fresh Adam state. On blowup the stage records
/// blowup_abort and the partial history is returned.
TrainResult train_two_stage(const Corpus& corpus, const TrainConfig& tcfg,
                            const InitSpec& init, const EpochCallback& on_epoch = {});

/// Full-resolution training only, from explicit initial parameters.
TrainResult train_single_stage(const Corpus& corpus, const TrainConfig& tcfg,
                               const MlpParams& initial, const EpochCallback& on_epoch = {});

/// Post-training evaluation. Always scores both channels at every step
/// (mask_mode is accepted and ignored by contract); no parameter updates.
LossReport evaluate(const MlpParams& p, std::span<const SampleWithTruth> split,
                    const BioreactorConfig& cfg, MaskMode mask_mode = MaskMode::xs_dense);

/// Dense two-channel loss of each sample separately, in split order.
std::vector<LossReport> per_sample_losses(const MlpParams& p,
                                          std::span<const SampleWithTruth> split,
                                          const BioreactorConfig& cfg);

/// Evaluation grid over the (reactant, substrate) plane. When `visited` is
/// non-empty it flags, per grid node, whether any trajectory state mapped to
/// that node; the surface error is then taken over flagged nodes only.
struct Region {
    double x_lo = 0.0, x_hi = 1.0;
    double s_lo = 0.0, s_hi = 1.0;
    int nx = 64, ns = 64;
    std::vector<std::uint8_t> visited;  ///< nx * ns row-major, optional

    double x_at(int i) const;
    double s_at(int j) const;
};

/// Grid spanning [0, max] in each coordinate over a split's ground truths,
/// with per-node visited flags.
Region visited_region(std::span<const SampleWithTruth> split, int nx = 64, int ns = 64);

/// Root-mean-square difference between the learned rate and the Haldane rate
/// over the region's (visited) grid nodes.
double mu_surface_error(const MlpParams& p, const BioreactorConfig& cfg, const Region& region);

/// CSV: stage,epoch,train_loss,train_ratio,val_loss,val_ratio,wall_seconds
/// rows, then one key-value termination record per stage.
void write_history_csv(std::ostream& out, const TrainHistory& history);

}  // namespace graybox
