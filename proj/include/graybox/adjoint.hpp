#pragma once

#include <span>
#include <string>
#include <vector>

#include "graybox/dynamics.hpp"
#include "graybox/mlp.hpp"

namespace graybox {

/// Average squared loss per sample per observed step at or below this value
/// counts as adequate; loss ratios are reported against it.
inline constexpr double adequate_loss_threshold = 3e-5;

enum class MaskMode { s_only_dense, xs_every_8th, xs_dense };

MaskMode parse_mask_mode(const std::string& name);
const char* mask_mode_name(MaskMode mode);

/// Which trajectory outputs contribute to the loss. Index t refers to the
/// state after step t (trajectory index t + 1); the shared initial state is
/// never scored.
struct ObservationMask {
    std::vector<bool> observe_x;
    std::vector<bool> observe_s;

    int n_steps() const { return static_cast<int>(observe_x.size()); }

    /// Steps where at least one channel is observed.
    long n_observed_steps() const;

    void validate() const;
};

ObservationMask make_mask(MaskMode mode, int n_steps);

struct LossReport {
    double total = 0.0;
    double per_sample_per_step = 0.0;
    double loss_ratio = 0.0;
    long n_samples = 0;
    long n_observed_steps = 0;
};

LossReport make_loss_report(double total, long n_samples, long n_observed_steps);

/// Sum of squared prediction errors over the observed (channel, step) pairs.
/// The volume channel never contributes.
LossReport trajectory_loss(const Trajectory& pred, const Trajectory& truth,
                           const ObservationMask& mask);

/// The learned rate as a plain state-to-rate function. clamp_nonneg maps
/// negative network outputs to zero.
MuFn mlp_mu_fn(const MlpParams& p, bool clamp_nonneg = false);

struct BatchGradient {
    MlpGrads grads;
    LossReport loss;
};

/// Exact gradient of the batch total loss with respect to the network
/// parameters: a storing forward pass per sample, then a reverse sweep that
/// chains the per-step loss terms, the Euler-step Jacobian, and the network
/// backward pass. Per-sample gradients are summed in sample-index order.
BatchGradient bptt_gradient(const MlpParams& p, std::span<const SampleWithTruth> batch,
                            const ObservationMask& mask, const BioreactorConfig& cfg,
                            bool clamp_mu = false);

/// Central finite difference of the batch total loss over every parameter.
/// Costs two integrations per parameter; intended for tests and checks.
MlpGrads fd_gradient(const MlpParams& p, std::span<const SampleWithTruth> batch,
                     const ObservationMask& mask, const BioreactorConfig& cfg,
                     double step, bool clamp_mu = false);

/// Forward-only batch loss at fixed parameters.
LossReport batch_loss(const MlpParams& p, std::span<const SampleWithTruth> batch,
                      const ObservationMask& mask, const BioreactorConfig& cfg,
                      bool clamp_mu = false);

}  // namespace graybox
