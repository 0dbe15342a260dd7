#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "graybox/dynamics.hpp"
#include "graybox/rng.hpp"

namespace graybox {

/// Distribution knobs for synthetic corpus generation.
struct GenConfig {
    double x0_variance = 0.1;
    double s0_variance = 0.01;
    double v0_variance = 2.0;
    double v0_mean = 5.0;
    double v0_floor = 0.5;
    double sin0_mean = 1.0;
    double sin0_variance = 0.04;
    double sin_step_variance = 0.01;
    bool reflect_sin = true;  ///< reflect the feed walk at zero after each increment
    int n_train = 1024;
    int n_validation = 1024;
    int n_test = 1024;
    double max_reject_fraction = 0.01;

    void validate() const;
};

struct Corpus {
    std::vector<SampleWithTruth> train;
    std::vector<SampleWithTruth> validation;
    std::vector<SampleWithTruth> test;
    std::uint64_t seed = 0;
    BioreactorConfig cfg;
    GenConfig gen;
    long rejected_samples = 0;
};

/// Gaussian draws before the positivity policy: x and s centered at zero,
/// v centered at v0_mean, with the configured variances.
State draw_initial_state_raw(Rng& rng, const GenConfig& gen);

/// Raw draw followed by the positivity policy: x and s reflected to be
/// non-negative, v floored at v0_floor.
State sample_initial_state(Rng& rng, const GenConfig& gen);

/// Random-walk feed concentration series: first entry from the configured
/// start distribution, then one normal increment per step.
std::vector<double> sample_sin_series(Rng& rng, int n_steps, const GenConfig& gen);

Sample draw_sample(Rng& rng, int n_steps, const GenConfig& gen);

/// Generates all three splits with ground truth under the Haldane rate.
/// Each sample has its own seed-derived stream, so splits and samples are
/// independent and the corpus is reproducible bit-exactly from (seed, cfg,
/// gen) at any concurrency level. Samples whose trajectories blow up are
/// redrawn; a rejection fraction above gen.max_reject_fraction is a
/// configuration error.
Corpus generate_corpus(std::uint64_t seed, const BioreactorConfig& cfg, const GenConfig& gen);

/// dt grows by `factor`, n_steps shrinks by it; the spanned interval is
/// unchanged. factor must divide n_steps.
BioreactorConfig coarsen_config(const BioreactorConfig& cfg, int factor);

/// Stride-subsamples the feed series and the ground-truth states (indices
/// 0, factor, 2*factor, ...).
SampleWithTruth coarsen(const SampleWithTruth& item, int factor);

std::vector<SampleWithTruth> coarsen_split(const std::vector<SampleWithTruth>& split, int factor);

// Corpus container format: 8-byte magic "GBOXCORP", uint32 version, uint32
// header length, a canonical key=value text block (configs, seed, split
// sizes, byte order), then per-sample records in declared byte order:
// x0 triple, s_in, and the X, S, V ground-truth arrays as float64.
void save_corpus(const std::string& path, const Corpus& corpus);
Corpus load_corpus(const std::string& path);

/// Per-step maxima across a split plus their running (cumulative over time)
/// counterparts, all over the corpus ground truths.
struct SplitMaxima {
    std::vector<double> max_x;
    std::vector<double> max_s;
    std::vector<double> running_max_x;
    std::vector<double> running_max_s;
};

SplitMaxima split_maxima(const std::vector<SampleWithTruth>& split);

/// CSV: step,max_X,max_S,running_max_X,running_max_S.
void write_stats_csv(std::ostream& out, const SplitMaxima& maxima);

}  // namespace graybox
