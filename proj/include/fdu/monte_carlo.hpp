// monte_carlo.hpp — importance-sampled ensembles of decay trajectories
//
// One trial:
//   1. draw a pure initial state from the eigendecomposition of rho0;
//   2. for stage n = 1..n_max: integrate the hierarchy for the current
//      record, sample the n-th decay (channel, frequency) from the candidate
//      squared norms at tau, and append it to the record;
//   3. the running estimate for Tr(O rho(t)) sums the no-decay term plus, per
//      stage, the candidate-family observable values weighted by the inverse
//      probability of the record sampled so far. Weights use the norms at
//      t = tau for every sample time.
//
// Per-trial randomness comes from a counter-based stream derived from
// (master seed, trial index), so trials are reproducible individually and
// independent of scheduling order.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fdu/trajectory.hpp"

namespace fdu {

// ---- deterministic per-trial randomness ------------------------------------

// SplitMix64 walk whose origin mixes the master seed with the stream index.
class TrialRng {
public:
    TrialRng(std::uint64_t master_seed, std::uint64_t stream)
        : state_(master_seed + 0x9E3779B97F4A7C15ULL * (stream + 1)) {}
    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

// ---- sampling building blocks ----------------------------------------------

// Draws an eigenvector of rho0 with probability equal to its eigenvalue.
// rho0 must be Hermitian (1e-10), unit trace (1e-10) and positive
// semidefinite (eigenvalues >= -1e-10); violations throw invalid_argument.
ComplexVector sample_initial_state(const ComplexMatrix& rho0, TrialRng& rng);

struct DecayDistribution {
    std::vector<double> probabilities; // flat channel*n_freqs + freq, sums to 1
    int n_channels = 0;
    int n_freqs = 0;
    double total_norm2 = 0.0;
    // Returns the flat index of the sampled (channel, frequency).
    int sample(TrialRng& rng) const;
    int channel_of(int flat) const { return flat / n_freqs; }
    int freq_of(int flat) const { return flat % n_freqs; }
};

// Normalizes candidate squared norms into sampling probabilities. Returns
// nullopt when the total is below 1e-12 (trial terminates: no further decay
// has any weight). Negative or non-finite entries throw invalid_argument.
std::optional<DecayDistribution> decay_distribution(const std::vector<double>& norm2,
                                                    int n_channels, int n_freqs);

// ---- one trial -------------------------------------------------------------

struct TrialOptions {
    int n_max = 8;
    int spectrum_channel = -1;
    std::vector<ComplexMatrix> observables;
    int target_samples = 400;
};

// Candidate family evaluated while sampling decay number `stage` (1-based).
struct TrialFamily {
    double p_record = 1.0;     // probability of the record before this stage
    int sampled_flat = -1;     // flat candidate index chosen, -1 if terminated
    double p_sampled = 0.0;    // probability of that choice
    std::vector<std::vector<double>> family_obs; // [obs][time]
    std::vector<double> family_norm2;            // [time]
    std::vector<double> candidate_norm2_tau;     // flat
    std::vector<double> partial_top_norm2_tau;   // [freq], spectrum mode
};

struct TrialResult {
    std::uint64_t index = 0;
    std::vector<double> times;
    std::vector<double> zero_norm2;            // no-decay squared norm series
    std::vector<std::vector<double>> zero_obs; // [obs][time]
    std::vector<TrialFamily> families;         // stages 1..n_done
    int terminated_stage = -1;                 // stage with no viable decay, or -1
    DecayRecord record;                        // events sampled in order

    // Inverse-probability estimate of Tr(O_obs rho(t)) at sample index ti.
    double estimate(int obs, int ti) const;
    // Same for the trace (identity observable).
    double trace_estimate(int ti) const;
    // Spectral estimate at grid frequency j (spectrum mode trials).
    double spectrum_estimate(int j) const;
    double spectrum_total(int n_freqs) const;
};

TrialResult run_trial(const ModelSpec& model, const FrequencyGrid& grid,
                      const ComplexMatrix& rho0, double tau, double dt, TrialRng& rng,
                      const TrialOptions& options, std::uint64_t trial_index = 0);

// ---- ensemble accumulation -------------------------------------------------

struct SeriesStats {
    std::vector<double> mean;
    std::vector<double> stderr_; // sample stddev / sqrt(n)
};

struct EnsembleEstimate {
    std::size_t n_trials = 0;
    std::vector<double> times;
    std::vector<std::string> observable_names;
    std::vector<SeriesStats> observables; // aligned with observable_names
    SeriesStats trace;
    SeriesStats spectrum;          // over grid frequencies, at t = tau
    double spectrum_total_mean = 0.0;
    double spectrum_total_stderr = 0.0;
    // Mean contribution of each decay count to the trace estimate at tau and
    // the sample variance of that contribution (stage 0 = no decay).
    std::vector<double> level_trace_mean;
    std::vector<double> level_trace_var;
    std::size_t terminated_trials = 0;
};

// Streaming mean/variance accumulator (Welford update, parallel-variance
// merge). Accumulation is order-independent to roundoff; merging partial
// accumulators in a fixed order makes multi-worker runs bit-reproducible.
class EnsembleAccumulator {
public:
    struct Layout {
        std::vector<std::string> observable_names;
        std::vector<double> times;
        int n_freqs = 0; // 0 disables spectrum accumulation
        int n_levels = 9; // stages 0..n_max
    };
    explicit EnsembleAccumulator(Layout layout);

    void add(const TrialResult& trial);
    void merge(const EnsembleAccumulator& other);
    std::size_t count() const { return count_; }

    // Throws ConfigError when fewer than two trials were accumulated.
    EnsembleEstimate finalize() const;

private:
    // Welford running mean / M2 per slot; merge is the parallel-variance
    // combination. All slots of one accumulator share the trial count.
    struct StatVec {
        std::vector<double> mean, m2;
        void resize(std::size_t n);
        void add(std::size_t i, double x, double n_after);
        void merge(const StatVec& o, double n_self, double n_other);
    };
    Layout layout_;
    std::size_t count_ = 0;
    std::size_t terminated_ = 0;
    std::vector<StatVec> obs_; // per observable, over times
    StatVec trace_;            // over times
    StatVec spectrum_;         // over frequencies
    StatVec spectrum_total_;   // single entry
    StatVec level_trace_;      // over stages, trace contribution at tau
};

} // namespace fdu
