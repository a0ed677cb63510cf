// trajectory.hpp — frequency-resolved decay trajectories
//
// A trajectory is conditioned on a record of decay events, each labelled by a
// jump channel and a frequency from the discrete grid. Conditioned states are
// unnormalized and evolve continuously; there are no jump discontinuities.
// Evolving a record of length n ("the chain") also produces, in the same
// lockstep integration sweep:
//
//   * one candidate state per (channel, grid frequency) for the (n+1)-th
//     decay, whose squared norms at t = tau define the next sampling
//     distribution;
//   * optionally, for one designated channel, a ladder of spectral partial
//     states per grid frequency whose squared norms at tau estimate the
//     emission spectrum.
//
// All states integrate with fixed-step RK4; frequencies enter the equations
// as constant -i*omega phase shifts on their blocks. Nothing is renormalized.

#pragma once

#include <optional>
#include <vector>

#include "fdu/block_system.hpp"
#include "fdu/frequency_grid.hpp"
#include "fdu/model.hpp"

namespace fdu {

struct DecayEvent {
    int channel = 0;
    double omega = 0.0; // must be a grid member
};

struct DecayRecord {
    std::vector<DecayEvent> events;
    std::size_t size() const { return events.size(); }
    bool empty() const { return events.empty(); }
};

// Final-time snapshot of one hierarchy sweep.
struct HierarchyState {
    // chain[k] = state conditioned on the first k record events, k = 0..n.
    std::vector<ComplexVector> chain;
    // candidates[channel][freq index] = chain top extended by one more decay.
    std::vector<std::vector<ComplexVector>> candidates;
    // partials[freq index][level m] = state with the first m record events
    // plus one spectral-filter photon at that frequency (spectrum mode only,
    // m = 0..n).
    std::vector<std::vector<ComplexVector>> partials;
};

// Scalar series recorded at the sample times of one sweep. Observable values
// are Re<psi|O|psi> on the unnormalized states.
struct TrajectoryTimeSeries {
    std::vector<double> times;
    std::vector<std::vector<double>> level_norm2;            // [chain level][time]
    std::vector<std::vector<std::vector<double>>> level_obs; // [obs][level][time]
    std::vector<std::vector<double>> family_obs_sum;         // [obs][time], sum over candidates
    std::vector<double> family_norm2_sum;                    // [time], sum over candidates
    std::vector<double> candidate_norm2_tau;                 // flat channel*n_freqs + freq
    std::vector<double> partial_top_norm2_tau;               // [freq], spectrum mode
};

struct OrderedOptions {
    int spectrum_channel = -1;              // -1 disables the spectral ladder
    std::vector<ComplexMatrix> observables; // recorded per level and per family
    int target_samples = 400;
};

struct OrderedResult {
    TrajectoryTimeSeries series;
    HierarchyState state;
};

// Integrates the chain for `record`, the candidate family for the next decay,
// and (optionally) the spectral ladder over [0, tau]. psi0 must be normalized
// within 1e-9; record frequencies must be grid members.
OrderedResult evolve_ordered_hierarchy(const ModelSpec& model, const FrequencyGrid& grid,
                                       const DecayRecord& record, const ComplexVector& psi0,
                                       double tau, double dt,
                                       const OrderedOptions& options = {});

// No-decay trajectory alone: d psi/dt = -i H_eff psi.
struct ZeroDecayResult {
    std::vector<double> times;
    std::vector<double> norm2;
    std::vector<std::vector<double>> obs; // [obs][time]
    ComplexVector final_state;
};
ZeroDecayResult evolve_zero_decay(const ModelSpec& model, const ComplexVector& psi0,
                                  double tau, double dt,
                                  const std::vector<ComplexMatrix>& observables = {},
                                  int target_samples = 400);

// Order-insensitive hierarchy over all subsets of `events` (n <= cap; the
// exponential cost limits this to small records). Events are canonicalized by
// sorting on (channel, frequency index), so permuted inputs produce
// bit-identical states. states[mask] corresponds to the subset of canonical
// events selected by mask; states[(1<<n)-1] is the full-record state.
struct UnorderedResult {
    std::vector<DecayEvent> canonical_events;
    std::vector<ComplexVector> states; // 2^n entries at t = tau
};
UnorderedResult evolve_unordered(const ModelSpec& model, const FrequencyGrid& grid,
                                 const std::vector<DecayEvent>& events,
                                 const ComplexVector& psi0, double tau, double dt,
                                 int cap = 3);

// Residual of the jump-sum completeness identity at eval_time (default tau):
//   || sum_omega candidate(ch, omega) - (sqrt(tau)/2) op_ch chain_top ||_2,
// maximized over channels. Candidates and chain keep the full-interval
// normalization 1/sqrt(tau) even when evaluated before tau. Vanishes like
// 1/omega_max for records whose chain top has zero jump amplitude at t = 0;
// an initial state with a_ch psi(0) != 0 and an empty record leaves an O(1)
// offset at eval_time == tau (second delta endpoint of the frequency comb).
double sum_identity_residual(const ModelSpec& model, const FrequencyGrid& grid,
                             const DecayRecord& record, const ComplexVector& psi0,
                             double tau, double dt,
                             std::optional<double> eval_time = std::nullopt);

} // namespace fdu
