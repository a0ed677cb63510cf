// run.hpp — mode orchestration on top of the library: initial states, the
// parallel ensemble driver, truncation-bias reporting, the validation
// battery, and the five CLI modes.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fdu/config.hpp"
#include "fdu/monte_carlo.hpp"
#include "fdu/oracle.hpp"

namespace fdu {

// Trials are processed in fixed chunks merged in index order, so results are
// byte-identical for any worker count. Progress hooks fire on chunk borders.
inline constexpr long kTrialChunk = 25;

ComplexVector initial_pure_state(const ModelSpec& model, const std::string& name);
ComplexMatrix initial_density(const ModelSpec& model, const std::string& name);

// FREQ_UNRAVEL_WORKERS, else hardware concurrency, else 1.
int worker_count_from_env();

struct EnsembleRunOptions {
    TrialOptions trial;
    std::vector<std::string> observable_names; // aligned with trial.observables
    long n_trials = 0;
    std::uint64_t seed = 1;
    int workers = 0; // 0 = auto
    // Called after each in-order chunk merge with (trials merged, accumulator).
    std::function<void(std::size_t, const EnsembleAccumulator&)> on_progress;
};

EnsembleAccumulator run_ensemble(const ModelSpec& model, const FrequencyGrid& grid,
                                 const ComplexMatrix& rho0, double tau, double dt,
                                 const EnsembleRunOptions& options);

// Estimated downward bias of the trace estimate at t = tau from the two
// truncations: each sampled decay loses the off-grid Lorentzian tail fraction
// ~ 1/(pi*omega_max), and decay counts beyond n_max are extrapolated
// geometrically from the two deepest resolved levels.
double truncation_bias_estimate(const std::vector<double>& level_trace_mean,
                                double omega_max);

// Reported bound on the spectral weight lost beyond +-omega_max: emission
// lines of width ~Gamma lose 2/(pi*omega_max) of their mass, and the
// sinc^2 observation window adds 2/(pi*tau*omega_max).
double spectrum_truncation_bound(double total, double omega_max, double tau);

struct ValidationCheck {
    std::string name;
    double measured = 0.0;
    double bound = 0.0;
    bool pass = false;
    std::string note;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    bool all_pass() const;
};

// The full invariant battery (quick = skip the Monte Carlo smoke test and the
// long-interval convolution report). Uses fixed internal instances plus the
// config's omega_rabi/tau for the master-equation checks.
ValidationReport run_validation(const RunConfig& config, bool quick);

// Executes one validated config. Returns the process exit code (0, or 3 when
// validate mode finds failing checks); config and numerical errors throw.
int run_mode(const RunConfig& config);

} // namespace fdu
