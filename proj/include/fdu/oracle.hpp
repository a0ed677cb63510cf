// oracle.hpp — brute-force references the sampled estimates are checked against
//
// Everything here avoids Monte Carlo: direct integration of the master
// equation, the algebraic steady state from the generator's null space,
// two-time correlations via the quantum regression rule, the finite-interval
// emission spectrum as a quadrature form on that correlation table, and a
// deterministic reconstruction of the density matrix by summing every decay
// record on the grid up to a truncation depth.

#pragma once

#include <vector>

#include "fdu/frequency_grid.hpp"
#include "fdu/model.hpp"

namespace fdu {

// Right-hand side of the master equation
//   d rho/dt = -i[H, rho] + sum_c (a rho a^dag - 1/2 {a^dag a, rho}).
ComplexMatrix lindblad_rhs(const ModelSpec& model, const ComplexMatrix& rho);

struct MasterSolution {
    std::vector<double> times;
    std::vector<ComplexMatrix> states;
};

// Fixed-step RK4 integration of the master equation from rho0 over [0, tau].
// The generator is traceless, so the trace is conserved up to rounding; a
// drift beyond 1e-6 at any sample time throws ValidationError.
MasterSolution integrate_master(const ModelSpec& model, const ComplexMatrix& rho0,
                                double tau, double dt, int target_samples = 400);

// Tr(O rho(t)) along a solution.
std::vector<double> observable_series(const MasterSolution& sol, const ComplexMatrix& op);

// Total expected emission sum_c integral_0^tau Tr(a_c^dag a_c rho(s)) ds,
// accumulated with the trapezoid rule on every integration step.
double emission_integral(const ModelSpec& model, const ComplexMatrix& rho0, double tau,
                         double dt);

// Generator as a dim^2 x dim^2 matrix acting on column-stacked rho.
ComplexMatrix liouvillian_matrix(const ModelSpec& model);

// Unique trace-one steady state from the null space of the generator
// (singular value decomposition). Throws ConfigError when the null space is
// degenerate or traceless, NumericalFailure when the residual exceeds 1e-10.
ComplexMatrix steady_state(const ModelSpec& model);

// Two-time emission correlation on a uniform coarse grid of the interval:
//   values(j, k) = Tr[a^dag Lambda_{t_j - t_k}(a rho(t_k))]   for j >= k,
// propagated with the same master integrator (quantum regression), the upper
// triangle filled by conjugate symmetry. `channel` indexes model.channels;
// the coarse spacing is corr_stride integration steps.
struct CorrelationTable {
    double tau = 0.0;
    std::vector<double> times;
    ComplexMatrix values;
};
CorrelationTable two_time_correlation(const ModelSpec& model, const ComplexMatrix& rho0,
                                      int channel, double tau, double dt,
                                      int corr_stride = 10);

// Finite-interval spectrum (1/tau) * v^dag C v with trapezoid weights
// v_j = w_j * exp(-i omega t_j). Real non-negative up to quadrature noise;
// values below -1e-8 throw NumericalFailure, small negatives clamp to zero.
double finite_tau_spectrum(const CorrelationTable& corr, double omega);

// ---- deterministic reconstruction ------------------------------------------

// Sum over every decay record on the grid up to length n_max, starting from
// the pure state psi0 and evaluated at target_samples + 1 evenly spaced
// times. by_level[ti][k] collects the records of length exactly k at
// times[ti]; density(ti, n) truncates the sum at n decays.
struct Reconstruction {
    std::vector<double> times;
    std::vector<std::vector<ComplexMatrix>> by_level; // [time][level]
    long n_blocks = 0;
    ComplexMatrix density(int ti, int n = -1) const; // n = -1: full depth
};

// Record order matters: one state per ordered tuple of (channel, frequency)
// events, summed as an incoherent mixture. The term count
// (channels * grid size)^n_max must not exceed the budget (ConfigError).
Reconstruction reconstruct_density_ordered(const ModelSpec& model, const FrequencyGrid& grid,
                                           const ComplexVector& psi0, double tau, double dt,
                                           int n_max, int target_samples = 8,
                                           double budget = 1e6);

// Record order ignored: one state per multiset of events, integrated on the
// multiset lattice where removing one copy of an event type with multiplicity
// k_e contributes a source of weight k_e / sqrt(tau); the density sum carries
// the matching 1 / prod_e(k_e!) factor (equivalently, 1/n! on the full
// tuple sum). n_max is additionally limited by the per-block source budget of
// the integrator (at most 4 distinct event types per record).
Reconstruction reconstruct_density_unordered(const ModelSpec& model,
                                             const FrequencyGrid& grid,
                                             const ComplexVector& psi0, double tau, double dt,
                                             int n_max, int target_samples = 8,
                                             double budget = 1e6);

} // namespace fdu
