// numerics.hpp — dense complex linear algebra aliases and a fixed-step
// classical Runge-Kutta integrator
//
// Vectors and matrices are Eigen dynamic-size complex doubles. All
// integrators here use the classical 4th-order scheme with a fixed step;
// step size is chosen by the caller from the stiffest frequency present.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "fdu/errors.hpp"

namespace fdu {

using Complex       = std::complex<double>;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

inline constexpr Complex kImag{0.0, 1.0};

// ---- basic operations ------------------------------------------------------

// m * v with an explicit dimension check.
inline ComplexVector matvec(const ComplexMatrix& m, const ComplexVector& v) {
    if (m.cols() != v.size())
        throw std::invalid_argument("matvec: dimension mismatch (" +
                                    std::to_string(m.cols()) + " vs " +
                                    std::to_string(v.size()) + ")");
    return m * v;
}

// <v|op|v> on an (unnormalized) vector. Real for Hermitian op up to rounding.
inline Complex expectation(const ComplexMatrix& op, const ComplexVector& v) {
    if (op.rows() != op.cols() || op.cols() != v.size())
        throw std::invalid_argument("expectation: dimension mismatch");
    return v.dot(op * v); // Eigen's dot conjugates the left argument
}

// ---- time grid -------------------------------------------------------------

// Fixed-step layout of one integration interval [0, tau]: the requested step
// is shrunk so that tau is an integer number of steps, and sample points are
// placed every ceil(n_steps / target_samples) steps, always including 0 and
// tau.
struct TimeGrid {
    double dt = 0.0; // effective step, <= requested
    int n_steps = 0;
    std::vector<int> sample_steps;    // ascending; first 0, last n_steps
    std::vector<double> sample_times; // sample_steps[k] * dt
};

inline TimeGrid make_time_grid(double tau, double dt_max, int target_samples = 400,
                               int step_multiple = 1) {
    if (!(tau > 0.0) || !(dt_max > 0.0))
        throw std::invalid_argument("make_time_grid: tau and dt must be positive");
    if (target_samples < 1 || step_multiple < 1)
        throw std::invalid_argument("make_time_grid: bad sampling parameters");
    TimeGrid g;
    g.n_steps = static_cast<int>(std::ceil(tau / dt_max - 1e-9));
    if (g.n_steps < 1) g.n_steps = 1;
    if (g.n_steps % step_multiple != 0)
        g.n_steps += step_multiple - g.n_steps % step_multiple;
    g.dt = tau / g.n_steps;
    const int stride = std::max(
        1, static_cast<int>(std::ceil(static_cast<double>(g.n_steps) / target_samples)));
    for (int s = 0; s < g.n_steps; s += stride) g.sample_steps.push_back(s);
    g.sample_steps.push_back(g.n_steps);
    g.sample_times.reserve(g.sample_steps.size());
    for (int s : g.sample_steps) g.sample_times.push_back(s * g.dt);
    return g;
}

// ---- RK4 -------------------------------------------------------------------

// One classical RK4 step for any Eigen-like state (vector or matrix).
// f(t, y) returns dy/dt. Throws NumericalFailure if the result is not finite.
template <class State, class Deriv>
State rk4_step(Deriv&& f, const State& y, double t, double dt) {
    State k1 = f(t, y);
    State k2 = f(t + 0.5 * dt, State(y + (0.5 * dt) * k1));
    State k3 = f(t + 0.5 * dt, State(y + (0.5 * dt) * k2));
    State k4 = f(t + dt, State(y + dt * k3));
    State next = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite())
        throw NumericalFailure("rk4_step produced a non-finite state", t + dt);
    return next;
}

// Integrate y over [0, tau] on the given time grid. on_sample(sample_index,
// time, y) fires at every sample point, including t = 0 and t = tau.
template <class State, class Deriv, class Sampler>
void rk4_integrate(Deriv&& f, State& y, const TimeGrid& grid, Sampler&& on_sample) {
    std::size_t next_sample = 0;
    for (int step = 0; step < grid.n_steps; ++step) {
        if (next_sample < grid.sample_steps.size() &&
            grid.sample_steps[next_sample] == step) {
            on_sample(next_sample, grid.sample_times[next_sample], y);
            ++next_sample;
        }
        y = rk4_step(f, y, step * grid.dt, grid.dt);
    }
    if (next_sample < grid.sample_steps.size() &&
        grid.sample_steps[next_sample] == grid.n_steps)
        on_sample(next_sample, grid.sample_times[next_sample], y);
}

} // namespace fdu
