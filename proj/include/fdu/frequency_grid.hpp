// frequency_grid.hpp — discrete decay-frequency grid and the spectral window
//
// Decay records label each emission with a frequency drawn from the discrete
// grid omega_p = 2*pi*p / tau, |p| <= p_max, where tau is the length of the
// evolution interval and p_max = floor(omega_max * tau / (2*pi)). The grid is
// symmetric about zero and always contains omega = 0.

#pragma once

#include <vector>

#include "fdu/errors.hpp"

namespace fdu {

class FrequencyGrid {
public:
    // Throws ConfigError if the cutoff admits no nonzero frequency
    // (omega_max * tau < 2*pi), with a hint to enlarge omega_max or tau.
    FrequencyGrid(double tau, double omega_max);

    double tau() const { return tau_; }
    double omega_max() const { return omega_max_; }
    int p_max() const { return p_max_; }
    int size() const { return 2 * p_max_ + 1; }
    double spacing() const; // 2*pi/tau

    // i in [0, size()), ascending; frequency(p_max()) == 0.
    double frequency(int i) const { return freqs_.at(i); }
    const std::vector<double>& frequencies() const { return freqs_; }

    // Index of a grid member, or -1 if omega is not on the grid
    // (absolute tolerance 1e-9 * (1 + |omega|)).
    int index_of(double omega) const;
    // Same, but throws std::invalid_argument for off-grid frequencies.
    int require_index(double omega) const;

private:
    double tau_;
    double omega_max_;
    int p_max_;
    std::vector<double> freqs_;
};

inline FrequencyGrid make_grid(double tau, double omega_max) {
    return FrequencyGrid(tau, omega_max);
}

// Spectral line-shape window of one finite observation interval:
//   (tau/2pi) * sinc^2(omega*tau/2pi),  sinc(x) = sin(pi x)/(pi x).
// Even, non-negative, peak tau/2pi at omega = 0, unit integral over omega.
double sinc_window(double omega, double tau);

} // namespace fdu
