#include "fdu/frequency_grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fdu {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

FrequencyGrid::FrequencyGrid(double tau, double omega_max)
    : tau_(tau), omega_max_(omega_max) {
    if (!(tau > 0.0)) throw ConfigError("frequency grid: tau must be positive");
    if (!(omega_max > 0.0))
        throw ConfigError("frequency grid: omega_max must be positive");
    // Small slack so cutoffs that are exact multiples of the spacing do not
    // fall off the grid through rounding.
    p_max_ = static_cast<int>(std::floor(omega_max * tau / kTwoPi + 1e-9));
    if (p_max_ < 1)
        throw ConfigError(
            "frequency grid: omega_max * tau < 2*pi leaves no nonzero frequency; "
            "increase omega_max or tau");
    freqs_.reserve(2 * p_max_ + 1);
    for (int p = -p_max_; p <= p_max_; ++p) freqs_.push_back(kTwoPi * p / tau_);
}

double FrequencyGrid::spacing() const { return kTwoPi / tau_; }

int FrequencyGrid::index_of(double omega) const {
    const double step = spacing();
    const int i = static_cast<int>(std::lround(omega / step)) + p_max_;
    if (i < 0 || i >= size()) return -1;
    if (std::abs(freqs_[static_cast<std::size_t>(i)] - omega) >
        1e-9 * (1.0 + std::abs(omega)))
        return -1;
    return i;
}

int FrequencyGrid::require_index(double omega) const {
    const int i = index_of(omega);
    if (i < 0)
        throw std::invalid_argument("frequency " + std::to_string(omega) +
                                    " is not a grid member (spacing " +
                                    std::to_string(spacing()) + ")");
    return i;
}

double sinc_window(double omega, double tau) {
    if (!(tau > 0.0)) throw ConfigError("sinc_window: tau must be positive");
    const double x = 0.5 * omega * tau; // = pi * (omega tau / 2pi)
    double s;
    if (std::abs(x) < 1e-6) {
        const double x2 = x * x;
        s = 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
    } else {
        s = std::sin(x) / x;
    }
    return tau / kTwoPi * s * s;
}

} // namespace fdu
