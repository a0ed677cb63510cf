#include <cmath>

#include "doctest.h"
#include "fdu/errors.hpp"
#include "fdu/frequency_grid.hpp"

using namespace fdu;

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

TEST_CASE("grid frequencies are the interval harmonics inside the cutoff") {
    const FrequencyGrid g(4.0, 16.0);
    CHECK(g.spacing() == doctest::Approx(kTwoPi / 4.0).epsilon(1e-15));
    CHECK(g.p_max() == 10); // floor(16*4 / 2pi) = floor(10.18)
    CHECK(g.size() == 21);
    CHECK(g.frequency(g.p_max()) == 0.0); // center index is omega = 0
    CHECK(g.frequency(0) == doctest::Approx(-10 * kTwoPi / 4.0).epsilon(1e-15));
    CHECK(g.frequency(g.size() - 1) == doctest::Approx(10 * kTwoPi / 4.0).epsilon(1e-15));
    // symmetric pairing
    for (int i = 0; i < g.size(); ++i)
        CHECK(g.frequency(i) == doctest::Approx(-g.frequency(g.size() - 1 - i)).epsilon(1e-14));
}

TEST_CASE("grid sizes for the standard instances") {
    CHECK(FrequencyGrid(1.0, 32.0).p_max() == 5);  // 32/(2pi) = 5.09
    CHECK(FrequencyGrid(1.0, 8.0).p_max() == 1);   // 8/(2pi) = 1.27
    CHECK(FrequencyGrid(0.5, 26.0).p_max() == 2);  // 13/(2pi) = 2.07
    CHECK(FrequencyGrid(0.5, 26.0).size() == 5);
    // cutoff exactly on a harmonic stays on the grid despite rounding
    CHECK(FrequencyGrid(1.0, 2.0 * kTwoPi).p_max() == 2);
}

TEST_CASE("grid rejects an empty frequency range") {
    CHECK_THROWS_AS(FrequencyGrid(1.0, 2.0), ConfigError); // omega_max tau < 2 pi
    CHECK_THROWS_AS(FrequencyGrid(-1.0, 30.0), ConfigError);
    CHECK_THROWS_AS(FrequencyGrid(1.0, 0.0), ConfigError);
}

TEST_CASE("index lookup round-trips and rejects off-grid frequencies") {
    const FrequencyGrid g(2.0, 10.0);
    for (int i = 0; i < g.size(); ++i) CHECK(g.index_of(g.frequency(i)) == i);
    CHECK(g.index_of(0.5 * g.spacing()) == -1);
    CHECK(g.index_of(1e9) == -1);
    CHECK(g.require_index(g.spacing()) == g.p_max() + 1);
    CHECK_THROWS_AS(g.require_index(0.1), std::invalid_argument);
}

TEST_CASE("sinc window: peak, zeros, symmetry, unit mass") {
    const double tau = 3.0;
    CHECK(sinc_window(0.0, tau) == doctest::Approx(tau / kTwoPi).epsilon(1e-12));
    // zeros at the nonzero harmonics of the interval
    for (int p = 1; p <= 4; ++p)
        CHECK(std::abs(sinc_window(p * kTwoPi / tau, tau)) < 1e-15);
    for (double w : {0.3, 1.7, 5.0})
        CHECK(sinc_window(w, tau) == doctest::Approx(sinc_window(-w, tau)).epsilon(1e-14));
    // integral over all frequencies equals one (trapezoid out to the far tail)
    const double h = 0.002;
    double mass = 0.0;
    for (double w = -300.0; w <= 300.0; w += h) mass += sinc_window(w, tau) * h;
    CHECK(mass == doctest::Approx(1.0).epsilon(5e-3)); // 1/omega tail truncation
}
