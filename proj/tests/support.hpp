// Shared helpers for the unit tests: closed-form references for the undriven
// atom, scratch-file management for config/CLI round trips.

#pragma once

#include <cstdio>
#include <fstream>
#include <random>
#include <string>

#include "fdu/numerics.hpp"

namespace testsupport {

// Squared norm at t = tau of the one-decay candidate at frequency omega for
// the undriven atom started in the excited state (analytic integral of
// (1/sqrt(tau)) e^{(i omega - 1/2)(tau - s)} e^{-s/2} ... collapses to the
// resolvent form below).
inline double undriven_candidate_norm2(double omega, double tau) {
    const fdu::Complex pole(-0.5, omega);
    return (1.0 / tau) * std::norm((std::exp(pole * tau) - 1.0) / pole);
}

// Matching finite-interval spectral density of the undriven atom.
inline double undriven_spectrum(double omega, double tau) {
    return undriven_candidate_norm2(omega, tau);
}

// Unique scratch path under the build tree working directory.
inline std::string scratch_path(const std::string& stem) {
    static int counter = 0;
    return "scratch_" + stem + "_" + std::to_string(counter++);
}

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in),
                       std::istreambuf_iterator<char>());
}

} // namespace testsupport
