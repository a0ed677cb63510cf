// errors.hpp — exception types shared across the library

#pragma once

#include <stdexcept>
#include <string>

namespace fdu {

// Invalid or inconsistent run configuration (unknown key, violated bound, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// An integration produced a non-finite value. `time` is the simulation time
// (units 1/Gamma) at which the failure was detected.
class NumericalFailure : public std::runtime_error {
public:
    NumericalFailure(const std::string& what, double time)
        : std::runtime_error(what + " (t=" + std::to_string(time) + "/Gamma)"),
          time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

// A physical invariant drifted beyond its bound, or a validation battery
// reported at least one failing check.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace fdu
