// config.hpp — run configuration: flat key = value documents with defaults
//
// Grammar: one `key = value` pair per line; blank lines, `# comments`, and
// decorative `[section]` headers are ignored. Keys are unique; unknown or
// duplicate keys are errors naming the key. Defaults and invariants are
// applied by validate_config so that command-line overrides can be layered
// between parsing and validation.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fdu {

struct RunConfig {
    std::string mode;                 // trajectory|ensemble|spectrum|reconstruct|validate
    std::string model = "two_level";
    double omega_rabi = 0.0;          // Rabi drive in units of the decay rate
    double tau = 0.0;                 // observation interval, required > 0
    double omega_max = -1.0;          // grid cutoff; default omega_rabi + 6
    double dt = -1.0;                 // default 0.05/(omega_max + omega_rabi + 1)
    int n_max = 8;                    // decay-count cutoff
    bool n_max_set = false;           // reconstruct mode lowers the default to 3
    long n_trials = 0;                // required >= 2 for ensemble/spectrum
    std::uint64_t seed = 1;
    std::string observable = "excited_population";
    std::string initial_state = "ground"; // ground | excited | steady
    std::vector<std::pair<int, double>> record; // trajectory mode: channel:omega list
    int channel = 0;                  // emission channel for spectrum mode
    bool quick = false;               // validate mode: skip the slow checks
    std::string output;               // default freq_unravel_<mode>.csv/.json
    std::string summary;              // default <output stem>_summary.json
};

// Parses the document into a RunConfig without applying defaults or
// cross-field invariants. Throws ConfigError on syntax problems, unknown
// keys, duplicate keys, or unparseable values.
RunConfig parse_config(const std::string& text);

// Reads the file and parses it. Throws ConfigError if unreadable.
RunConfig parse_config_file(const std::string& path);

// Fills documented defaults and enforces every invariant:
//   dt <= 0.1/(omega_max + omega_rabi + 1), grid p_max >= 1, tau > 0,
//   n_trials >= 2 for ensemble/spectrum, known mode / model / state names.
// Throws ConfigError naming the offending key and constraint.
void validate_config(RunConfig& config);

inline const std::vector<std::string>& known_modes() {
    static const std::vector<std::string> modes = {"trajectory", "ensemble", "spectrum",
                                                   "reconstruct", "validate"};
    return modes;
}

} // namespace fdu
