#include "fdu/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "fdu/errors.hpp"

namespace fdu {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(value, &used);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected a number, got '" + value + "'");
    }
    if (used != value.size())
        throw ConfigError("key '" + key + "': trailing characters in '" + value + "'");
    return out;
}

long parse_long(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    long out = 0;
    try {
        out = std::stol(value, &used);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
    }
    if (used != value.size())
        throw ConfigError("key '" + key + "': trailing characters in '" + value + "'");
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    unsigned long long out = 0;
    try {
        out = std::stoull(value, &used);
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected a non-negative integer, got '" +
                          value + "'");
    }
    if (used != value.size())
        throw ConfigError("key '" + key + "': trailing characters in '" + value + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    std::string v = value;
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "': expected a boolean, got '" + value + "'");
}

// record = ch:omega, ch:omega, ...
std::vector<std::pair<int, double>> parse_record(const std::string& value) {
    std::vector<std::pair<int, double>> events;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos)
            throw ConfigError("key 'record': expected channel:omega entries, got '" + item +
                              "'");
        const long ch = parse_long("record", trim(item.substr(0, colon)));
        const double omega = parse_double("record", trim(item.substr(colon + 1)));
        events.emplace_back(static_cast<int>(ch), omega);
    }
    return events;
}

} // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::set<std::string> seen;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) +
                                  ": unterminated section header");
            continue; // sections are decorative
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) +
                              ": expected key = value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        if (!seen.insert(key).second)
            throw ConfigError("duplicate key '" + key + "'");

        if (key == "mode") cfg.mode = value;
        else if (key == "model") cfg.model = value;
        else if (key == "omega_rabi") cfg.omega_rabi = parse_double(key, value);
        else if (key == "tau") cfg.tau = parse_double(key, value);
        else if (key == "omega_max") cfg.omega_max = parse_double(key, value);
        else if (key == "dt") cfg.dt = parse_double(key, value);
        else if (key == "n_max") { cfg.n_max = static_cast<int>(parse_long(key, value)); cfg.n_max_set = true; }
        else if (key == "n_trials") cfg.n_trials = parse_long(key, value);
        else if (key == "seed") cfg.seed = parse_u64(key, value);
        else if (key == "observable") cfg.observable = value;
        else if (key == "initial_state") cfg.initial_state = value;
        else if (key == "record") cfg.record = parse_record(value);
        else if (key == "channel") cfg.channel = static_cast<int>(parse_long(key, value));
        else if (key == "quick") cfg.quick = parse_bool(key, value);
        else if (key == "output") cfg.output = value;
        else if (key == "summary") cfg.summary = value;
        else throw ConfigError("unknown key '" + key + "'");
    }
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read configuration file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

void validate_config(RunConfig& cfg) {
    if (cfg.mode.empty())
        throw ConfigError("missing required key 'mode' (or pass the mode on the command line)");
    const auto& modes = known_modes();
    if (std::find(modes.begin(), modes.end(), cfg.mode) == modes.end()) {
        std::string all;
        for (const auto& m : modes) all += (all.empty() ? "" : ", ") + m;
        throw ConfigError("key 'mode': unknown mode '" + cfg.mode + "' (expected one of " +
                          all + ")");
    }
    if (cfg.model != "two_level")
        throw ConfigError("key 'model': unknown model '" + cfg.model +
                          "' (only 'two_level' is available)");
    if (!(cfg.tau > 0.0))
        throw ConfigError("key 'tau': must be > 0 (got " + std::to_string(cfg.tau) + ")");
    if (cfg.omega_rabi < 0.0)
        throw ConfigError("key 'omega_rabi': must be >= 0");

    if (cfg.omega_max < 0.0) cfg.omega_max = cfg.omega_rabi + 6.0;
    const double dt_bound = 0.1 / (cfg.omega_max + cfg.omega_rabi + 1.0);
    if (cfg.dt < 0.0) cfg.dt = 0.05 / (cfg.omega_max + cfg.omega_rabi + 1.0);
    if (!(cfg.dt > 0.0))
        throw ConfigError("key 'dt': must be > 0");
    if (cfg.dt > dt_bound)
        throw ConfigError("key 'dt': stability requires dt <= 0.1/(omega_max + omega_rabi + 1)"
                          " = " + std::to_string(dt_bound) + ", got " + std::to_string(cfg.dt));

    const int p_max = static_cast<int>(std::floor(cfg.omega_max * cfg.tau / (2.0 * M_PI) + 1e-9));
    if (p_max < 1)
        throw ConfigError("keys 'omega_max'/'tau': the grid needs omega_max * tau >= 2*pi "
                          "(p_max >= 1); increase omega_max or tau");

    if (!cfg.n_max_set && cfg.mode == "reconstruct") cfg.n_max = 3;
    if (cfg.n_max < 0 || (cfg.mode != "reconstruct" && cfg.n_max < 1))
        throw ConfigError("key 'n_max': must be >= 1 (>= 0 for reconstruct mode)");

    if ((cfg.mode == "ensemble" || cfg.mode == "spectrum") && cfg.n_trials < 2)
        throw ConfigError("key 'n_trials': " + cfg.mode + " mode needs n_trials >= 2");

    if (cfg.initial_state != "ground" && cfg.initial_state != "excited" &&
        cfg.initial_state != "steady")
        throw ConfigError("key 'initial_state': expected ground, excited, or steady, got '" +
                          cfg.initial_state + "'");
    if ((cfg.mode == "trajectory" || cfg.mode == "reconstruct") &&
        cfg.initial_state == "steady")
        throw ConfigError("key 'initial_state': " + cfg.mode +
                          " mode needs a pure state (ground or excited)");

    if (cfg.output.empty())
        cfg.output = "freq_unravel_" + cfg.mode + (cfg.mode == "validate" ? ".json" : ".csv");
    if (cfg.summary.empty()) {
        std::string stem = cfg.output;
        const auto dot = stem.rfind('.');
        if (dot != std::string::npos) stem = stem.substr(0, dot);
        cfg.summary = stem + "_summary.json";
    }
}

} // namespace fdu
