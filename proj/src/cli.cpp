#include "fdu/cli.hpp"

#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "fdu/config.hpp"
#include "fdu/errors.hpp"
#include "fdu/run.hpp"

namespace fdu {

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"frequency-resolved decay-record unraveling of a damped driven qubit"};
    app.footer("modes: trajectory | ensemble | spectrum | reconstruct | validate\n"
               "exit codes: 0 ok, 1 config error, 2 numerical failure, 3 validation failure");

    std::string mode, config_path, out_path;
    long trials = -1;
    std::uint64_t seed = 0;
    bool seed_set = false, trials_set = false, out_set = false, quick = false;

    app.add_option("mode", mode, "run mode (overrides the config's mode)");
    app.add_option("--config", config_path, "key=value configuration file")->required();
    app.add_option("--seed", seed, "override the master random seed")
        ->each([&](const std::string&) { seed_set = true; });
    app.add_option("--trials", trials, "override the trial count")
        ->each([&](const std::string&) { trials_set = true; });
    app.add_option("--out", out_path, "override the output path (summary follows its stem)")
        ->each([&](const std::string&) { out_set = true; });
    app.add_flag("--quick", quick, "validate mode: skip the slow checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1; // --help exits 0, any parse failure is a config error
    }

    try {
        RunConfig cfg = parse_config_file(config_path);
        if (!mode.empty()) cfg.mode = mode;
        if (seed_set) cfg.seed = seed;
        if (trials_set) cfg.n_trials = trials;
        if (out_set) {
            cfg.output = out_path;
            cfg.summary.clear(); // recomputed from the new stem
        }
        if (quick) cfg.quick = true;
        validate_config(cfg);
        return run_mode(cfg);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "validation failure: %s\n", e.what());
        return 3;
    } catch (const NumericalFailure& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

} // namespace fdu
