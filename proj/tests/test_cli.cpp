#include <cstdio>
#include <string>
#include <vector>

#include "doctest.h"
#include "fdu/cli.hpp"
#include "support.hpp"

namespace {

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv = {"freq-unravel"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return fdu::cli_main(static_cast<int>(argv.size()), argv.data());
}

struct Scratch {
    std::vector<std::string> paths;
    std::string file(const std::string& stem) {
        paths.push_back(testsupport::scratch_path(stem));
        return paths.back();
    }
    ~Scratch() {
        for (const auto& p : paths) std::remove(p.c_str());
    }
};

} // namespace

TEST_CASE("cli runs a trajectory and writes csv plus summary") {
    Scratch s;
    const std::string cfg = s.file("traj_cfg");
    const std::string out = s.file("traj_out");
    const std::string summary = out + "_summary.json";
    s.paths.push_back(summary);
    testsupport::write_file(cfg, "mode = trajectory\nomega_rabi = 6\ntau = 1\n"
                                 "omega_max = 32\nrecord = 0:6.283185307179586\n");
    CHECK(run_cli({"--config", cfg, "--out", out}) == 0);

    const std::string csv = testsupport::read_file(out);
    REQUIRE(!csv.empty());
    // header names the time column and one norm/population column per level
    CHECK(csv.rfind("t[1/Gamma],level0_norm2[1],level1_norm2[1],"
                    "level0_excited_population[1],level1_excited_population[1]\n",
                    0) == 0);
    const std::string js = testsupport::read_file(summary);
    CHECK(js.find("next_decay_candidates") != std::string::npos);
}

TEST_CASE("cli reruns are byte-identical") {
    Scratch s;
    const std::string cfg = s.file("det_cfg");
    const std::string out1 = s.file("det_out1");
    const std::string out2 = s.file("det_out2");
    s.paths.push_back(out1 + "_summary.json");
    s.paths.push_back(out2 + "_summary.json");
    testsupport::write_file(cfg, "mode = ensemble\nomega_rabi = 6\ntau = 0.5\n"
                                 "omega_max = 26\nn_max = 2\nn_trials = 60\nseed = 7\n");
    CHECK(run_cli({"--config", cfg, "--out", out1}) == 0);
    CHECK(run_cli({"--config", cfg, "--out", out2}) == 0);
    const std::string a = testsupport::read_file(out1);
    const std::string b = testsupport::read_file(out2);
    REQUIRE(!a.empty());
    CHECK(a == b);
    const std::string sa = testsupport::read_file(out1 + "_summary.json");
    const std::string sb = testsupport::read_file(out2 + "_summary.json");
    CHECK(!sa.empty());
    CHECK(sa == sb);
}

TEST_CASE("cli override flags take precedence over the config") {
    Scratch s;
    const std::string cfg = s.file("ovr_cfg");
    const std::string out1 = s.file("ovr_out1");
    const std::string out2 = s.file("ovr_out2");
    s.paths.push_back(out1 + "_summary.json");
    s.paths.push_back(out2 + "_summary.json");
    testsupport::write_file(cfg, "mode = ensemble\nomega_rabi = 6\ntau = 0.5\n"
                                 "omega_max = 26\nn_max = 2\nn_trials = 40\nseed = 7\n");
    CHECK(run_cli({"--config", cfg, "--out", out1}) == 0);
    CHECK(run_cli({"--config", cfg, "--out", out2, "--seed", "8"}) == 0);
    // a different seed must change the sampled ensemble
    CHECK(testsupport::read_file(out1) != testsupport::read_file(out2));

    const std::string js = testsupport::read_file(out2 + "_summary.json");
    CHECK(js.find("\"seed\": 8") != std::string::npos);

    // --trials override lands in the summary too
    const std::string out3 = s.file("ovr_out3");
    s.paths.push_back(out3 + "_summary.json");
    CHECK(run_cli({"--config", cfg, "--out", out3, "--trials", "50"}) == 0);
    CHECK(testsupport::read_file(out3 + "_summary.json").find("\"n_trials\": 50") !=
          std::string::npos);
}

TEST_CASE("cli positional mode overrides the config mode") {
    Scratch s;
    const std::string cfg = s.file("mode_cfg");
    const std::string out = s.file("mode_out");
    s.paths.push_back(out + "_summary.json");
    // config says trajectory; command line asks for reconstruct
    testsupport::write_file(cfg, "mode = trajectory\nomega_rabi = 6\ntau = 1\n"
                                 "omega_max = 8\nn_max = 2\n");
    CHECK(run_cli({"reconstruct", "--config", cfg, "--out", out}) == 0);
    const std::string csv = testsupport::read_file(out);
    CHECK(csv.find("ordered_max_abs_err") != std::string::npos);
}

TEST_CASE("cli maps failures to exit codes") {
    Scratch s;
    CHECK(run_cli({}) == 1);                        // missing --config
    CHECK(run_cli({"--config", "missing.cfg"}) == 1);
    const std::string cfg = s.file("bad_cfg");
    testsupport::write_file(cfg, "mode = ensemble\ntau = -1\nn_trials = 10\n");
    CHECK(run_cli({"--config", cfg}) == 1);         // invalid tau
    const std::string cfg2 = s.file("bad_mode_cfg");
    testsupport::write_file(cfg2, "tau = 1\nomega_max = 32\n");
    CHECK(run_cli({"waltz", "--config", cfg2}) == 1); // unknown mode
}
