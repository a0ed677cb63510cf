#include <cmath>
#include <map>

#include "doctest.h"
#include "fdu/errors.hpp"
#include "fdu/monte_carlo.hpp"
#include "fdu/oracle.hpp"
#include "fdu/run.hpp"
#include "support.hpp"

using namespace fdu;

namespace {
ComplexVector basis(int i) {
    ComplexVector v = ComplexVector::Zero(2);
    v(i) = 1.0;
    return v;
}
ComplexMatrix pure(const ComplexVector& v) { return v * v.adjoint(); }
} // namespace

TEST_CASE("trial rng streams are deterministic, bounded, and separated") {
    TrialRng a(42, 7), b(42, 7), c(42, 8);
    for (int i = 0; i < 1000; ++i) {
        const double x = a.next_double();
        CHECK(x == b.next_double()); // same stream, identical walk
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
    int same = 0;
    TrialRng a2(42, 7);
    for (int i = 0; i < 1000; ++i)
        if (a2.next_u64() == c.next_u64()) ++same;
    CHECK(same == 0);

    // rough uniformity of the mean
    TrialRng u(1, 0);
    double mean = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) mean += u.next_double();
    mean /= n;
    CHECK(std::abs(mean - 0.5) < 5.0 / std::sqrt(12.0 * n)); // 5 sigma
}

TEST_CASE("initial-state sampling returns eigenvectors with eigenvalue weights") {
    SUBCASE("pure state is returned up to phase") {
        ComplexVector plus(2);
        plus << Complex(M_SQRT1_2, 0.0), Complex(0.0, M_SQRT1_2);
        TrialRng rng(3, 0);
        for (int i = 0; i < 20; ++i) {
            const ComplexVector psi = sample_initial_state(pure(plus), rng);
            CHECK(std::abs(std::abs(plus.dot(psi)) - 1.0) < 1e-10);
        }
    }
    SUBCASE("mixed state frequencies match the spectrum") {
        ComplexMatrix rho = ComplexMatrix::Zero(2, 2);
        rho(0, 0) = 0.25;
        rho(1, 1) = 0.75;
        int hits1 = 0;
        const int n = 4000;
        for (int i = 0; i < n; ++i) {
            TrialRng rng(11, static_cast<std::uint64_t>(i));
            const ComplexVector psi = sample_initial_state(rho, rng);
            if (std::abs(psi(1)) > 0.5) ++hits1;
        }
        const double p = static_cast<double>(hits1) / n;
        CHECK(std::abs(p - 0.75) < 5.0 * std::sqrt(0.75 * 0.25 / n));
    }
    SUBCASE("malformed density matrices are rejected") {
        TrialRng rng(1, 0);
        ComplexMatrix bad = ComplexMatrix::Zero(2, 2);
        bad(0, 0) = 0.5;
        bad(1, 1) = 0.6; // trace 1.1
        CHECK_THROWS_AS(sample_initial_state(bad, rng), std::invalid_argument);
        ComplexMatrix nonherm = ComplexMatrix::Identity(2, 2) * 0.5;
        nonherm(0, 1) = Complex(0.3, 0.0); // (1,0) stays zero
        CHECK_THROWS_AS(sample_initial_state(nonherm, rng), std::invalid_argument);
        ComplexMatrix neg = ComplexMatrix::Zero(2, 2);
        neg(0, 0) = 1.2;
        neg(1, 1) = -0.2;
        CHECK_THROWS_AS(sample_initial_state(neg, rng), std::invalid_argument);
    }
}

TEST_CASE("decay distribution normalizes, terminates, and samples in proportion") {
    SUBCASE("probabilities sum to one and index maps round-trip") {
        const auto dist = decay_distribution({1.0, 3.0, 2.0, 2.0, 1.0, 1.0}, 2, 3);
        REQUIRE(dist.has_value());
        double total = 0.0;
        for (double p : dist->probabilities) total += p;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(dist->probabilities[1] == doctest::Approx(0.3).epsilon(1e-12));
        CHECK(dist->channel_of(4) == 1);
        CHECK(dist->freq_of(4) == 1);
        CHECK(dist->total_norm2 == doctest::Approx(10.0).epsilon(1e-12));
    }
    SUBCASE("sampling frequencies match the weights") {
        const auto dist = decay_distribution({1.0, 3.0, 6.0}, 1, 3);
        REQUIRE(dist.has_value());
        std::map<int, int> hits;
        const int n = 10000;
        for (int i = 0; i < n; ++i) {
            TrialRng rng(5, static_cast<std::uint64_t>(i));
            hits[dist->sample(rng)]++;
        }
        for (int k = 0; k < 3; ++k) {
            const double p = dist->probabilities[static_cast<std::size_t>(k)];
            const double freq = static_cast<double>(hits[k]) / n;
            CHECK(std::abs(freq - p) < 5.0 * std::sqrt(p * (1.0 - p) / n));
        }
    }
    SUBCASE("vanishing weight terminates") {
        CHECK(!decay_distribution({1e-13, 1e-14, 0.0}, 1, 3).has_value());
        CHECK(decay_distribution({1e-13, 1e-11, 0.0}, 1, 3).has_value());
    }
    SUBCASE("invalid entries throw") {
        CHECK_THROWS_AS(decay_distribution({1.0, -0.5}, 1, 2), std::invalid_argument);
        CHECK_THROWS_AS(decay_distribution({1.0, 2.0, 3.0}, 1, 2), std::invalid_argument);
    }
}

TEST_CASE("single trial: structure, termination, and estimator arithmetic") {
    const ModelSpec m = two_level_model(0.0);
    const double tau = 1.0;
    const FrequencyGrid grid(tau, 32.0);
    TrialOptions opt;
    opt.n_max = 3;
    opt.observables = {m.observable("excited_population")};
    TrialRng rng(2024, 0);
    const TrialResult tr = run_trial(m, grid, pure(basis(1)), tau, 1e-3, rng, opt, 0);

    CHECK(tr.times.front() == 0.0);
    CHECK(tr.times.back() == doctest::Approx(tau).epsilon(1e-15));
    CHECK(tr.zero_norm2.front() == doctest::Approx(1.0).epsilon(1e-12));

    // the undriven atom emits exactly one photon: stage 2 finds no candidates
    CHECK(tr.terminated_stage == 2);
    REQUIRE(tr.families.size() == 2);
    CHECK(tr.record.events.size() == 1);
    CHECK(tr.families[0].p_record == 1.0);
    CHECK(tr.families[0].sampled_flat >= 0);
    CHECK(tr.families[1].p_record == doctest::Approx(tr.families[0].p_sampled));
    CHECK(tr.families[1].sampled_flat == -1);

    // estimate() is exactly the weighted family sum
    const int last = static_cast<int>(tr.times.size()) - 1;
    double manual = tr.zero_obs[0][static_cast<std::size_t>(last)];
    for (const TrialFamily& f : tr.families)
        manual += f.family_obs[0][static_cast<std::size_t>(last)] / f.p_record;
    CHECK(tr.estimate(0, last) == doctest::Approx(manual).epsilon(1e-14));

    // trace estimate at tau recovers the photon budget of the truncated grid
    CHECK(std::abs(tr.trace_estimate(last) - 1.0) < 2.0 / (M_PI * 32.0) + 1e-6);
}

TEST_CASE("trials are reproducible from (seed, index) alone") {
    const ModelSpec m = two_level_model(6.0);
    const double tau = 0.5;
    const FrequencyGrid grid(tau, 26.0);
    TrialOptions opt;
    opt.n_max = 2;
    opt.observables = {m.observable("excited_population")};
    TrialRng r1(77, 3), r2(77, 3);
    const TrialResult a = run_trial(m, grid, pure(basis(0)), tau, 1e-3, r1, opt, 3);
    const TrialResult b = run_trial(m, grid, pure(basis(0)), tau, 1e-3, r2, opt, 3);
    REQUIRE(a.families.size() == b.families.size());
    CHECK(a.record.events.size() == b.record.events.size());
    for (std::size_t i = 0; i < a.record.events.size(); ++i) {
        CHECK(a.record.events[i].channel == b.record.events[i].channel);
        CHECK(a.record.events[i].omega == b.record.events[i].omega);
    }
    for (std::size_t i = 0; i < a.times.size(); ++i)
        CHECK(a.estimate(0, static_cast<int>(i)) == b.estimate(0, static_cast<int>(i)));
}

TEST_CASE("estimator is unbiased against the deterministic record sum") {
    // Small closed instance: 5 grid frequencies, at most 2 decays. The mean
    // of the importance-weighted estimator over many trials must match the
    // exhaustive sum over all records (computed by the deterministic
    // reconstruction oracle) within a few standard errors.
    const ModelSpec m = two_level_model(6.0);
    const double tau = 0.5;
    const FrequencyGrid grid(tau, 26.0);
    const ComplexVector psi0 = basis(0);
    const double dt = 2e-3;

    EnsembleRunOptions ro;
    ro.trial.n_max = 2;
    ro.trial.observables = {m.observable("excited_population")};
    ro.observable_names = {"excited_population"};
    ro.n_trials = 3000;
    ro.seed = 99;
    ro.workers = 1;
    const EnsembleAccumulator acc = run_ensemble(m, grid, pure(psi0), tau, dt, ro);
    const EnsembleEstimate est = acc.finalize();

    const TimeGrid tg = make_time_grid(tau, dt, ro.trial.target_samples);
    const Reconstruction exact =
        reconstruct_density_ordered(m, grid, psi0, tau, tg.dt, 2, 1);
    const ComplexMatrix obs = m.observable("excited_population");
    const double truth = (obs * exact.density(1)).trace().real();

    const std::size_t last = est.times.size() - 1;
    const double dev = std::abs(est.observables[0].mean[last] - truth);
    CHECK(dev < 4.0 * est.observables[0].stderr_[last]);

    const double trace_truth = exact.density(1).trace().real();
    const double tdev = std::abs(est.trace.mean[last] - trace_truth);
    CHECK(tdev < 4.0 * est.trace.stderr_[last]);
}

TEST_CASE("accumulator mean and stderr match a direct computation") {
    const ModelSpec m = two_level_model(6.0);
    const double tau = 0.5;
    const FrequencyGrid grid(tau, 26.0);
    TrialOptions opt;
    opt.n_max = 2;
    opt.observables = {m.observable("excited_population")};

    EnsembleAccumulator::Layout layout;
    layout.observable_names = {"excited_population"};
    layout.times = make_time_grid(tau, 1e-3, opt.target_samples).sample_times;
    layout.n_levels = opt.n_max + 1;
    EnsembleAccumulator acc(layout);

    const int n = 40;
    std::vector<double> values;
    const int probe = 123; // arbitrary sample index
    for (int i = 0; i < n; ++i) {
        TrialRng rng(4, static_cast<std::uint64_t>(i));
        const TrialResult tr =
            run_trial(m, grid, pure(basis(0)), tau, 1e-3, rng, opt, static_cast<std::uint64_t>(i));
        values.push_back(tr.estimate(0, probe));
        acc.add(tr);
    }
    const EnsembleEstimate est = acc.finalize();

    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= (n - 1);
    CHECK(est.observables[0].mean[probe] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(est.observables[0].stderr_[probe] ==
          doctest::Approx(std::sqrt(var / n)).epsilon(1e-10));
    CHECK(est.n_trials == static_cast<std::size_t>(n));
}

TEST_CASE("merging partial accumulators preserves the statistics") {
    const ModelSpec m = two_level_model(6.0);
    const double tau = 0.5;
    const FrequencyGrid grid(tau, 26.0);
    TrialOptions opt;
    opt.n_max = 2;
    opt.observables = {m.observable("identity")};

    EnsembleAccumulator::Layout layout;
    layout.observable_names = {"identity"};
    layout.times = make_time_grid(tau, 1e-3, opt.target_samples).sample_times;
    layout.n_levels = opt.n_max + 1;

    EnsembleAccumulator whole(layout), left(layout), right(layout);
    for (int i = 0; i < 60; ++i) {
        TrialRng rng(8, static_cast<std::uint64_t>(i));
        const TrialResult tr =
            run_trial(m, grid, pure(basis(0)), tau, 1e-3, rng, opt, static_cast<std::uint64_t>(i));
        whole.add(tr);
        TrialRng rng2(8, static_cast<std::uint64_t>(i));
        const TrialResult tr2 =
            run_trial(m, grid, pure(basis(0)), tau, 1e-3, rng2, opt, static_cast<std::uint64_t>(i));
        (i < 30 ? left : right).add(tr2);
    }
    left.merge(right);
    CHECK(left.count() == whole.count());
    const EnsembleEstimate a = whole.finalize();
    const EnsembleEstimate b = left.finalize();
    for (std::size_t t = 0; t < a.times.size(); ++t) {
        CHECK(std::abs(a.observables[0].mean[t] - b.observables[0].mean[t]) < 1e-12);
        CHECK(std::abs(a.observables[0].stderr_[t] - b.observables[0].stderr_[t]) < 1e-12);
    }
}

TEST_CASE("ensemble results are identical for any worker count") {
    const ModelSpec m = two_level_model(6.0);
    const double tau = 0.5;
    const FrequencyGrid grid(tau, 26.0);
    EnsembleRunOptions ro;
    ro.trial.n_max = 2;
    ro.trial.observables = {m.observable("excited_population")};
    ro.observable_names = {"excited_population"};
    ro.n_trials = 120; // several chunks
    ro.seed = 31;

    ro.workers = 1;
    const EnsembleEstimate one =
        run_ensemble(m, grid, pure(basis(0)), tau, 2e-3, ro).finalize();
    ro.workers = 3;
    const EnsembleEstimate three =
        run_ensemble(m, grid, pure(basis(0)), tau, 2e-3, ro).finalize();

    REQUIRE(one.times.size() == three.times.size());
    for (std::size_t t = 0; t < one.times.size(); ++t) {
        CHECK(one.observables[0].mean[t] == three.observables[0].mean[t]);
        CHECK(one.observables[0].stderr_[t] == three.observables[0].stderr_[t]);
        CHECK(one.trace.mean[t] == three.trace.mean[t]);
    }
    for (std::size_t k = 0; k < one.level_trace_mean.size(); ++k)
        CHECK(one.level_trace_mean[k] == three.level_trace_mean[k]);
}

TEST_CASE("finalize requires at least two trials") {
    EnsembleAccumulator::Layout layout;
    layout.observable_names = {};
    layout.times = {0.0, 1.0};
    EnsembleAccumulator acc(layout);
    CHECK_THROWS_AS(acc.finalize(), ConfigError);
}

TEST_CASE("progress hook fires on chunk boundaries in order") {
    const ModelSpec m = two_level_model(6.0);
    const double tau = 0.5;
    const FrequencyGrid grid(tau, 26.0);
    EnsembleRunOptions ro;
    ro.trial.n_max = 1;
    ro.trial.observables = {m.observable("identity")};
    ro.observable_names = {"identity"};
    ro.n_trials = 80;
    ro.seed = 5;
    ro.workers = 2;
    std::vector<std::size_t> counts;
    ro.on_progress = [&](std::size_t done, const EnsembleAccumulator& acc) {
        CHECK(done == acc.count());
        counts.push_back(done);
    };
    run_ensemble(m, grid, pure(basis(0)), tau, 2e-3, ro);
    REQUIRE(counts.size() == 4); // 80 trials in chunks of 25: 25, 50, 75, 80
    CHECK(counts[0] == 25);
    CHECK(counts[1] == 50);
    CHECK(counts[2] == 75);
    CHECK(counts[3] == 80);
}
