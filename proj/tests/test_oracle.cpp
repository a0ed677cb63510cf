#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "doctest.h"
#include "fdu/errors.hpp"
#include "fdu/oracle.hpp"
#include "fdu/trajectory.hpp"
#include "support.hpp"

using namespace fdu;

namespace {
ComplexVector basis(int i) {
    ComplexVector v = ComplexVector::Zero(2);
    v(i) = 1.0;
    return v;
}
ComplexMatrix pure(int i) { return basis(i) * basis(i).adjoint(); }

// independent propagation: rho(t) = unvec(exp(L t) vec(rho0)), column-major
ComplexMatrix propagate_by_exponential(const ModelSpec& m, const ComplexMatrix& rho0,
                                       double t) {
    const ComplexMatrix liouv = liouvillian_matrix(m);
    const ComplexMatrix prop = (liouv * t).exp();
    ComplexVector flat = Eigen::Map<const ComplexVector>(rho0.data(), 4);
    ComplexVector out = prop * flat;
    return Eigen::Map<const ComplexMatrix>(out.data(), 2, 2);
}
} // namespace

TEST_CASE("master equation: undriven decay matches the exponential law") {
    const ModelSpec m = two_level_model(0.0);
    const MasterSolution sol = integrate_master(m, pure(1), 2.0, 1e-3);
    for (std::size_t i = 0; i < sol.times.size(); ++i) {
        const double t = sol.times[i];
        CHECK(std::abs(sol.states[i](1, 1).real() - std::exp(-t)) < 1e-8);
        CHECK(std::abs(sol.states[i](0, 0).real() - (1.0 - std::exp(-t))) < 1e-8);
        CHECK(std::abs(sol.states[i](0, 1)) < 1e-12); // no coherence generated
    }
}

TEST_CASE("master equation: driven evolution matches the Liouvillian exponential") {
    const ModelSpec m = two_level_model(6.0);
    const MasterSolution sol = integrate_master(m, pure(0), 1.0, 1e-3, 4);
    for (std::size_t i = 0; i < sol.times.size(); ++i) {
        const ComplexMatrix ref = propagate_by_exponential(m, pure(0), sol.times[i]);
        CHECK((sol.states[i] - ref).cwiseAbs().maxCoeff() < 1e-8);
        CHECK(std::abs(sol.states[i].trace().real() - 1.0) < 1e-10);
        CHECK((sol.states[i] - sol.states[i].adjoint()).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("liouvillian matrix agrees with the right-hand side on random states") {
    const ModelSpec m = two_level_model(3.0);
    const ComplexMatrix liouv = liouvillian_matrix(m);
    ComplexMatrix rho(2, 2);
    rho << Complex(0.4, 0.0), Complex(0.1, 0.2), Complex(0.1, -0.2), Complex(0.6, 0.0);
    ComplexVector flat = Eigen::Map<const ComplexVector>(rho.data(), 4);
    ComplexVector lv = liouv * flat;
    const ComplexMatrix from_matrix = Eigen::Map<const ComplexMatrix>(lv.data(), 2, 2);
    const ComplexMatrix direct = lindblad_rhs(m, rho);
    CHECK((from_matrix - direct).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("steady state: null-space solve hits the closed form and the generator") {
    const ModelSpec m = two_level_model(6.0);
    const ComplexMatrix rho = steady_state(m);
    // excited population Omega^2 / (Gamma^2 + 2 Omega^2) = 36/73
    CHECK(std::abs(rho(1, 1).real() - 36.0 / 73.0) < 1e-12);
    CHECK(std::abs(rho.trace().real() - 1.0) < 1e-12);
    CHECK((lindblad_rhs(m, rho)).cwiseAbs().maxCoeff() < 1e-10);
    // long integration converges to the same state
    const MasterSolution sol = integrate_master(m, pure(0), 40.0, 2e-3, 4);
    CHECK((sol.states.back() - rho).cwiseAbs().maxCoeff() < 1e-6);

    const ModelSpec undriven = two_level_model(0.0);
    const ComplexMatrix ground_ss = steady_state(undriven);
    CHECK(std::abs(ground_ss(0, 0).real() - 1.0) < 1e-12);
}

TEST_CASE("two-time correlation: symmetry, diagonal, and the undriven closed form") {
    const ModelSpec m = two_level_model(0.0);
    const CorrelationTable corr = two_time_correlation(m, pure(1), 0, 1.0, 1e-3);
    const int n = static_cast<int>(corr.times.size());
    REQUIRE(n > 10);
    CHECK(corr.times.front() == 0.0);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            CHECK(std::abs(corr.values(j, k) - std::conj(corr.values(k, j))) < 1e-12);
            // C(s, s') = exp(-(s + s')/2) for pure decay
            const double closed = std::exp(-0.5 * (corr.times[j] + corr.times[k]));
            CHECK(std::abs(corr.values(j, k) - Complex(closed, 0.0)) < 1e-6);
        }
    // diagonal equals the excited population
    for (int k = 0; k < n; ++k)
        CHECK(std::abs(corr.values(k, k).real() - std::exp(-corr.times[k])) < 1e-8);
}

TEST_CASE("two-time correlation of the driven atom: diagonal tracks the master solution") {
    const ModelSpec m = two_level_model(6.0);
    const double tau = 2.0, dt = 1e-3;
    const CorrelationTable corr = two_time_correlation(m, pure(0), 0, tau, dt);
    const MasterSolution sol = integrate_master(m, pure(0), tau, dt, 1000);
    for (std::size_t k = 0; k < corr.times.size(); ++k) {
        // find the matching master sample (coarse grid is a subset)
        const double t = corr.times[k];
        const std::size_t idx = static_cast<std::size_t>(
            std::lround(t / (sol.times[1] - sol.times[0])));
        REQUIRE(idx < sol.times.size());
        REQUIRE(std::abs(sol.times[idx] - t) < 1e-12);
        CHECK(std::abs(corr.values(static_cast<int>(k), static_cast<int>(k)).real() -
                       sol.states[idx](1, 1).real()) < 1e-8);
    }
    CHECK_THROWS_AS(two_time_correlation(m, pure(0), 5, tau, dt), std::invalid_argument);
}

TEST_CASE("finite-interval spectrum: undriven closed form, symmetry, positivity") {
    const double tau = 1.0;
    const ModelSpec m = two_level_model(0.0);
    const CorrelationTable corr = two_time_correlation(m, pure(1), 0, tau, 2e-4);
    for (double w : {0.0, 0.5, 2.0, 6.283185307179586, 15.0, 31.0}) {
        const double closed = testsupport::undriven_spectrum(w, tau);
        CHECK(std::abs(finite_tau_spectrum(corr, w) - closed) < 1e-4);
        CHECK(std::abs(finite_tau_spectrum(corr, -w) - finite_tau_spectrum(corr, w)) <
              1e-10);
        CHECK(finite_tau_spectrum(corr, w) >= 0.0);
    }
}

TEST_CASE("emission integral: undriven atom emits 1 - e^{-tau} photons") {
    const ModelSpec m = two_level_model(0.0);
    for (double tau : {0.5, 1.0, 4.0})
        CHECK(std::abs(emission_integral(m, pure(1), tau, 1e-3) -
                       (1.0 - std::exp(-tau))) < 1e-6);
}

TEST_CASE("spectrum sum rule holds for the oracle on the driven steady state") {
    const ModelSpec m = two_level_model(6.0);
    const double tau = 4.0, w_max = 16.0;
    const double dt = 0.05 / (w_max + 7.0);
    const FrequencyGrid grid(tau, w_max);
    const ComplexMatrix rho = steady_state(m);
    const CorrelationTable corr = two_time_correlation(m, rho, 0, tau, dt);
    double sum = 0.0;
    for (int j = 0; j < grid.size(); ++j) sum += finite_tau_spectrum(corr, grid.frequency(j));
    const double emitted = emission_integral(m, rho, tau, dt);
    // the grid truncation loses O(1/omega_max) of the mass; quadrature adds a bit
    CHECK(std::abs(sum - emitted) <
          emitted * (2.0 / (M_PI * w_max) + 2.0 / (M_PI * tau * w_max)) + 1e-3 * emitted);
    CHECK(sum < emitted + 1e-3 * emitted); // truncation only removes mass
}

TEST_CASE("reconstruction: n_max 0 is the bare no-decay projector") {
    const ModelSpec m = two_level_model(6.0);
    const FrequencyGrid grid(1.0, 8.0);
    const Reconstruction rec =
        reconstruct_density_ordered(m, grid, basis(0), 1.0, 1e-3, 0, 4);
    CHECK(rec.n_blocks == 1);
    REQUIRE(rec.times.size() == 5);
    CHECK(rec.times.back() == doctest::Approx(1.0).epsilon(1e-15));
    // trace equals the no-decay survival probability
    const ZeroDecayResult zd = evolve_zero_decay(m, basis(0), 1.0, 1e-3, {}, 4);
    REQUIRE(zd.times.size() == rec.times.size());
    for (std::size_t ti = 0; ti < rec.times.size(); ++ti) {
        const ComplexMatrix r = rec.density(static_cast<int>(ti));
        CHECK(r.trace().real() == doctest::Approx(zd.norm2[ti]).epsilon(1e-10));
        CHECK(r.trace().real() <= 1.0 + 1e-9);
        CHECK((r - r.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
        // projector onto one pure state: rank one
        CHECK(std::abs((r * r).trace().real() - r.trace().real() * r.trace().real()) <
              1e-10);
    }
}

TEST_CASE("reconstruction: undriven atom is exact at depth 1 up to the grid tail") {
    const double tau = 1.0;
    const ModelSpec m = two_level_model(0.0);
    const FrequencyGrid grid(tau, 32.0);
    const Reconstruction rec =
        reconstruct_density_ordered(m, grid, basis(1), tau, 1e-3, 1, 4);
    const MasterSolution sol = integrate_master(m, pure(1), tau, 1e-3, 4);
    // With exact integration every candidate has
    //   |psi_p(t)|^2 = (1/tau) |e^{(i w_p - 1/2) t} - 1|^2 / |i w_p - 1/2|^2
    // and the full frequency comb sums to 1 - e^{-t}, so the reconstruction
    // falls short of the master solution by exactly the |p| > p_max remainder
    // of that series (which only lives in the ground-ground entry).
    auto offgrid_tail = [&](double t) {
        double sum = 0.0;
        for (long p = grid.p_max() + 1; p <= 1000000; ++p) {
            const Complex z(-0.5, 2.0 * M_PI * static_cast<double>(p) / tau);
            sum += std::norm(std::exp(z * t) - 1.0) / std::norm(z);
        }
        return 2.0 * sum / tau; // +-p contribute equally
    };
    for (std::size_t ti = 0; ti < rec.times.size(); ++ti) {
        const ComplexMatrix r = rec.density(static_cast<int>(ti));
        const double err = (r - sol.states[ti]).cwiseAbs().maxCoeff();
        CHECK(std::abs(err - offgrid_tail(rec.times[ti])) < 1e-5);
    }
    // adding an impossible second photon changes nothing
    const Reconstruction rec2 =
        reconstruct_density_ordered(m, grid, basis(1), tau, 1e-3, 2, 4);
    CHECK((rec2.density(4) - rec.density(4)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("reconstruction: ordered and unordered converge to the master solution") {
    const ModelSpec m = two_level_model(6.0);
    const double tau = 1.0;
    std::vector<double> errs_ord, errs_uno;
    for (double w_max : {8.0, 16.0}) {
        const FrequencyGrid grid(tau, w_max);
        const double dt = 0.05 / (w_max + 7.0);
        const TimeGrid tg = make_time_grid(tau, dt, 4, 4);
        const Reconstruction ord =
            reconstruct_density_ordered(m, grid, basis(0), tau, tg.dt, 2, 4);
        const Reconstruction uno =
            reconstruct_density_unordered(m, grid, basis(0), tau, tg.dt, 2, 4);
        const MasterSolution sol = integrate_master(m, pure(0), tau, tg.dt, 4);
        double eo = 0.0, eu = 0.0;
        for (std::size_t ti = 0; ti < sol.times.size(); ++ti) {
            eo = std::max(eo, (ord.density(static_cast<int>(ti)) - sol.states[ti])
                                  .cwiseAbs()
                                  .maxCoeff());
            eu = std::max(eu, (uno.density(static_cast<int>(ti)) - sol.states[ti])
                                  .cwiseAbs()
                                  .maxCoeff());
        }
        errs_ord.push_back(eo);
        errs_uno.push_back(eu);
    }
    // doubling the cutoff improves both reconstructions
    CHECK(errs_ord[1] < errs_ord[0]);
    CHECK(errs_uno[1] < errs_uno[0]);
    CHECK(errs_ord[1] < 0.35);
    CHECK(errs_uno[1] < 0.35);
}

TEST_CASE("reconstruction guards: budget, purity, level bookkeeping") {
    const ModelSpec m = two_level_model(6.0);
    const FrequencyGrid grid(1.0, 32.0); // 11 frequencies
    CHECK_THROWS_AS(
        reconstruct_density_ordered(m, grid, basis(0), 1.0, 1e-3, 8, 2, 1e6),
        ConfigError); // 11^8 records blow the budget
    ComplexVector unnorm = 0.7 * basis(0);
    CHECK_THROWS_AS(reconstruct_density_ordered(m, grid, unnorm, 1.0, 1e-3, 1, 2),
                    std::invalid_argument);

    const Reconstruction rec = reconstruct_density_ordered(m, grid, basis(0), 1.0, 2e-3, 2, 2);
    REQUIRE(rec.by_level.size() == rec.times.size());
    REQUIRE(rec.by_level[0].size() == 3); // levels 0..2
    CHECK(rec.n_blocks == 1 + 11 + 121);
    // density(ti, 1) excludes the two-decay shell
    const ComplexMatrix full = rec.density(2);
    const ComplexMatrix depth1 = rec.density(2, 1);
    ComplexMatrix manual = rec.by_level[2][0] + rec.by_level[2][1];
    CHECK((depth1 - manual).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(full.trace().real() >= depth1.trace().real() - 1e-12);
}
