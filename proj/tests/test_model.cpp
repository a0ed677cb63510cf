#include "doctest.h"
#include "fdu/errors.hpp"
#include "fdu/model.hpp"

using namespace fdu;

TEST_CASE("two-level model wiring") {
    const ModelSpec m = two_level_model(6.0);
    CHECK(m.dim == 2);
    // basis: index 0 ground, 1 excited; drive couples them at Omega/2
    CHECK(m.h_sys(0, 1) == Complex(3.0, 0.0));
    CHECK(m.h_sys(1, 0) == Complex(3.0, 0.0));
    CHECK(m.h_sys(0, 0) == Complex(0.0, 0.0));
    REQUIRE(m.channels.size() == 1);
    CHECK(m.channels[0].op(0, 1) == Complex(1.0, 0.0)); // lowering, rate absorbed
    CHECK(m.channels[0].op(1, 0) == Complex(0.0, 0.0));
    CHECK(m.observable("excited_population")(1, 1) == Complex(1.0, 0.0));
    CHECK(m.observable("identity")(0, 0) == Complex(1.0, 0.0));
    CHECK_THROWS_AS(m.observable("position"), ConfigError);
    CHECK_THROWS_AS(two_level_model(-1.0), ConfigError);
}

TEST_CASE("effective Hamiltonian assembles H - (i/2) sum a^dag a") {
    const ModelSpec m = two_level_model(2.0);
    const EffectiveHamiltonian h = build_effective_hamiltonian(m);
    ComplexMatrix damping = ComplexMatrix::Zero(2, 2);
    for (const auto& ch : m.channels) damping += ch.op.adjoint() * ch.op;
    const ComplexMatrix expected = m.h_sys - 0.5 * kImag * damping;
    CHECK((h.matrix - expected).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((h.damping - damping).cwiseAbs().maxCoeff() < 1e-15);
    // undriven: only the excited level damps, at rate 1
    CHECK(h.damping(1, 1) == Complex(1.0, 0.0));
    CHECK(h.damping(0, 0) == Complex(0.0, 0.0));
}

TEST_CASE("model validation rejects malformed specs") {
    ModelSpec m = two_level_model(1.0);

    ModelSpec bad_h = m;
    bad_h.h_sys(0, 1) = Complex(0.0, 1.0); // not Hermitian against (1,0)
    CHECK_THROWS_AS(bad_h.validate(), ConfigError);

    ModelSpec bad_dim = m;
    bad_dim.channels[0].op = ComplexMatrix::Zero(3, 3);
    CHECK_THROWS_AS(bad_dim.validate(), ConfigError);

    ModelSpec no_channel = m;
    no_channel.channels.clear();
    CHECK_THROWS_AS(no_channel.validate(), ConfigError);

    ModelSpec bad_obs = m;
    bad_obs.observables["broken"] = ComplexMatrix::Zero(1, 1);
    CHECK_THROWS_AS(bad_obs.validate(), ConfigError);
}
