// model.hpp — open-system description: Hamiltonian, jump channels, observables
//
// Units: hbar = 1 and the reference decay rate Gamma = 1 throughout. Jump
// operators absorb the square root of their rate, so the damped two-level
// atom has the single channel operator sqrt(Gamma) * sigma_minus.

#pragma once

#include <map>
#include <string>
#include <vector>

#include "fdu/numerics.hpp"

namespace fdu {

// One decay channel; `op` already contains the sqrt(rate) factor.
struct JumpChannel {
    int id = 0;
    ComplexMatrix op;
};

struct ModelSpec {
    int dim = 0;
    ComplexMatrix h_sys; // Hermitian system Hamiltonian
    std::vector<JumpChannel> channels;
    std::map<std::string, ComplexMatrix> observables;

    // Throws ConfigError on dimension mismatch, a non-Hermitian Hamiltonian
    // (tolerance 1e-12), or an empty channel list.
    void validate() const;

    const ComplexMatrix& observable(const std::string& name) const;
};

// Non-Hermitian generator of the no-decay evolution:
//   matrix = h_sys - (i/2) * damping,   damping = sum_c op_c^dag op_c.
struct EffectiveHamiltonian {
    ComplexMatrix matrix;
    ComplexMatrix damping;
};

EffectiveHamiltonian build_effective_hamiltonian(const ModelSpec& model);

// Resonantly driven two-level atom. Basis: index 0 = ground, 1 = excited.
//   H = (omega_rabi/2) (sigma_plus + sigma_minus),   channel = sigma_minus.
// Observables: "excited_population" and "identity".
ModelSpec two_level_model(double omega_rabi);

} // namespace fdu
