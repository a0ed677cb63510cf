#include "fdu/model.hpp"

#include "fdu/errors.hpp"

namespace fdu {

void ModelSpec::validate() const {
    if (dim < 1) throw ConfigError("model: dimension must be >= 1");
    if (h_sys.rows() != dim || h_sys.cols() != dim)
        throw ConfigError("model: h_sys must be " + std::to_string(dim) + "x" +
                          std::to_string(dim));
    const double scale = std::max(1.0, h_sys.cwiseAbs().maxCoeff());
    if ((h_sys - h_sys.adjoint()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw ConfigError("model: h_sys is not Hermitian within 1e-12");
    if (channels.empty()) throw ConfigError("model: at least one jump channel required");
    for (const auto& ch : channels)
        if (ch.op.rows() != dim || ch.op.cols() != dim)
            throw ConfigError("model: channel " + std::to_string(ch.id) +
                              " has wrong dimensions");
    for (const auto& [name, op] : observables)
        if (op.rows() != dim || op.cols() != dim)
            throw ConfigError("model: observable '" + name + "' has wrong dimensions");
}

const ComplexMatrix& ModelSpec::observable(const std::string& name) const {
    auto it = observables.find(name);
    if (it == observables.end())
        throw ConfigError("model: unknown observable '" + name + "'");
    return it->second;
}

EffectiveHamiltonian build_effective_hamiltonian(const ModelSpec& model) {
    model.validate();
    EffectiveHamiltonian h;
    h.damping = ComplexMatrix::Zero(model.dim, model.dim);
    for (const auto& ch : model.channels) h.damping += ch.op.adjoint() * ch.op;
    h.matrix = model.h_sys - 0.5 * kImag * h.damping;

    // The construction guarantees these; check anyway so corrupted inputs
    // fail loudly instead of silently breaking norms downstream.
    const double scale = std::max(1.0, h.matrix.cwiseAbs().maxCoeff());
    ComplexMatrix herm = 0.5 * (h.matrix + h.matrix.adjoint());
    ComplexMatrix anti = 0.5 * (h.matrix - h.matrix.adjoint());
    if ((herm - model.h_sys).cwiseAbs().maxCoeff() > 1e-12 * scale ||
        (anti + 0.5 * kImag * h.damping).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw ConfigError("effective Hamiltonian failed its decomposition check");
    return h;
}

ModelSpec two_level_model(double omega_rabi) {
    if (omega_rabi < 0.0)
        throw ConfigError("two_level_model: omega_rabi must be >= 0");
    ModelSpec m;
    m.dim = 2;
    m.h_sys = ComplexMatrix::Zero(2, 2);
    m.h_sys(0, 1) = 0.5 * omega_rabi;
    m.h_sys(1, 0) = 0.5 * omega_rabi;

    ComplexMatrix lower = ComplexMatrix::Zero(2, 2); // sqrt(Gamma)=1 absorbed
    lower(0, 1) = 1.0;
    m.channels.push_back(JumpChannel{0, lower});

    ComplexMatrix excited = ComplexMatrix::Zero(2, 2);
    excited(1, 1) = 1.0;
    m.observables["excited_population"] = excited;
    m.observables["identity"] = ComplexMatrix::Identity(2, 2);
    m.validate();
    return m;
}

} // namespace fdu
