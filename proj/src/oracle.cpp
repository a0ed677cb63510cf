#include "fdu/oracle.hpp"

#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <unsupported/Eigen/KroneckerProduct>

#include "fdu/block_system.hpp"
#include "fdu/errors.hpp"

namespace fdu {

// ---- master equation -------------------------------------------------------

ComplexMatrix lindblad_rhs(const ModelSpec& model, const ComplexMatrix& rho) {
    ComplexMatrix out = -kImag * (model.h_sys * rho - rho * model.h_sys);
    for (const JumpChannel& ch : model.channels) {
        const ComplexMatrix ada = ch.op.adjoint() * ch.op;
        out += ch.op * rho * ch.op.adjoint() - 0.5 * (ada * rho + rho * ada);
    }
    return out;
}

MasterSolution integrate_master(const ModelSpec& model, const ComplexMatrix& rho0,
                                double tau, double dt, int target_samples) {
    model.validate();
    if (rho0.rows() != model.dim || rho0.cols() != model.dim)
        throw std::invalid_argument("integrate_master: density matrix dimension mismatch");
    const TimeGrid tg = make_time_grid(tau, dt, target_samples);
    MasterSolution sol;
    sol.times = tg.sample_times;
    sol.states.reserve(tg.sample_steps.size());
    ComplexMatrix rho = rho0;
    const double tr0 = rho0.trace().real();
    auto rhs = [&model](double, const ComplexMatrix& r) { return lindblad_rhs(model, r); };
    rk4_integrate(rhs, rho, tg, [&](std::size_t, double t, const ComplexMatrix& r) {
        if (std::abs(r.trace().real() - tr0) > 1e-6 || std::abs(r.trace().imag()) > 1e-6)
            throw ValidationError("integrate_master: trace drifted beyond 1e-6 at t = " +
                                  std::to_string(t));
        sol.states.push_back(r);
    });
    return sol;
}

std::vector<double> observable_series(const MasterSolution& sol, const ComplexMatrix& op) {
    std::vector<double> out;
    out.reserve(sol.states.size());
    for (const ComplexMatrix& rho : sol.states) out.push_back((op * rho).trace().real());
    return out;
}

double emission_integral(const ModelSpec& model, const ComplexMatrix& rho0, double tau,
                         double dt) {
    model.validate();
    const TimeGrid tg = make_time_grid(tau, dt);
    ComplexMatrix damping = ComplexMatrix::Zero(model.dim, model.dim);
    for (const JumpChannel& ch : model.channels) damping += ch.op.adjoint() * ch.op;
    auto rhs = [&model](double, const ComplexMatrix& r) { return lindblad_rhs(model, r); };
    ComplexMatrix rho = rho0;
    double total = 0.0;
    double prev = (damping * rho).trace().real();
    for (int s = 0; s < tg.n_steps; ++s) {
        rho = rk4_step(rhs, rho, s * tg.dt, tg.dt);
        const double cur = (damping * rho).trace().real();
        total += 0.5 * tg.dt * (prev + cur);
        prev = cur;
    }
    return total;
}

// ---- algebraic steady state ------------------------------------------------

ComplexMatrix liouvillian_matrix(const ModelSpec& model) {
    model.validate();
    const int d = model.dim;
    const ComplexMatrix id = ComplexMatrix::Identity(d, d);
    ComplexMatrix liouv =
        -kImag * (Eigen::kroneckerProduct(id, model.h_sys).eval() -
                  Eigen::kroneckerProduct(model.h_sys.transpose(), id).eval());
    for (const JumpChannel& ch : model.channels) {
        const ComplexMatrix ada = ch.op.adjoint() * ch.op;
        liouv += Eigen::kroneckerProduct(ch.op.conjugate(), ch.op).eval();
        liouv -= 0.5 * Eigen::kroneckerProduct(id, ada).eval();
        liouv -= 0.5 * Eigen::kroneckerProduct(ada.transpose(), id).eval();
    }
    return liouv;
}

ComplexMatrix steady_state(const ModelSpec& model) {
    const int d = model.dim;
    const ComplexMatrix liouv = liouvillian_matrix(model);
    Eigen::JacobiSVD<ComplexMatrix> svd(liouv, Eigen::ComputeFullV);
    const Eigen::VectorXd& sv = svd.singularValues(); // descending
    const int n = static_cast<int>(sv.size());
    const double scale = std::max(1.0, sv[0]);
    if (n >= 2 && sv[n - 2] < 1e-8 * scale)
        throw ConfigError("steady state is not unique: the generator's null space is degenerate");
    ComplexVector v = svd.matrixV().col(n - 1);
    ComplexMatrix rho = Eigen::Map<const ComplexMatrix>(v.data(), d, d);
    const Complex tr = rho.trace();
    if (std::abs(tr) < 1e-8)
        throw ConfigError("steady state candidate has (near-)zero trace");
    rho /= tr;
    rho = 0.5 * (rho + rho.adjoint()).eval();
    ComplexVector flat = Eigen::Map<const ComplexVector>(rho.data(), d * d);
    const double residual = (liouv * flat).norm();
    if (residual > 1e-10)
        throw NumericalFailure("steady state residual " + std::to_string(residual) +
                                   " exceeds 1e-10",
                               0.0);
    return rho;
}

// ---- two-time correlation --------------------------------------------------

CorrelationTable two_time_correlation(const ModelSpec& model, const ComplexMatrix& rho0,
                                      int channel, double tau, double dt, int corr_stride) {
    model.validate();
    if (channel < 0 || channel >= static_cast<int>(model.channels.size()))
        throw std::invalid_argument("two_time_correlation: channel index out of range");
    if (corr_stride < 1)
        throw std::invalid_argument("two_time_correlation: corr_stride must be positive");
    if (rho0.rows() != model.dim || rho0.cols() != model.dim)
        throw std::invalid_argument("two_time_correlation: density matrix dimension mismatch");

    const TimeGrid tg = make_time_grid(tau, dt, 1, corr_stride);
    const int n_corr = tg.n_steps / corr_stride;
    auto rhs = [&model](double, const ComplexMatrix& r) { return lindblad_rhs(model, r); };

    std::vector<ComplexMatrix> coarse;
    coarse.reserve(n_corr + 1);
    ComplexMatrix rho = rho0;
    coarse.push_back(rho);
    for (int s = 0; s < tg.n_steps; ++s) {
        rho = rk4_step(rhs, rho, s * tg.dt, tg.dt);
        if ((s + 1) % corr_stride == 0) coarse.push_back(rho);
    }

    CorrelationTable ct;
    ct.tau = tau;
    ct.times.resize(n_corr + 1);
    for (int k = 0; k <= n_corr; ++k) ct.times[k] = k * corr_stride * tg.dt;
    ct.values.resize(n_corr + 1, n_corr + 1);
    ct.values.setZero();

    const ComplexMatrix& a = model.channels[channel].op;
    const ComplexMatrix adag = a.adjoint();
    for (int k = 0; k <= n_corr; ++k) {
        ComplexMatrix x = a * coarse[k];
        ct.values(k, k) = (adag * x).trace();
        for (int j = k + 1; j <= n_corr; ++j) {
            for (int s = 0; s < corr_stride; ++s) {
                const double t = ((j - 1) * corr_stride + s) * tg.dt;
                x = rk4_step(rhs, x, t, tg.dt);
            }
            ct.values(j, k) = (adag * x).trace();
            ct.values(k, j) = std::conj(ct.values(j, k));
        }
    }
    return ct;
}

double finite_tau_spectrum(const CorrelationTable& corr, double omega) {
    const int n = static_cast<int>(corr.times.size());
    if (n < 2 || corr.values.rows() != n || corr.values.cols() != n)
        throw std::invalid_argument("finite_tau_spectrum: malformed correlation table");
    const double h = corr.times[1] - corr.times[0];
    ComplexVector v(n);
    for (int j = 0; j < n; ++j) {
        const double w = (j == 0 || j == n - 1) ? 0.5 * h : h;
        v[j] = w * std::exp(Complex(0.0, -omega * corr.times[j]));
    }
    const Complex q = v.dot(corr.values * v);
    const double s = q.real() / corr.tau;
    if (std::abs(q.imag()) / corr.tau > 1e-8 * std::max(1.0, std::abs(s)))
        throw NumericalFailure("finite_tau_spectrum: non-real quadrature value", corr.tau);
    if (s < -1e-8)
        throw NumericalFailure("finite_tau_spectrum: negative spectrum " + std::to_string(s),
                               corr.tau);
    return s < 0.0 ? 0.0 : s;
}

// ---- deterministic reconstruction ------------------------------------------

ComplexMatrix Reconstruction::density(int ti, int n) const {
    if (ti < 0 || ti >= static_cast<int>(by_level.size()))
        throw std::invalid_argument("Reconstruction::density: time index out of range");
    const std::vector<ComplexMatrix>& levels = by_level[ti];
    if (n < 0) n = static_cast<int>(levels.size()) - 1;
    if (n >= static_cast<int>(levels.size()))
        throw std::invalid_argument("Reconstruction::density: level out of range");
    ComplexMatrix out = levels[0];
    for (int k = 1; k <= n; ++k) out += levels[k];
    return out;
}

namespace {

void check_pure_initial(const ComplexVector& psi0, int dim) {
    if (psi0.size() != dim)
        throw std::invalid_argument("reconstruction: initial state dimension mismatch");
    if (std::abs(psi0.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("reconstruction: initial state must be normalized");
}

void check_budget(int n_types, int n_max, double budget) {
    double terms = 1.0;
    for (int k = 0; k < n_max; ++k) {
        terms *= n_types;
        if (terms > budget)
            throw ConfigError("reconstruction term count (channels * grid size)^n_max "
                              "exceeds the budget of " +
                              std::to_string(static_cast<long>(budget)) +
                              "; lower n_max or omega_max");
    }
}

ComplexMatrix outer_from(const Complex* flat, int block, int dim) {
    Eigen::Map<const ComplexVector> v(flat + static_cast<long>(block) * dim, dim);
    return v * v.adjoint();
}

} // namespace

Reconstruction reconstruct_density_ordered(const ModelSpec& model, const FrequencyGrid& grid,
                                           const ComplexVector& psi0, double tau, double dt,
                                           int n_max, int target_samples, double budget) {
    model.validate();
    check_pure_initial(psi0, model.dim);
    if (n_max < 0) throw std::invalid_argument("reconstruction: n_max must be >= 0");
    const int n_types = static_cast<int>(model.channels.size()) * grid.size();
    check_budget(n_types, n_max, budget);

    const EffectiveHamiltonian eff = build_effective_hamiltonian(model);
    std::vector<ComplexMatrix> ops;
    ops.reserve(model.channels.size());
    for (const JumpChannel& ch : model.channels) ops.push_back(ch.op);
    BlockSystem sys(ComplexMatrix(-kImag * eff.matrix), ops);

    const double src_scale = 1.0 / std::sqrt(tau);
    std::vector<int> level_begin;     // first block index of each level
    std::vector<double> shifts;       // accumulated frequency per block
    level_begin.push_back(sys.add_block(0.0));
    shifts.push_back(0.0);
    for (int k = 1; k <= n_max; ++k) {
        const int begin = level_begin[k - 1];
        const int end = sys.block_count();
        level_begin.push_back(end);
        for (int parent = begin; parent < end; ++parent)
            for (std::size_t c = 0; c < model.channels.size(); ++c)
                for (int m = 0; m < grid.size(); ++m) {
                    const int idx = sys.add_block(shifts[parent] + grid.frequency(m));
                    shifts.push_back(shifts[parent] + grid.frequency(m));
                    sys.add_source(idx, parent, static_cast<int>(c), src_scale);
                }
    }
    level_begin.push_back(sys.block_count());

    std::vector<Complex> state(static_cast<std::size_t>(sys.size()), Complex(0.0, 0.0));
    for (int i = 0; i < model.dim; ++i) state[i] = psi0[i];
    const TimeGrid tg = make_time_grid(tau, dt, target_samples, target_samples);

    Reconstruction rec;
    rec.n_blocks = sys.block_count();
    rec.times = tg.sample_times;
    rec.by_level.resize(tg.sample_times.size());
    sys.integrate(state, tg, [&](std::size_t ti, double, const Complex* x) {
        rec.by_level[ti].reserve(n_max + 1);
        for (int k = 0; k <= n_max; ++k) {
            ComplexMatrix lvl = ComplexMatrix::Zero(model.dim, model.dim);
            for (int b = level_begin[k]; b < level_begin[k + 1]; ++b)
                lvl += outer_from(x, b, model.dim);
            rec.by_level[ti].push_back(std::move(lvl));
        }
    });
    return rec;
}

Reconstruction reconstruct_density_unordered(const ModelSpec& model,
                                             const FrequencyGrid& grid,
                                             const ComplexVector& psi0, double tau, double dt,
                                             int n_max, int target_samples, double budget) {
    model.validate();
    check_pure_initial(psi0, model.dim);
    if (n_max < 0) throw std::invalid_argument("reconstruction: n_max must be >= 0");
    const int n_chan = static_cast<int>(model.channels.size());
    const int n_types = n_chan * grid.size(); // type = channel * n_freqs + freq
    check_budget(n_types, n_max, budget);

    const EffectiveHamiltonian eff = build_effective_hamiltonian(model);
    std::vector<ComplexMatrix> ops;
    ops.reserve(model.channels.size());
    for (const JumpChannel& ch : model.channels) ops.push_back(ch.op);
    BlockSystem sys(ComplexMatrix(-kImag * eff.matrix), ops);

    // Multisets are canonical non-decreasing type sequences, generated level
    // by level; each level extends the previous one by a type >= its last.
    std::map<std::vector<int>, int> index_of;
    std::vector<std::vector<int>> multisets;
    std::vector<std::vector<int>> levels(n_max + 1);
    auto type_freq = [&](int t) { return grid.frequency(t % grid.size()); };
    auto add_multiset = [&](const std::vector<int>& ms) {
        double shift = 0.0;
        for (int t : ms) shift += type_freq(t);
        const int idx = sys.add_block(shift);
        index_of[ms] = idx;
        multisets.push_back(ms);
        return idx;
    };
    levels[0].push_back(add_multiset({}));
    for (int k = 1; k <= n_max; ++k) {
        for (int parent : levels[k - 1]) {
            // by value: add_multiset grows `multisets` and would invalidate a
            // reference into it
            const std::vector<int> base = multisets[parent];
            const int t_min = base.empty() ? 0 : base.back();
            for (int t = t_min; t < n_types; ++t) {
                std::vector<int> ms = base;
                ms.push_back(t);
                levels[k].push_back(add_multiset(ms));
            }
        }
    }

    // Sources: removing one copy of a type with multiplicity k_e couples to
    // the smaller multiset with weight k_e / sqrt(tau).
    const double inv_sqrt_tau = 1.0 / std::sqrt(tau);
    std::vector<double> weight(multisets.size(), 1.0); // 1 / prod_e k_e!
    for (std::size_t b = 1; b < multisets.size(); ++b) {
        const std::vector<int>& ms = multisets[b];
        int distinct = 0;
        double w = 1.0;
        for (std::size_t i = 0; i < ms.size();) {
            std::size_t j = i;
            while (j < ms.size() && ms[j] == ms[i]) ++j;
            const int mult = static_cast<int>(j - i);
            ++distinct;
            if (distinct > BlockSystem::kMaxSources)
                throw ConfigError("unordered reconstruction supports at most " +
                                  std::to_string(BlockSystem::kMaxSources) +
                                  " distinct event types per record; lower n_max");
            double fact = 1.0;
            for (int q = 2; q <= mult; ++q) fact *= q;
            w /= fact;
            std::vector<int> smaller;
            smaller.reserve(ms.size() - 1);
            smaller.insert(smaller.end(), ms.begin(), ms.begin() + i);
            smaller.insert(smaller.end(), ms.begin() + i + 1, ms.end());
            sys.add_source(static_cast<int>(b), index_of.at(smaller), ms[i] / grid.size(),
                           mult * inv_sqrt_tau);
            i = j;
        }
        weight[b] = w;
    }

    std::vector<Complex> state(static_cast<std::size_t>(sys.size()), Complex(0.0, 0.0));
    for (int i = 0; i < model.dim; ++i) state[i] = psi0[i];
    const TimeGrid tg = make_time_grid(tau, dt, target_samples, target_samples);

    Reconstruction rec;
    rec.n_blocks = sys.block_count();
    rec.times = tg.sample_times;
    rec.by_level.resize(tg.sample_times.size());
    sys.integrate(state, tg, [&](std::size_t ti, double, const Complex* x) {
        rec.by_level[ti].reserve(n_max + 1);
        for (int k = 0; k <= n_max; ++k) {
            ComplexMatrix lvl = ComplexMatrix::Zero(model.dim, model.dim);
            for (int b : levels[k]) lvl += weight[b] * outer_from(x, b, model.dim);
            rec.by_level[ti].push_back(std::move(lvl));
        }
    });
    return rec;
}

} // namespace fdu
