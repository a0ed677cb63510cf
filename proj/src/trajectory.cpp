#include "fdu/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fdu {

namespace {

void check_psi0(const ModelSpec& model, const ComplexVector& psi0) {
    if (psi0.size() != model.dim)
        throw std::invalid_argument("initial state has wrong dimension");
    if (std::abs(psi0.squaredNorm() - 1.0) > 1e-9)
        throw std::invalid_argument("initial state must be normalized within 1e-9");
}

struct ResolvedRecord {
    std::vector<int> channels;
    std::vector<int> freq_idx;
    std::vector<double> omegas;
    std::vector<double> cum_shift; // cum_shift[k] = sum of first k omegas
};

ResolvedRecord resolve_record(const ModelSpec& model, const FrequencyGrid& grid,
                              const std::vector<DecayEvent>& events) {
    ResolvedRecord r;
    r.cum_shift.push_back(0.0);
    for (const auto& ev : events) {
        if (ev.channel < 0 || ev.channel >= static_cast<int>(model.channels.size()))
            throw std::invalid_argument("decay record names unknown channel " +
                                        std::to_string(ev.channel));
        const int j = grid.require_index(ev.omega);
        r.channels.push_back(ev.channel);
        r.freq_idx.push_back(j);
        r.omegas.push_back(grid.frequency(j));
        r.cum_shift.push_back(r.cum_shift.back() + grid.frequency(j));
    }
    return r;
}

std::vector<ComplexMatrix> channel_ops(const ModelSpec& model) {
    std::vector<ComplexMatrix> ops;
    ops.reserve(model.channels.size());
    for (const auto& ch : model.channels) ops.push_back(ch.op);
    return ops;
}

double block_norm2(const Complex* x, int d) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += std::norm(x[i]);
    return s;
}

// Re<psi|O|psi> without temporaries.
double block_obs(const ComplexMatrix& op, const Complex* x, int d) {
    double acc = 0.0;
    for (int i = 0; i < d; ++i) {
        Complex row = 0.0;
        for (int j = 0; j < d; ++j) row += op(i, j) * x[j];
        acc += (std::conj(x[i]) * row).real();
    }
    return acc;
}

ComplexVector extract_block(const std::vector<Complex>& state, int block, int d) {
    ComplexVector v(d);
    for (int i = 0; i < d; ++i) v(i) = state[static_cast<std::size_t>(block) * d + i];
    return v;
}

} // namespace

OrderedResult evolve_ordered_hierarchy(const ModelSpec& model, const FrequencyGrid& grid,
                                       const DecayRecord& record, const ComplexVector& psi0,
                                       double tau, double dt, const OrderedOptions& options) {
    model.validate();
    check_psi0(model, psi0);
    if (!(tau > 0.0) || !(dt > 0.0))
        throw std::invalid_argument("tau and dt must be positive");
    if (options.spectrum_channel >= static_cast<int>(model.channels.size()))
        throw std::invalid_argument("spectrum channel out of range");
    if (std::abs(grid.tau() - tau) > 1e-12 * std::max(1.0, tau))
        throw std::invalid_argument("grid was built for a different interval length");

    const ResolvedRecord rec = resolve_record(model, grid, record.events);
    const int d = model.dim;
    const int n = static_cast<int>(rec.channels.size()); // record length
    const int n_ch = static_cast<int>(model.channels.size());
    const int n_freq = grid.size();
    const bool spectrum = options.spectrum_channel >= 0;
    const double src_scale = 1.0 / std::sqrt(tau);

    const EffectiveHamiltonian heff = build_effective_hamiltonian(model);
    BlockSystem sys(ComplexMatrix(-kImag * heff.matrix), channel_ops(model));

    // Layout: chain levels 0..n, then candidates (channel-major), then the
    // spectral ladder grouped per frequency.
    for (int k = 0; k <= n; ++k) {
        sys.add_block(rec.cum_shift[static_cast<std::size_t>(k)]);
        if (k > 0)
            sys.add_source(k, k - 1, rec.channels[static_cast<std::size_t>(k - 1)],
                           src_scale);
    }
    const int cand0 = n + 1;
    for (int c = 0; c < n_ch; ++c)
        for (int j = 0; j < n_freq; ++j) {
            const int b = sys.add_block(rec.cum_shift.back() + grid.frequency(j));
            sys.add_source(b, n, c, src_scale);
        }
    const int part0 = cand0 + n_ch * n_freq;
    if (spectrum) {
        for (int j = 0; j < n_freq; ++j)
            for (int m = 0; m <= n; ++m) {
                const int b = sys.add_block(rec.cum_shift[static_cast<std::size_t>(m)] +
                                            grid.frequency(j));
                sys.add_source(b, m, options.spectrum_channel, src_scale);
                if (m > 0)
                    sys.add_source(b, part0 + j * (n + 1) + (m - 1),
                                   rec.channels[static_cast<std::size_t>(m - 1)],
                                   src_scale);
            }
    }

    const TimeGrid tg = make_time_grid(tau, dt, options.target_samples);
    std::vector<Complex> state(static_cast<std::size_t>(sys.size()), Complex(0.0));
    for (int i = 0; i < d; ++i) state[static_cast<std::size_t>(i)] = psi0(i);

    const int n_obs = static_cast<int>(options.observables.size());
    for (const auto& op : options.observables)
        if (op.rows() != d || op.cols() != d)
            throw std::invalid_argument("observable dimension mismatch");

    OrderedResult out;
    TrajectoryTimeSeries& ts = out.series;
    const std::size_t n_samples = tg.sample_times.size();
    ts.times = tg.sample_times;
    ts.level_norm2.assign(static_cast<std::size_t>(n + 1),
                          std::vector<double>(n_samples, 0.0));
    ts.level_obs.assign(static_cast<std::size_t>(n_obs),
                        std::vector<std::vector<double>>(
                            static_cast<std::size_t>(n + 1),
                            std::vector<double>(n_samples, 0.0)));
    ts.family_obs_sum.assign(static_cast<std::size_t>(n_obs),
                             std::vector<double>(n_samples, 0.0));
    ts.family_norm2_sum.assign(n_samples, 0.0);

    sys.integrate(state, tg, [&](std::size_t si, double, const Complex* x) {
        for (int k = 0; k <= n; ++k) {
            const Complex* xb = x + static_cast<std::size_t>(k) * d;
            ts.level_norm2[static_cast<std::size_t>(k)][si] = block_norm2(xb, d);
            for (int o = 0; o < n_obs; ++o)
                ts.level_obs[static_cast<std::size_t>(o)][static_cast<std::size_t>(k)][si] =
                    block_obs(options.observables[static_cast<std::size_t>(o)], xb, d);
        }
        double fam_n2 = 0.0;
        std::vector<double> fam_obs(static_cast<std::size_t>(n_obs), 0.0);
        for (int b = cand0; b < part0; ++b) {
            const Complex* xb = x + static_cast<std::size_t>(b) * d;
            fam_n2 += block_norm2(xb, d);
            for (int o = 0; o < n_obs; ++o)
                fam_obs[static_cast<std::size_t>(o)] +=
                    block_obs(options.observables[static_cast<std::size_t>(o)], xb, d);
        }
        ts.family_norm2_sum[si] = fam_n2;
        for (int o = 0; o < n_obs; ++o)
            ts.family_obs_sum[static_cast<std::size_t>(o)][si] =
                fam_obs[static_cast<std::size_t>(o)];
    });

    // Final-time snapshot and tau-norm tables.
    out.state.chain.reserve(static_cast<std::size_t>(n + 1));
    for (int k = 0; k <= n; ++k) out.state.chain.push_back(extract_block(state, k, d));
    out.state.candidates.assign(static_cast<std::size_t>(n_ch), {});
    ts.candidate_norm2_tau.assign(static_cast<std::size_t>(n_ch) * n_freq, 0.0);
    for (int c = 0; c < n_ch; ++c) {
        auto& row = out.state.candidates[static_cast<std::size_t>(c)];
        row.reserve(static_cast<std::size_t>(n_freq));
        for (int j = 0; j < n_freq; ++j) {
            row.push_back(extract_block(state, cand0 + c * n_freq + j, d));
            ts.candidate_norm2_tau[static_cast<std::size_t>(c) * n_freq + j] =
                row.back().squaredNorm();
        }
    }
    if (spectrum) {
        out.state.partials.assign(static_cast<std::size_t>(n_freq), {});
        ts.partial_top_norm2_tau.assign(static_cast<std::size_t>(n_freq), 0.0);
        for (int j = 0; j < n_freq; ++j) {
            auto& ladder = out.state.partials[static_cast<std::size_t>(j)];
            ladder.reserve(static_cast<std::size_t>(n + 1));
            for (int m = 0; m <= n; ++m)
                ladder.push_back(extract_block(state, part0 + j * (n + 1) + m, d));
            ts.partial_top_norm2_tau[static_cast<std::size_t>(j)] =
                ladder.back().squaredNorm();
        }
    }
    return out;
}

ZeroDecayResult evolve_zero_decay(const ModelSpec& model, const ComplexVector& psi0,
                                  double tau, double dt,
                                  const std::vector<ComplexMatrix>& observables,
                                  int target_samples) {
    model.validate();
    check_psi0(model, psi0);
    if (!(tau > 0.0) || !(dt > 0.0))
        throw std::invalid_argument("tau and dt must be positive");
    const int d = model.dim;
    const EffectiveHamiltonian heff = build_effective_hamiltonian(model);
    BlockSystem sys(ComplexMatrix(-kImag * heff.matrix), {});
    sys.add_block(0.0);

    const TimeGrid tg = make_time_grid(tau, dt, target_samples);
    std::vector<Complex> state(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) state[static_cast<std::size_t>(i)] = psi0(i);

    ZeroDecayResult out;
    out.times = tg.sample_times;
    out.norm2.assign(tg.sample_times.size(), 0.0);
    out.obs.assign(observables.size(),
                   std::vector<double>(tg.sample_times.size(), 0.0));
    sys.integrate(state, tg, [&](std::size_t si, double, const Complex* x) {
        out.norm2[si] = block_norm2(x, d);
        for (std::size_t o = 0; o < observables.size(); ++o)
            out.obs[o][si] = block_obs(observables[o], x, d);
    });
    out.final_state = extract_block(state, 0, d);
    return out;
}

UnorderedResult evolve_unordered(const ModelSpec& model, const FrequencyGrid& grid,
                                 const std::vector<DecayEvent>& events,
                                 const ComplexVector& psi0, double tau, double dt,
                                 int cap) {
    model.validate();
    check_psi0(model, psi0);
    if (!(tau > 0.0) || !(dt > 0.0))
        throw std::invalid_argument("tau and dt must be positive");
    if (cap < 0 || cap > BlockSystem::kMaxSources)
        throw ConfigError("unordered cap must lie in [0, " +
                          std::to_string(BlockSystem::kMaxSources) + "]");
    const int n = static_cast<int>(events.size());
    if (n > cap)
        throw ConfigError("unordered hierarchy limited to " + std::to_string(cap) +
                          " decays (2^n growth); got " + std::to_string(n));

    UnorderedResult out;
    out.canonical_events = events;
    {
        // Canonical event order makes permuted inputs integrate the exact
        // same system, so their subset states agree bit for bit.
        ResolvedRecord probe = resolve_record(model, grid, out.canonical_events);
        std::vector<int> order(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            const auto ai = probe.channels[static_cast<std::size_t>(a)],
                       bi = probe.channels[static_cast<std::size_t>(b)];
            if (ai != bi) return ai < bi;
            return probe.freq_idx[static_cast<std::size_t>(a)] <
                   probe.freq_idx[static_cast<std::size_t>(b)];
        });
        std::vector<DecayEvent> sorted;
        sorted.reserve(static_cast<std::size_t>(n));
        for (int i : order)
            sorted.push_back(out.canonical_events[static_cast<std::size_t>(i)]);
        out.canonical_events = std::move(sorted);
    }
    const ResolvedRecord rec = resolve_record(model, grid, out.canonical_events);

    const int d = model.dim;
    const double src_scale = 1.0 / std::sqrt(tau);
    const EffectiveHamiltonian heff = build_effective_hamiltonian(model);
    BlockSystem sys(ComplexMatrix(-kImag * heff.matrix), channel_ops(model));

    const int n_masks = 1 << n;
    for (int mask = 0; mask < n_masks; ++mask) {
        double shift = 0.0;
        for (int e = 0; e < n; ++e)
            if (mask & (1 << e)) shift += rec.omegas[static_cast<std::size_t>(e)];
        sys.add_block(shift);
    }
    for (int mask = 0; mask < n_masks; ++mask)
        for (int e = 0; e < n; ++e)
            if (mask & (1 << e))
                sys.add_source(mask, mask ^ (1 << e),
                               rec.channels[static_cast<std::size_t>(e)], src_scale);

    const TimeGrid tg = make_time_grid(tau, dt, 1);
    std::vector<Complex> state(static_cast<std::size_t>(sys.size()), Complex(0.0));
    for (int i = 0; i < d; ++i) state[static_cast<std::size_t>(i)] = psi0(i);
    sys.integrate(state, tg, [](std::size_t, double, const Complex*) {});

    out.states.reserve(static_cast<std::size_t>(n_masks));
    for (int mask = 0; mask < n_masks; ++mask)
        out.states.push_back(extract_block(state, mask, d));
    return out;
}

double sum_identity_residual(const ModelSpec& model, const FrequencyGrid& grid,
                             const DecayRecord& record, const ComplexVector& psi0,
                             double tau, double dt, std::optional<double> eval_time) {
    const double t_eval = eval_time.value_or(tau);
    if (!(t_eval > 0.0) || t_eval > tau + 1e-12)
        throw std::invalid_argument("identity residual: eval time must lie in (0, tau]");

    model.validate();
    check_psi0(model, psi0);
    const ResolvedRecord rec = resolve_record(model, grid, record.events);
    const int d = model.dim;
    const int n = static_cast<int>(rec.channels.size());
    const int n_ch = static_cast<int>(model.channels.size());
    const int n_freq = grid.size();
    const double src_scale = 1.0 / std::sqrt(tau); // full-interval normalization

    const EffectiveHamiltonian heff = build_effective_hamiltonian(model);
    BlockSystem sys(ComplexMatrix(-kImag * heff.matrix), channel_ops(model));
    for (int k = 0; k <= n; ++k) {
        sys.add_block(rec.cum_shift[static_cast<std::size_t>(k)]);
        if (k > 0)
            sys.add_source(k, k - 1, rec.channels[static_cast<std::size_t>(k - 1)],
                           src_scale);
    }
    const int cand0 = n + 1;
    for (int c = 0; c < n_ch; ++c)
        for (int j = 0; j < n_freq; ++j) {
            const int b = sys.add_block(rec.cum_shift.back() + grid.frequency(j));
            sys.add_source(b, n, c, src_scale);
        }

    const TimeGrid tg = make_time_grid(t_eval, dt, 1);
    std::vector<Complex> state(static_cast<std::size_t>(sys.size()), Complex(0.0));
    for (int i = 0; i < d; ++i) state[static_cast<std::size_t>(i)] = psi0(i);
    sys.integrate(state, tg, [](std::size_t, double, const Complex*) {});

    const ComplexVector top = extract_block(state, n, d);
    double worst = 0.0;
    for (int c = 0; c < n_ch; ++c) {
        ComplexVector sum = ComplexVector::Zero(d);
        for (int j = 0; j < n_freq; ++j)
            sum += extract_block(state, cand0 + c * n_freq + j, d);
        const ComplexVector rhs =
            0.5 * std::sqrt(tau) * (model.channels[static_cast<std::size_t>(c)].op * top);
        worst = std::max(worst, (sum - rhs).norm());
    }
    return worst;
}

} // namespace fdu
