#include "fdu/monte_carlo.hpp"

#include <cmath>
#include <stdexcept>

#include "fdu/errors.hpp"

namespace fdu {

// ---- initial-state sampling ------------------------------------------------

ComplexVector sample_initial_state(const ComplexMatrix& rho0, TrialRng& rng) {
    if (rho0.rows() != rho0.cols() || rho0.rows() < 1)
        throw std::invalid_argument("sample_initial_state: density matrix must be square");
    if ((rho0 - rho0.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("sample_initial_state: density matrix is not Hermitian");
    if (std::abs(rho0.trace().real() - 1.0) > 1e-10 || std::abs(rho0.trace().imag()) > 1e-10)
        throw std::invalid_argument("sample_initial_state: density matrix trace is not 1");

    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(rho0);
    if (es.info() != Eigen::Success)
        throw NumericalFailure("sample_initial_state: eigendecomposition failed", 0.0);
    Eigen::VectorXd evals = es.eigenvalues();
    double total = 0.0;
    for (int k = 0; k < evals.size(); ++k) {
        if (evals[k] < -1e-10)
            throw std::invalid_argument(
                "sample_initial_state: density matrix has a negative eigenvalue");
        if (evals[k] < 0.0) evals[k] = 0.0;
        total += evals[k];
    }
    const double u = rng.next_double() * total;
    double cum = 0.0;
    int pick = static_cast<int>(evals.size()) - 1;
    for (int k = 0; k < evals.size(); ++k) {
        cum += evals[k];
        if (u < cum) {
            pick = k;
            break;
        }
    }
    ComplexVector psi = es.eigenvectors().col(pick);
    psi /= psi.norm();
    return psi;
}

// ---- decay distribution ----------------------------------------------------

int DecayDistribution::sample(TrialRng& rng) const {
    const double u = rng.next_double();
    double cum = 0.0;
    const int n = static_cast<int>(probabilities.size());
    for (int i = 0; i < n; ++i) {
        cum += probabilities[i];
        if (u < cum) return i;
    }
    return n - 1; // rounding slack: u landed past the accumulated total
}

std::optional<DecayDistribution> decay_distribution(const std::vector<double>& norm2,
                                                    int n_channels, int n_freqs) {
    if (n_channels < 1 || n_freqs < 1 ||
        norm2.size() != static_cast<std::size_t>(n_channels) * n_freqs)
        throw std::invalid_argument("decay_distribution: size mismatch");
    double total = 0.0, comp = 0.0;
    for (double x : norm2) {
        if (!std::isfinite(x) || x < 0.0)
            throw std::invalid_argument("decay_distribution: invalid squared norm");
        const double y = x - comp; // compensated sum keeps the total's rounding
        const double t = total + y; // independent of the grid size
        comp = (t - total) - y;
        total = t;
    }
    if (total < 1e-12) return std::nullopt;
    DecayDistribution d;
    d.n_channels = n_channels;
    d.n_freqs = n_freqs;
    d.total_norm2 = total;
    d.probabilities.resize(norm2.size());
    for (std::size_t i = 0; i < norm2.size(); ++i) d.probabilities[i] = norm2[i] / total;
    return d;
}

// ---- one trial -------------------------------------------------------------

TrialResult run_trial(const ModelSpec& model, const FrequencyGrid& grid,
                      const ComplexMatrix& rho0, double tau, double dt, TrialRng& rng,
                      const TrialOptions& options, std::uint64_t trial_index) {
    if (options.n_max < 1)
        throw std::invalid_argument("run_trial: n_max must be at least 1");
    const int n_channels = static_cast<int>(model.channels.size());
    const ComplexVector psi0 = sample_initial_state(rho0, rng);

    TrialResult out;
    out.index = trial_index;
    OrderedOptions oo;
    oo.spectrum_channel = options.spectrum_channel;
    oo.observables = options.observables;
    oo.target_samples = options.target_samples;

    DecayRecord record;
    double p_record = 1.0;
    for (int stage = 1; stage <= options.n_max; ++stage) {
        OrderedResult run = evolve_ordered_hierarchy(model, grid, record, psi0, tau, dt, oo);
        TrajectoryTimeSeries& ts = run.series;
        if (stage == 1) {
            out.times = ts.times;
            out.zero_norm2 = ts.level_norm2[0];
            out.zero_obs.resize(options.observables.size());
            for (std::size_t o = 0; o < options.observables.size(); ++o)
                out.zero_obs[o] = ts.level_obs[o][0];
        }

        TrialFamily fam;
        fam.p_record = p_record;
        fam.family_obs = std::move(ts.family_obs_sum);
        fam.family_norm2 = std::move(ts.family_norm2_sum);
        fam.candidate_norm2_tau = std::move(ts.candidate_norm2_tau);
        fam.partial_top_norm2_tau = std::move(ts.partial_top_norm2_tau);

        auto dist = decay_distribution(fam.candidate_norm2_tau, n_channels, grid.size());
        if (!dist) {
            out.families.push_back(std::move(fam));
            out.terminated_stage = stage;
            break;
        }
        const int flat = dist->sample(rng);
        fam.sampled_flat = flat;
        fam.p_sampled = dist->probabilities[flat];
        p_record *= fam.p_sampled;
        record.events.push_back(
            {model.channels[dist->channel_of(flat)].id, grid.frequency(dist->freq_of(flat))});
        out.families.push_back(std::move(fam));
    }
    out.record = record;
    return out;
}

double TrialResult::estimate(int obs, int ti) const {
    double v = zero_obs.at(obs).at(ti);
    for (const TrialFamily& f : families) v += f.family_obs.at(obs).at(ti) / f.p_record;
    return v;
}

double TrialResult::trace_estimate(int ti) const {
    double v = zero_norm2.at(ti);
    for (const TrialFamily& f : families) v += f.family_norm2.at(ti) / f.p_record;
    return v;
}

double TrialResult::spectrum_estimate(int j) const {
    double v = 0.0;
    for (const TrialFamily& f : families)
        if (!f.partial_top_norm2_tau.empty()) v += f.partial_top_norm2_tau.at(j) / f.p_record;
    return v;
}

double TrialResult::spectrum_total(int n_freqs) const {
    double v = 0.0;
    for (int j = 0; j < n_freqs; ++j) v += spectrum_estimate(j);
    return v;
}

// ---- accumulator -----------------------------------------------------------

void EnsembleAccumulator::StatVec::resize(std::size_t n) {
    mean.assign(n, 0.0);
    m2.assign(n, 0.0);
}

void EnsembleAccumulator::StatVec::add(std::size_t i, double x, double n_after) {
    const double delta = x - mean[i];
    mean[i] += delta / n_after;
    m2[i] += delta * (x - mean[i]);
}

void EnsembleAccumulator::StatVec::merge(const StatVec& o, double n_self, double n_other) {
    if (n_other == 0.0) return;
    const double total = n_self + n_other;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        const double delta = o.mean[i] - mean[i];
        mean[i] += delta * (n_other / total);
        m2[i] += o.m2[i] + delta * delta * (n_self * n_other / total);
    }
}

EnsembleAccumulator::EnsembleAccumulator(Layout layout) : layout_(std::move(layout)) {
    if (layout_.times.empty())
        throw std::invalid_argument("EnsembleAccumulator: empty time grid");
    if (layout_.n_levels < 1)
        throw std::invalid_argument("EnsembleAccumulator: need at least one level");
    const std::size_t nt = layout_.times.size();
    obs_.resize(layout_.observable_names.size());
    for (auto& kv : obs_) kv.resize(nt);
    trace_.resize(nt);
    spectrum_.resize(static_cast<std::size_t>(std::max(0, layout_.n_freqs)));
    spectrum_total_.resize(1);
    level_trace_.resize(static_cast<std::size_t>(layout_.n_levels));
}

void EnsembleAccumulator::add(const TrialResult& trial) {
    const std::size_t nt = layout_.times.size();
    if (trial.times.size() != nt)
        throw std::invalid_argument("EnsembleAccumulator: trial sample grid mismatch");
    const double dn = static_cast<double>(count_ + 1);
    for (std::size_t o = 0; o < obs_.size(); ++o)
        for (std::size_t ti = 0; ti < nt; ++ti)
            obs_[o].add(ti, trial.estimate(static_cast<int>(o), static_cast<int>(ti)), dn);
    for (std::size_t ti = 0; ti < nt; ++ti)
        trace_.add(ti, trial.trace_estimate(static_cast<int>(ti)), dn);
    if (layout_.n_freqs > 0) {
        for (int j = 0; j < layout_.n_freqs; ++j)
            spectrum_.add(static_cast<std::size_t>(j), trial.spectrum_estimate(j), dn);
        spectrum_total_.add(0, trial.spectrum_total(layout_.n_freqs), dn);
    }
    const std::size_t last = nt - 1;
    for (int lvl = 0; lvl < layout_.n_levels; ++lvl) {
        double contrib = 0.0;
        if (lvl == 0) {
            contrib = trial.zero_norm2[last];
        } else if (static_cast<std::size_t>(lvl) <= trial.families.size()) {
            const TrialFamily& f = trial.families[static_cast<std::size_t>(lvl - 1)];
            contrib = f.family_norm2[last] / f.p_record;
        }
        level_trace_.add(static_cast<std::size_t>(lvl), contrib, dn);
    }
    if (trial.terminated_stage >= 0) ++terminated_;
    ++count_;
}

void EnsembleAccumulator::merge(const EnsembleAccumulator& other) {
    if (other.layout_.times.size() != layout_.times.size() ||
        other.obs_.size() != obs_.size() || other.layout_.n_freqs != layout_.n_freqs ||
        other.layout_.n_levels != layout_.n_levels)
        throw std::invalid_argument("EnsembleAccumulator: merging incompatible layouts");
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(other.count_);
    for (std::size_t o = 0; o < obs_.size(); ++o) obs_[o].merge(other.obs_[o], na, nb);
    trace_.merge(other.trace_, na, nb);
    spectrum_.merge(other.spectrum_, na, nb);
    spectrum_total_.merge(other.spectrum_total_, na, nb);
    level_trace_.merge(other.level_trace_, na, nb);
    count_ += other.count_;
    terminated_ += other.terminated_;
}

namespace {

SeriesStats stats_of(const std::vector<double>& mean, const std::vector<double>& m2,
                     std::size_t n) {
    SeriesStats s;
    s.mean = mean;
    s.stderr_.resize(mean.size());
    const double dn = static_cast<double>(n);
    for (std::size_t i = 0; i < mean.size(); ++i) {
        double var = m2[i] / (dn - 1.0);
        if (var < 0.0) var = 0.0; // rounding on (near-)constant samples
        s.stderr_[i] = std::sqrt(var / dn);
    }
    return s;
}

} // namespace

EnsembleEstimate EnsembleAccumulator::finalize() const {
    if (count_ < 2)
        throw ConfigError("ensemble statistics need at least two trials");
    EnsembleEstimate e;
    e.n_trials = count_;
    e.times = layout_.times;
    e.observable_names = layout_.observable_names;
    e.observables.reserve(obs_.size());
    for (const auto& kv : obs_) e.observables.push_back(stats_of(kv.mean, kv.m2, count_));
    e.trace = stats_of(trace_.mean, trace_.m2, count_);
    if (layout_.n_freqs > 0) {
        e.spectrum = stats_of(spectrum_.mean, spectrum_.m2, count_);
        SeriesStats tot = stats_of(spectrum_total_.mean, spectrum_total_.m2, count_);
        e.spectrum_total_mean = tot.mean[0];
        e.spectrum_total_stderr = tot.stderr_[0];
    }
    const double dn = static_cast<double>(count_);
    e.level_trace_mean = level_trace_.mean;
    e.level_trace_var.resize(level_trace_.m2.size());
    for (std::size_t l = 0; l < level_trace_.m2.size(); ++l) {
        double var = level_trace_.m2[l] / (dn - 1.0);
        e.level_trace_var[l] = var < 0.0 ? 0.0 : var;
    }
    e.terminated_trials = terminated_;
    return e;
}

} // namespace fdu
