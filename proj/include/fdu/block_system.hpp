// block_system.hpp — lockstep integrator for coupled families of small states
//
// Every hierarchy used by the trajectory engine and the brute-force
// reconstruction is a collection of d-dimensional complex blocks obeying
//
//   d x_b / dt = (B - i * shift_b * I) x_b + sum_s scale_s * Op_{op_s} x_{src_s}
//
// with one shared base matrix B (here -i * H_eff), a real frequency shift per
// block, and sources that apply an operator from a small shared table to
// another block. The right-hand side is time independent, so the whole
// collection integrates in lockstep as one flat vector with a fixed-step RK4
// sweep. The inner kernel is written on raw re/im pairs; it is the hot path
// for every Monte Carlo trial.

#pragma once

#include <array>
#include <complex>
#include <vector>

#include "fdu/numerics.hpp"

namespace fdu {

class BlockSystem {
public:
    // base: d x d, applied to every block. ops: operator table for sources.
    BlockSystem(const ComplexMatrix& base, std::vector<ComplexMatrix> ops);

    // Returns the new block's index. shift adds the term -i*shift*x_b.
    int add_block(double shift);

    // x_block += scale * ops[op] * x_source. At most kMaxSources per block.
    void add_source(int block, int source_block, int op, double scale);

    int dim() const { return dim_; }
    int block_count() const { return static_cast<int>(blocks_.size()); }
    long size() const { return static_cast<long>(blocks_.size()) * dim_; }

    // y = dx/dt, both of length size().
    void derivative(const Complex* x, Complex* y) const;

    // Fixed-step RK4 over the grid; state must have length size().
    // on_sample(sample_index, time, state_data) fires at every grid sample,
    // including t = 0 and the final time. Throws NumericalFailure when the
    // state stops being finite.
    template <class Fn>
    void integrate(std::vector<Complex>& state, const TimeGrid& grid,
                   Fn&& on_sample) const;

    static constexpr int kMaxSources = 4;

private:
    struct Source {
        int src = 0;
        int op = 0;
        double scale = 0.0;
    };
    struct Block {
        double shift = 0.0;
        int n_src = 0;
        std::array<Source, kMaxSources> src{};
    };

    void rk4_sweep(std::vector<Complex>& x, double dt, int n_steps, int step0,
                   std::vector<Complex>& k1, std::vector<Complex>& k2,
                   std::vector<Complex>& k3, std::vector<Complex>& k4,
                   std::vector<Complex>& tmp) const;

    int dim_;
    std::vector<Complex> base_; // row-major d*d
    std::vector<std::vector<Complex>> ops_;
    std::vector<Block> blocks_;
};

template <class Fn>
void BlockSystem::integrate(std::vector<Complex>& state, const TimeGrid& grid,
                            Fn&& on_sample) const {
    if (static_cast<long>(state.size()) != size())
        throw std::invalid_argument("BlockSystem::integrate: state size mismatch");
    std::vector<Complex> k1(state.size()), k2(state.size()), k3(state.size()),
        k4(state.size()), tmp(state.size());
    std::size_t next = 0;
    int step = 0;
    while (true) {
        if (next < grid.sample_steps.size() && grid.sample_steps[next] == step) {
            on_sample(next, grid.sample_times[next], state.data());
            ++next;
        }
        if (step == grid.n_steps) break;
        const int run_to = (next < grid.sample_steps.size())
                               ? grid.sample_steps[next]
                               : grid.n_steps;
        rk4_sweep(state, grid.dt, run_to - step, step, k1, k2, k3, k4, tmp);
        step = run_to;
    }
}

} // namespace fdu
