#include "fdu/block_system.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fdu {

BlockSystem::BlockSystem(const ComplexMatrix& base, std::vector<ComplexMatrix> ops)
    : dim_(static_cast<int>(base.rows())) {
    if (base.rows() != base.cols() || dim_ < 1)
        throw std::invalid_argument("BlockSystem: base must be square");
    base_.resize(static_cast<std::size_t>(dim_) * dim_);
    for (int i = 0; i < dim_; ++i)
        for (int j = 0; j < dim_; ++j)
            base_[static_cast<std::size_t>(i) * dim_ + j] = base(i, j);
    ops_.reserve(ops.size());
    for (const auto& op : ops) {
        if (op.rows() != dim_ || op.cols() != dim_)
            throw std::invalid_argument("BlockSystem: operator dimension mismatch");
        std::vector<Complex> flat(static_cast<std::size_t>(dim_) * dim_);
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j)
                flat[static_cast<std::size_t>(i) * dim_ + j] = op(i, j);
        ops_.push_back(std::move(flat));
    }
}

int BlockSystem::add_block(double shift) {
    Block b;
    b.shift = shift;
    blocks_.push_back(b);
    return static_cast<int>(blocks_.size()) - 1;
}

void BlockSystem::add_source(int block, int source_block, int op, double scale) {
    if (block < 0 || block >= block_count() || source_block < 0 ||
        source_block >= block_count())
        throw std::invalid_argument("BlockSystem::add_source: block index out of range");
    if (op < 0 || op >= static_cast<int>(ops_.size()))
        throw std::invalid_argument("BlockSystem::add_source: operator index out of range");
    Block& b = blocks_[static_cast<std::size_t>(block)];
    if (b.n_src >= kMaxSources)
        throw std::invalid_argument("BlockSystem::add_source: too many sources on block " +
                                    std::to_string(block));
    b.src[static_cast<std::size_t>(b.n_src++)] = Source{source_block, op, scale};
}

void BlockSystem::derivative(const Complex* x, Complex* y) const {
    const int d = dim_;
    // std::complex<double> is layout-compatible with double[2]; the kernel
    // works on raw re/im pairs to keep complex multiplies branch-free.
    const double* X = reinterpret_cast<const double*>(x);
    double* Y = reinterpret_cast<double*>(y);
    const double* B = reinterpret_cast<const double*>(base_.data());
    const int nb = block_count();
    for (int b = 0; b < nb; ++b) {
        const Block& blk = blocks_[static_cast<std::size_t>(b)];
        const double* xb = X + 2L * b * d;
        double* yb = Y + 2L * b * d;
        const double s = blk.shift;
        for (int i = 0; i < d; ++i) {
            const double* Bi = B + 2L * i * d;
            double ar = 0.0, ai = 0.0;
            for (int j = 0; j < d; ++j) {
                const double br = Bi[2 * j], bi = Bi[2 * j + 1];
                const double xr = xb[2 * j], xi = xb[2 * j + 1];
                ar += br * xr - bi * xi;
                ai += br * xi + bi * xr;
            }
            // -i * s * x adds (s*im, -s*re)
            ar += s * xb[2 * i + 1];
            ai -= s * xb[2 * i];
            yb[2 * i] = ar;
            yb[2 * i + 1] = ai;
        }
        for (int k = 0; k < blk.n_src; ++k) {
            const Source& src = blk.src[static_cast<std::size_t>(k)];
            const double* xs = X + 2L * src.src * d;
            const double* Op =
                reinterpret_cast<const double*>(ops_[static_cast<std::size_t>(src.op)].data());
            const double c = src.scale;
            for (int i = 0; i < d; ++i) {
                const double* Oi = Op + 2L * i * d;
                double ar = 0.0, ai = 0.0;
                for (int j = 0; j < d; ++j) {
                    const double br = Oi[2 * j], bi = Oi[2 * j + 1];
                    const double xr = xs[2 * j], xi = xs[2 * j + 1];
                    ar += br * xr - bi * xi;
                    ai += br * xi + bi * xr;
                }
                yb[2 * i] += c * ar;
                yb[2 * i + 1] += c * ai;
            }
        }
    }
}

void BlockSystem::rk4_sweep(std::vector<Complex>& x, double dt, int n_steps, int step0,
                            std::vector<Complex>& k1, std::vector<Complex>& k2,
                            std::vector<Complex>& k3, std::vector<Complex>& k4,
                            std::vector<Complex>& tmp) const {
    const long n = size();
    double* X = reinterpret_cast<double*>(x.data());
    double* K1 = reinterpret_cast<double*>(k1.data());
    double* K2 = reinterpret_cast<double*>(k2.data());
    double* K3 = reinterpret_cast<double*>(k3.data());
    double* K4 = reinterpret_cast<double*>(k4.data());
    double* T = reinterpret_cast<double*>(tmp.data());
    const long m = 2 * n;
    for (int step = 0; step < n_steps; ++step) {
        derivative(x.data(), k1.data());
        for (long i = 0; i < m; ++i) T[i] = X[i] + 0.5 * dt * K1[i];
        derivative(tmp.data(), k2.data());
        for (long i = 0; i < m; ++i) T[i] = X[i] + 0.5 * dt * K2[i];
        derivative(tmp.data(), k3.data());
        for (long i = 0; i < m; ++i) T[i] = X[i] + dt * K3[i];
        derivative(tmp.data(), k4.data());
        double sumsq = 0.0;
        const double w = dt / 6.0;
        for (long i = 0; i < m; ++i) {
            X[i] += w * (K1[i] + 2.0 * K2[i] + 2.0 * K3[i] + K4[i]);
            sumsq += X[i] * X[i];
        }
        if (!std::isfinite(sumsq))
            throw NumericalFailure("hierarchy integration diverged",
                                   (step0 + step + 1) * dt);
    }
}

} // namespace fdu
