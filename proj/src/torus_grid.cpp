#include "latkin/torus_grid.hpp"

#include <cmath>
#include <numbers>

namespace latkin::kinetic {

namespace {
constexpr double kPi = std::numbers::pi;
}

TorusGrid::TorusGrid(int d, int N) : d_(d), N_(N) {
    if (d_ < 1) throw ConfigError("torus grid: dimension must be >= 1");
    if (N_ < 4 || N_ % 2 != 0) throw ConfigError("torus grid: N must be even and >= 4");
    size_ = 1;
    for (int j = 0; j < d_; ++j) size_ *= N_;
    weight_ = std::pow(2.0 * kPi / N_, d_);
    nodes_.resize(size_);
    index_.resize(size_);
    std::vector<int> idx(d_, 0);
    for (int flat = 0; flat < size_; ++flat) {
        index_[flat] = idx;
        auto& k = nodes_[flat];
        k.resize(d_);
        for (int j = 0; j < d_; ++j) k[j] = -kPi + 2.0 * kPi * idx[j] / N_;
        for (int j = 0; j < d_; ++j) {
            if (++idx[j] < N_) break;
            idx[j] = 0;
        }
    }
}

Eigen::VectorXd TorusGrid::velocity_symbol(const lattice::DispersionLaw& eps,
                                           int axis) const {
    Eigen::VectorXd v(size_);
    for (int i = 0; i < size_; ++i) v[i] = eps.grad_real(nodes_[i], axis);
    return v;
}

Eigen::MatrixXd TorusGrid::differentiation_matrix(int axis) const {
    if (axis < 0 || axis >= d_) throw ConfigError("torus grid: bad axis");
    // 1-D collocation derivative for even N: D_{jl} = (-1)^{j-l)/2 cot((j-l)pi/N).
    Eigen::MatrixXd d1 = Eigen::MatrixXd::Zero(N_, N_);
    for (int j = 0; j < N_; ++j)
        for (int l = 0; l < N_; ++l) {
            if (j == l) continue;
            const int m = j - l;
            const double sign = (m % 2 == 0) ? 1.0 : -1.0;
            d1(j, l) = 0.5 * sign / std::tan(0.5 * m * 2.0 * kPi / N_);
        }
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(size_, size_);
    for (int a = 0; a < size_; ++a)
        for (int jb = 0; jb < N_; ++jb) {
            // Vary only the chosen axis of the multi-index.
            std::vector<int> idx = index_[a];
            const int ja = idx[axis];
            idx[axis] = jb;
            int flat = 0;
            for (int j = d_ - 1; j >= 0; --j) flat = flat * N_ + idx[j];
            D(a, flat) += d1(ja, jb);
        }
    return D;
}

}  // namespace latkin::kinetic
