#pragma once

#include <Eigen/Dense>
#include <vector>

#include "latkin/dispersion.hpp"
#include "latkin/errors.hpp"

namespace latkin::kinetic {

// Uniform momentum grid on [-pi, pi)^d with the trapezoid weight (2pi/N)^d.
class TorusGrid {
  public:
    TorusGrid(int d, int N);

    int dim() const { return d_; }
    int points_per_axis() const { return N_; }
    int size() const { return size_; }
    double weight() const { return weight_; }

    const std::vector<double>& node(int flat) const { return nodes_[flat]; }
    const std::vector<std::vector<double>>& nodes() const { return nodes_; }

    // Values of f over the grid for a callable f(k).
    template <class F>
    Eigen::VectorXd sample(F&& f) const {
        Eigen::VectorXd v(size_);
        for (int i = 0; i < size_; ++i) v[i] = f(nodes_[i]);
        return v;
    }

    // Multiplication symbol of the velocity operator along an axis.
    Eigen::VectorXd velocity_symbol(const lattice::DispersionLaw& eps, int axis) const;

    // Quadrature functional <1, f> = w * sum f.
    double mean_functional(const Eigen::VectorXd& f) const { return weight_ * f.sum(); }
    std::complex<double> mean_functional(const Eigen::VectorXcd& f) const {
        return weight_ * f.sum();
    }

    // Fourier-collocation differentiation matrix along one axis, lifted to the
    // full grid (exactly antisymmetric, annihilates constants).
    Eigen::MatrixXd differentiation_matrix(int axis) const;

  private:
    int d_;
    int N_;
    int size_;
    double weight_;
    std::vector<std::vector<double>> nodes_;
    std::vector<std::vector<int>> index_;
};

}  // namespace latkin::kinetic
