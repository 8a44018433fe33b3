#pragma once

#include <Eigen/Dense>
#include <vector>

#include "latkin/dispersion.hpp"

namespace latkin::lattice {

// Particle Hamiltonian T - lambda^2 F.X on the centered box of side L with
// Dirichlet truncation of the hopping kernel.
class FiniteHamiltonian {
  public:
    FiniteHamiltonian(const DispersionLaw& eps, int L, double lambda,
                      std::vector<double> field);

    int L() const { return L_; }
    int dim() const { return d_; }
    int sites() const { return static_cast<int>(coords_.size()); }
    double lambda() const { return lambda_; }
    const std::vector<double>& field() const { return field_; }
    const DispersionLaw& dispersion() const { return *eps_; }
    const Eigen::MatrixXd& matrix() const { return h_; }
    const std::vector<std::vector<int>>& coords() const { return coords_; }

    // e^{-i t H} by Hermitian eigendecomposition.
    Eigen::MatrixXcd propagator(double t) const;

    // Position expectation series <X_axis>(t) from a localized wave packet
    // exp(-|x|^2/(2 w^2) + i k0 x) at the origin (sanity probe of the
    // Wannier-Stark dynamics); packet_width = 0 degenerates to a point start.
    std::vector<double> position_expectation(const std::vector<double>& t_grid,
                                             int axis = 0, double packet_width = 0.0,
                                             double packet_momentum = 0.0) const;

  private:
    void ensure_eigen() const;

    const DispersionLaw* eps_;
    int L_;
    int d_;
    double lambda_;
    std::vector<double> field_;
    std::vector<std::vector<int>> coords_;
    Eigen::MatrixXd h_;
    mutable bool eig_done_ = false;
    mutable Eigen::VectorXd evals_;
    mutable Eigen::MatrixXd evecs_;
};

struct CombesThomasCertificate {
    double C = 0.0;          // smallest admissible prefactor at (t, nu)
    double C_doubled = 0.0;  // same at side 2L
    double im_eps_sup = 0.0; // sup of |Im eps| on the nu-strip
    bool ok = false;         // finite and stable under doubling L
};

// Smallest C with |e^{-itH}(x,x')| <= C exp(-nu|x-x'|) exp(t sup|Im eps|),
// plus a stability check under doubling of L.
CombesThomasCertificate combes_thomas_fit(const DispersionLaw& eps, int L,
                                          double lambda,
                                          const std::vector<double>& field,
                                          double t, double nu,
                                          double stability_tol = 0.05);

}  // namespace latkin::lattice
