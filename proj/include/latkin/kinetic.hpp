#pragma once

#include <Eigen/Dense>
#include <complex>
#include <optional>
#include <vector>

#include "latkin/dispersion.hpp"
#include "latkin/reservoir.hpp"
#include "latkin/torus_grid.hpp"

namespace latkin::kinetic {

using complexd = std::complex<double>;

struct Caps {
    double kappa = 0.2;
    double field = 0.2;
};

// Momentum-jump rates R[i,j] = psi(eps(k_j) - eps(k_i)) over the node grid.
// Requires a spectral density holding a decay certificate.
Eigen::MatrixXd rate_matrix(const TorusGrid& grid,
                            const reservoir::SpectralDensity& sd,
                            const lattice::DispersionLaw& eps);

// Linear Boltzmann generator i kappa.grad(eps) - F.grad + gain + loss with the
// parts kept separable.
class KineticGenerator {
  public:
    KineticGenerator(const TorusGrid& grid, const Eigen::MatrixXd& rate,
                     const lattice::DispersionLaw& eps,
                     std::vector<double> kappa_re, std::vector<double> kappa_im,
                     std::vector<double> field, Caps caps = {});

    const TorusGrid& grid() const { return *grid_; }
    const Eigen::MatrixXd& gain() const { return gain_; }
    const Eigen::VectorXd& loss() const { return loss_; }
    const Eigen::MatrixXd& transport() const { return transport_; }
    const Eigen::VectorXcd& drift_term() const { return drift_; }
    const std::vector<double>& field() const { return field_; }
    const std::vector<double>& kappa_re() const { return kappa_re_; }

    // Sampled velocity symbol grad_a(eps) on the grid.
    const Eigen::VectorXd& velocity(int axis) const { return velocity_[axis]; }

    bool kappa_is_zero() const;
    Eigen::MatrixXcd assembled() const;

    // Real form (valid representation when kappa = 0).
    Eigen::MatrixXd assembled_real() const;

  private:
    const TorusGrid* grid_;
    std::vector<double> kappa_re_, kappa_im_, field_;
    Eigen::MatrixXd gain_;
    Eigen::VectorXd loss_;
    Eigen::MatrixXd transport_;
    Eigen::VectorXcd drift_;
    std::vector<Eigen::VectorXd> velocity_;
};

struct Spectrum {
    Eigen::VectorXcd values;
    Eigen::MatrixXcd vectors;
    double diag_residual = 0.0;  // ||MV - V diag|| / ||M||
};

Spectrum dense_spectrum(const Eigen::MatrixXcd& m);

struct StationaryState {
    Eigen::VectorXd zeta;     // normalized <1, zeta> = 1 (quadrature weighted)
    double eigenvalue_abs;    // |mu_0| of the null branch
    double gap_estimate;      // distance of the next eigenvalue
};

// Null right-eigenvector of M^{0,F}; fails on a degenerate null space.
StationaryState stationary_state(const KineticGenerator& gen);

// g = -max{Re mu : mu != branch eigenvalue}; must be positive.
double spectral_gap(const KineticGenerator& gen);

// v^j = sum_k w d_j eps(k) zeta(k).
std::vector<double> drift_velocity(const KineticGenerator& gen,
                                   const Eigen::VectorXd& zeta);

// Green-Kubo diffusion at kappa = 0, F = 0 through the reduced solve
// (-M) g^j = (grad_j eps) zeta on the mean-zero subspace.
Eigen::MatrixXd diffusion_gk(const KineticGenerator& gen,
                             const Eigen::VectorXd& zeta);

struct EigenBranch {
    std::vector<std::vector<double>> kappas;
    std::vector<complexd> values;
};

// Isolated eigenvalue near 0 of M^{kappa,F} tracked along a kappa path.
EigenBranch eigen_branch(const TorusGrid& grid, const Eigen::MatrixXd& rate,
                         const lattice::DispersionLaw& eps,
                         const std::vector<std::vector<double>>& kappa_path,
                         const std::vector<double>& field, Caps caps = {});

// Single branch eigenvalue with a predictor for branch selection.
complexd branch_eigenvalue(const TorusGrid& grid, const Eigen::MatrixXd& rate,
                           const lattice::DispersionLaw& eps,
                           const std::vector<double>& kappa,
                           const std::vector<double>& field, complexd predictor,
                           Caps caps = {});

struct BranchDerivatives {
    std::vector<double> velocity;  // Im du/dkappa at 0
    Eigen::MatrixXd diffusion;     // -1/2 Hessian of Re u at 0
    double richardson_defect;      // Cauchy residual of the extrapolation
};

BranchDerivatives branch_derivatives(const TorusGrid& grid,
                                     const Eigen::MatrixXd& rate,
                                     const lattice::DispersionLaw& eps,
                                     const std::vector<double>& field,
                                     double step = 1e-2, Caps caps = {});

struct EinsteinReport {
    Eigen::MatrixXd dv_dfield;   // mobility tensor at F = 0
    Eigen::MatrixXd beta_d;      // beta * D_gk
    double residual;             // max relative deviation
    double richardson_defect;    // Cauchy residual of the mobility extrapolation
};

EinsteinReport einstein_residual(const TorusGrid& grid,
                                 const reservoir::SpectralDensity& sd,
                                 const lattice::DispersionLaw& eps,
                                 double fd_step = 1e-3, Caps caps = {});

enum class EvolveMethod { EigenBasis, ScalingSquaring };

struct EvolveResult {
    Eigen::VectorXcd value;
    EvolveMethod method;
};

// e^{tM} f0 via the diagonalizable path with a residual check, falling back
// to scaling-and-squaring.
EvolveResult evolve(const KineticGenerator& gen, const Eigen::VectorXcd& f0,
                    double t);

// Scaling-and-squaring matrix exponential with a Taylor remainder bound.
Eigen::MatrixXcd expm(const Eigen::MatrixXcd& a);

}  // namespace latkin::kinetic
