#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

#include "latkin/diagrams.hpp"
#include "latkin/dispersion.hpp"
#include "latkin/kinetic.hpp"
#include "latkin/reservoir.hpp"
#include "latkin/torus_grid.hpp"

namespace latkin::dyson {

using complexd = std::complex<double>;
using diagrams::SigmaOrder;

// Periodic lattice (Z/L)^d with its momentum grid; fibers of translation
// invariant super-operators act on functions over this grid.
class PeriodicFiberBasis {
  public:
    PeriodicFiberBasis(const lattice::DispersionLaw& eps, int L);

    const kinetic::TorusGrid& grid() const { return grid_; }
    const lattice::DispersionLaw& dispersion() const { return *eps_; }
    int d() const { return eps_->dim(); }
    int L() const { return L_; }
    int n() const { return grid_.size(); }

    // eps(k + shift) sampled over the grid.
    Eigen::VectorXd eps_shifted(const std::vector<double>& shift) const;

  private:
    const lattice::DispersionLaw* eps_;
    int L_;
    kinetic::TorusGrid grid_;
};

struct FiberOperator {
    std::vector<double> p;
    Eigen::MatrixXcd matrix;
    double lambda = 0.0;
    std::vector<double> field;
    double t = 0.0;                 // construction time, when applicable
    complexd z{0.0, 0.0};           // construction Laplace point, when applicable
    double quad_error = 0.0;        // quadrature error estimate, when applicable
};

// Rescaled fiber index: the dynamics at fiber p = -lambda^2 kappa reproduces
// the kinetic generator at kappa.
std::vector<double> fiber_for_kappa(double lambda, const std::vector<double>& kappa);

// Trigonometric shift f(k) -> f(k - a) on the grid (exp(-a.D) per axis).
Eigen::MatrixXd shift_matrix(const kinetic::TorusGrid& grid,
                             const std::vector<double>& a);

// Free fiber propagator: phase exp(-i int_0^t Omega_p(k - lambda^2 F (t-s)) ds)
// composed with the shift f(k) -> f(k - lambda^2 F t).
FiberOperator free_fiber_propagator(const PeriodicFiberBasis& basis,
                                    const std::vector<double>& p, double t,
                                    double lambda, const std::vector<double>& field);

// Generator of the free fiber dynamics: -i diag(Omega_p) - lambda^2 F.D.
Eigen::MatrixXcd free_fiber_generator(const PeriodicFiberBasis& basis,
                                      const std::vector<double>& p, double lambda,
                                      const std::vector<double>& field);

// Single-pairing irreducible amplitude over [0, t] with endpoints pinned.
FiberOperator ladder_vertex(const PeriodicFiberBasis& basis,
                            const reservoir::SpectralDensity& sd,
                            const std::vector<double>& p, double t, double lambda,
                            const std::vector<double>& field,
                            SigmaOrder order = SigmaOrder::TimeAligned);

struct TransferOptions {
    double T_cut = 42.0;
    int panels = 84;
    int nodes_per_panel = 8;
    SigmaOrder order = SigmaOrder::TimeAligned;
    bool check_tail = true;
};

// M(z)_p: Laplace transform of the ladder vertex by panel quadrature.
FiberOperator ladder_transfer(const PeriodicFiberBasis& basis,
                              const reservoir::SpectralDensity& sd,
                              const std::vector<double>& p, complexd z,
                              double lambda, const std::vector<double>& field,
                              const TransferOptions& opts = {});

// S(z) = (L_S + M(z))_p at ladder truncation.
Eigen::MatrixXcd pseudo_resolvent_symbol(const PeriodicFiberBasis& basis,
                                         const reservoir::SpectralDensity& sd,
                                         const std::vector<double>& p, complexd z,
                                         double lambda,
                                         const std::vector<double>& field,
                                         const TransferOptions& opts = {});

struct LadderCheckPoint {
    double lambda;
    double opnorm_diff;       // || lambda^{-2} (L_S + M(0))_p - M^{kappa,0} ||_2
    double antihermitian;     // anti-Hermitian part of the difference
};

struct LadderCheck {
    std::vector<LadderCheckPoint> points;
    double slope = 0.0;  // log-log fit of opnorm_diff against lambda
};

LadderCheck ladder_limit_check(const PeriodicFiberBasis& basis,
                               const reservoir::SpectralDensity& sd,
                               const std::vector<double>& kappa,
                               const std::vector<double>& lambdas,
                               const TransferOptions& opts = {});

struct PoleOptions {
    double damping = 0.5;
    double tol = 1e-10;
    int max_iterations = 200;
    int contour_nodes = 64;
    double radius_scale = 0.05;  // contour radius = lambda^2 * radius_scale / 2
    TransferOptions transfer;
};

struct PoleResult {
    complexd u;
    Eigen::MatrixXcd residue;
    double rank_one_defect;
    int iterations;
};

// Fixed point z* = eig(S(z*)) continued from the kinetic branch, with the
// residue from contour quadrature around z*.
PoleResult pole_track(const PeriodicFiberBasis& basis,
                      const reservoir::SpectralDensity& sd,
                      const std::vector<double>& kappa, double lambda,
                      const std::vector<double>& field, complexd seed = {0.0, 0.0},
                      const PoleOptions& opts = {});

struct MixingOptions {
    double dt = 0.1;           // Volterra step
    double memory_span = 25.0; // memory kernel support used in the convolution
    double t_max_gaps = 6.0;   // evolve to t_max_gaps / (lambda^2 g_ref)
    double fit_lo_gaps = 1.5;  // fit window in units of 1 / (lambda^2 g_ref)
    double fit_hi_gaps = 5.0;
    double g_ref = 0.3;        // reference kinetic gap scale
    SigmaOrder order = SigmaOrder::TimeAligned;
};

struct MixingResult {
    double fitted_rate = 0.0;        // g in ||Z_t - e^{ut} P|| <= C exp(-g lambda^2 t)
    double probability_drift = 0.0;  // max |<1, Z_t f> - <1, f>| at p = 0
    std::vector<double> times;
    std::vector<double> deviation_norms;
};

// Ladder-truncated Z_t from the memory (Nakajima-Zwanzig) equation
//   Z'(t) = L_S Z(t) + int_0^t V(s) Z(t-s) ds,
// i.e. the fully resummed polymer series with one-pair irreducible vertices.
MixingResult mixing_check(const PeriodicFiberBasis& basis,
                          const reservoir::SpectralDensity& sd,
                          const std::vector<double>& kappa, double lambda,
                          const PoleResult& pole, const MixingOptions& opts = {});

// Bromwich inversion of (z - S(z))^{-1} at a single time; cross-check tool.
Eigen::MatrixXcd zt_bromwich(const PeriodicFiberBasis& basis,
                             const reservoir::SpectralDensity& sd,
                             const std::vector<double>& p, double lambda,
                             const std::vector<double>& field, double t,
                             double abscissa, double span, int nodes,
                             const TransferOptions& opts = {});

// Ladder-truncated Z at a single time by stepping the memory equation.
Eigen::MatrixXcd zt_volterra(const PeriodicFiberBasis& basis,
                             const reservoir::SpectralDensity& sd,
                             const std::vector<double>& p, double lambda,
                             const std::vector<double>& field, double t,
                             double dt = 0.05, double memory_span = 20.0,
                             SigmaOrder order = SigmaOrder::TimeAligned);

struct N2Estimate {
    double estimate = 0.0;
    double stderr_estimate = 0.0;
    int samples = 0;
};

// Monte Carlo estimate (over the two interior times) of a column-sum norm
// surrogate of the two-pair irreducible vertex; the site and side sums are
// carried out exactly on the periodic lattice, and the surrogate bounds the
// fiber operator uniformly in p.
N2Estimate vertex_n2_norm(const PeriodicFiberBasis& basis,
                          const reservoir::SpectralDensity& sd,
                          const std::vector<double>& p, double t, double lambda,
                          const std::vector<double>& field, int mc_samples,
                          std::uint64_t seed);

}  // namespace latkin::dyson
