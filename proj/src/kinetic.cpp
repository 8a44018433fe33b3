#include "latkin/kinetic.hpp"

#include <cmath>
#include <limits>

namespace latkin::kinetic {

Eigen::MatrixXd rate_matrix(const TorusGrid& grid,
                            const reservoir::SpectralDensity& sd,
                            const lattice::DispersionLaw& eps) {
    if (!sd.certificate())
        throw ConfigError("rate_matrix: spectral density lacks a decay certificate");
    const int n = grid.size();
    Eigen::VectorXd e(n);
    for (int i = 0; i < n; ++i) e[i] = eps.eval_real(grid.node(i));
    Eigen::MatrixXd r(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) r(i, j) = sd.psd(e[j] - e[i]);
    return r;
}

KineticGenerator::KineticGenerator(const TorusGrid& grid, const Eigen::MatrixXd& rate,
                                   const lattice::DispersionLaw& eps,
                                   std::vector<double> kappa_re,
                                   std::vector<double> kappa_im,
                                   std::vector<double> field, Caps caps)
    : grid_(&grid), kappa_re_(std::move(kappa_re)), kappa_im_(std::move(kappa_im)),
      field_(std::move(field)) {
    const int d = grid.dim();
    const int n = grid.size();
    if (rate.rows() != n || rate.cols() != n)
        throw ConfigError("generator: rate matrix does not match the grid");
    if (static_cast<int>(kappa_re_.size()) != d ||
        static_cast<int>(kappa_im_.size()) != d ||
        static_cast<int>(field_.size()) != d)
        throw ConfigError("generator: kappa/field dimension mismatch");
    double knorm = 0.0, fnorm = 0.0;
    for (int j = 0; j < d; ++j) {
        knorm += kappa_re_[j] * kappa_re_[j] + kappa_im_[j] * kappa_im_[j];
        fnorm += field_[j] * field_[j];
    }
    if (std::sqrt(knorm) > caps.kappa + 1e-15)
        throw ConfigError("generator: |kappa| exceeds the configured cap");
    if (std::sqrt(fnorm) > caps.field + 1e-15)
        throw ConfigError("generator: |field| exceeds the configured cap");
    if (rate.minCoeff() < 0.0)
        throw ConfigError("generator: rate matrix has negative entries");

    const double w = grid.weight();
    gain_ = w * rate.transpose();
    loss_ = -w * rate.rowwise().sum();

    transport_ = Eigen::MatrixXd::Zero(n, n);
    for (int a = 0; a < d; ++a)
        if (field_[a] != 0.0) transport_ -= field_[a] * grid.differentiation_matrix(a);

    velocity_.resize(d);
    for (int a = 0; a < d; ++a) velocity_[a] = grid.velocity_symbol(eps, a);

    drift_.resize(n);
    for (int i = 0; i < n; ++i) {
        complexd acc{0.0, 0.0};
        for (int a = 0; a < d; ++a)
            acc += complexd(kappa_re_[a], kappa_im_[a]) * velocity_[a][i];
        drift_[i] = complexd(0.0, 1.0) * acc;
    }
}

bool KineticGenerator::kappa_is_zero() const {
    for (double x : kappa_re_)
        if (x != 0.0) return false;
    for (double x : kappa_im_)
        if (x != 0.0) return false;
    return true;
}

Eigen::MatrixXcd KineticGenerator::assembled() const {
    Eigen::MatrixXcd m = (gain_ + transport_).cast<complexd>();
    m += loss_.cast<complexd>().asDiagonal();
    Eigen::MatrixXcd dd = drift_.asDiagonal();
    m += dd;
    return m;
}

Eigen::MatrixXd KineticGenerator::assembled_real() const {
    if (!kappa_is_zero())
        throw ConfigError("generator: real form only exists at kappa = 0");
    Eigen::MatrixXd m = gain_ + transport_;
    m += Eigen::MatrixXd(loss_.asDiagonal());
    return m;
}

Spectrum dense_spectrum(const Eigen::MatrixXcd& m) {
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(m);
    if (es.info() != Eigen::Success)
        throw NumericalError("dense eigendecomposition failed");
    Spectrum s{es.eigenvalues(), es.eigenvectors(), 0.0};
    const double mn = m.norm();
    s.diag_residual =
        (m * s.vectors - s.vectors * s.values.asDiagonal()).norm() / (mn > 0 ? mn : 1.0);
    return s;
}

namespace {
int nearest_index(const Eigen::VectorXcd& values, complexd target) {
    int best = 0;
    for (int i = 1; i < values.size(); ++i)
        if (std::abs(values[i] - target) < std::abs(values[best] - target)) best = i;
    return best;
}
}  // namespace

StationaryState stationary_state(const KineticGenerator& gen) {
    if (!gen.kappa_is_zero())
        throw ConfigError("stationary_state: defined at kappa = 0 only");
    const auto& grid = gen.grid();
    const Spectrum s = dense_spectrum(gen.assembled());

    const int i0 = nearest_index(s.values, {0.0, 0.0});
    double gap_est = std::numeric_limits<double>::infinity();
    for (int i = 0; i < s.values.size(); ++i)
        if (i != i0) gap_est = std::min(gap_est, std::abs(s.values[i] - s.values[i0]));
    if (gap_est < 1e-8)
        throw NumericalError("stationary_state: degenerate null space, gap estimate " +
                             std::to_string(gap_est));

    Eigen::VectorXcd z = s.vectors.col(i0);
    const complexd norm = grid.mean_functional(z);
    if (std::abs(norm) < 1e-12)
        throw NumericalError("stationary_state: null vector has vanishing mean");
    z /= norm;
    if (z.imag().cwiseAbs().maxCoeff() > 1e-8)
        throw NumericalError("stationary_state: null vector is not real");
    Eigen::VectorXd zeta = z.real();
    if (zeta.minCoeff() < -1e-10)
        throw NumericalError("stationary_state: null vector is not nonnegative");
    return {zeta, std::abs(s.values[i0]), gap_est};
}

double spectral_gap(const KineticGenerator& gen) {
    const Spectrum s = dense_spectrum(gen.assembled());
    const int i0 = nearest_index(s.values, {0.0, 0.0});
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < s.values.size(); ++i)
        if (i != i0) worst = std::max(worst, s.values[i].real());
    const double g = -worst;
    if (!(g > 0.0))
        throw AssumptionViolation("spectral_gap: non-positive gap " + std::to_string(g));
    return g;
}

std::vector<double> drift_velocity(const KineticGenerator& gen,
                                   const Eigen::VectorXd& zeta) {
    const auto& grid = gen.grid();
    const int d = grid.dim();
    std::vector<double> v(d);
    for (int a = 0; a < d; ++a)
        v[a] = grid.weight() * gen.velocity(a).dot(zeta);
    return v;
}

Eigen::MatrixXd diffusion_gk(const KineticGenerator& gen, const Eigen::VectorXd& zeta) {
    if (!gen.kappa_is_zero())
        throw ConfigError("diffusion_gk: requires kappa = 0");
    for (double f : gen.field())
        if (f != 0.0) throw ConfigError("diffusion_gk: equilibrium route requires F = 0");
    const auto& grid = gen.grid();
    const int n = grid.size();
    const int d = grid.dim();
    const double w = grid.weight();

    // Bordered solve: (-M) g = rhs with <1, g> = 0; the border makes the
    // system nonsingular on the full space.
    const Eigen::MatrixXd m = gen.assembled_real();
    Eigen::MatrixXd big = Eigen::MatrixXd::Zero(n + 1, n + 1);
    big.topLeftCorner(n, n) = -m;
    big.topRightCorner(n, 1) = zeta;
    big.bottomLeftCorner(1, n) = w * Eigen::RowVectorXd::Ones(n);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(big);

    std::vector<Eigen::VectorXd> g(d);
    for (int a = 0; a < d; ++a) {
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
        rhs.head(n) = gen.velocity(a).cwiseProduct(zeta);
        const Eigen::VectorXd sol = lu.solve(rhs);
        const Eigen::VectorXd residual =
            big * sol - rhs;
        if (residual.norm() > 1e-8 * (1.0 + rhs.norm()))
            throw NumericalError("diffusion_gk: singular reduced solve");
        g[a] = sol.head(n);
    }
    Eigen::MatrixXd D(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) D(i, j) = w * gen.velocity(i).dot(g[j]);
    return D;
}

complexd branch_eigenvalue(const TorusGrid& grid, const Eigen::MatrixXd& rate,
                           const lattice::DispersionLaw& eps,
                           const std::vector<double>& kappa,
                           const std::vector<double>& field, complexd predictor,
                           Caps caps) {
    const KineticGenerator gen(grid, rate, eps, kappa,
                               std::vector<double>(grid.dim(), 0.0), field, caps);
    const Spectrum s = dense_spectrum(gen.assembled());
    const int idx = nearest_index(s.values, predictor);
    // branch isolation: the nearest competitor must be farther than the move
    double competitor = std::numeric_limits<double>::infinity();
    for (int i = 0; i < s.values.size(); ++i)
        if (i != idx)
            competitor = std::min(competitor, std::abs(s.values[i] - s.values[idx]));
    if (competitor < 1e-12)
        throw NumericalError("branch_eigenvalue: branch crossing detected near " +
                             std::to_string(s.values[idx].real()));
    return s.values[idx];
}

EigenBranch eigen_branch(const TorusGrid& grid, const Eigen::MatrixXd& rate,
                         const lattice::DispersionLaw& eps,
                         const std::vector<std::vector<double>>& kappa_path,
                         const std::vector<double>& field, Caps caps) {
    EigenBranch br;
    complexd predictor{0.0, 0.0};
    for (const auto& kappa : kappa_path) {
        const complexd u = branch_eigenvalue(grid, rate, eps, kappa, field, predictor, caps);
        br.kappas.push_back(kappa);
        br.values.push_back(u);
        predictor = u;
    }
    return br;
}

namespace {
// u along a single kappa axis, continued from 0 through intermediate steps.
complexd branch_along_axis(const TorusGrid& grid, const Eigen::MatrixXd& rate,
                           const lattice::DispersionLaw& eps, int axis, double kval,
                           const std::vector<double>& field, Caps caps) {
    complexd predictor{0.0, 0.0};
    std::vector<double> kappa(grid.dim(), 0.0);
    const int steps = 4;
    complexd u = 0.0;
    for (int s = 1; s <= steps; ++s) {
        kappa[axis] = kval * s / steps;
        u = branch_eigenvalue(grid, rate, eps, kappa, field, predictor, caps);
        predictor = u;
    }
    return u;
}

complexd branch_along_diag(const TorusGrid& grid, const Eigen::MatrixXd& rate,
                           const lattice::DispersionLaw& eps, int ax1, int ax2,
                           double k1, double k2, const std::vector<double>& field,
                           Caps caps) {
    complexd predictor{0.0, 0.0};
    std::vector<double> kappa(grid.dim(), 0.0);
    const int steps = 4;
    complexd u = 0.0;
    for (int s = 1; s <= steps; ++s) {
        kappa[ax1] = k1 * s / steps;
        kappa[ax2] = k2 * s / steps;
        u = branch_eigenvalue(grid, rate, eps, kappa, field, predictor, caps);
        predictor = u;
    }
    return u;
}
}  // namespace

BranchDerivatives branch_derivatives(const TorusGrid& grid,
                                     const Eigen::MatrixXd& rate,
                                     const lattice::DispersionLaw& eps,
                                     const std::vector<double>& field, double step,
                                     Caps caps) {
    const int d = grid.dim();
    if (step > 1e-2 + 1e-15) throw ConfigError("branch_derivatives: step must be <= 1e-2");
    BranchDerivatives out;
    out.velocity.assign(d, 0.0);
    out.diffusion = Eigen::MatrixXd::Zero(d, d);
    out.richardson_defect = 0.0;

    const complexd u0 = branch_eigenvalue(grid, rate, eps, std::vector<double>(d, 0.0),
                                          field, {0.0, 0.0}, caps);

    auto u_axis = [&](int a, double k) {
        return branch_along_axis(grid, rate, eps, a, k, field, caps);
    };

    for (int a = 0; a < d; ++a) {
        auto first = [&](double h) {
            return (u_axis(a, h) - u_axis(a, -h)) / (2.0 * h);
        };
        auto second = [&](double h) {
            return (u_axis(a, h) - 2.0 * u0 + u_axis(a, -h)) / (h * h);
        };
        const complexd d1h = first(step), d1h2 = first(0.5 * step);
        const complexd d1 = (4.0 * d1h2 - d1h) / 3.0;
        const complexd d2h = second(step), d2h2 = second(0.5 * step);
        const complexd d2 = (4.0 * d2h2 - d2h) / 3.0;
        out.velocity[a] = d1.imag();
        out.diffusion(a, a) = -0.5 * d2.real();
        out.richardson_defect =
            std::max(out.richardson_defect, std::abs(d1 - d1h2) + std::abs(d2 - d2h2));
    }
    for (int a = 0; a < d; ++a)
        for (int b = a + 1; b < d; ++b) {
            auto cross = [&](double h) {
                const complexd upp = branch_along_diag(grid, rate, eps, a, b, h, h, field, caps);
                const complexd upm = branch_along_diag(grid, rate, eps, a, b, h, -h, field, caps);
                const complexd ump = branch_along_diag(grid, rate, eps, a, b, -h, h, field, caps);
                const complexd umm = branch_along_diag(grid, rate, eps, a, b, -h, -h, field, caps);
                return (upp - upm - ump + umm) / (4.0 * h * h);
            };
            const complexd ch = cross(step), ch2 = cross(0.5 * step);
            const complexd c = (4.0 * ch2 - ch) / 3.0;
            out.diffusion(a, b) = out.diffusion(b, a) = -0.5 * c.real();
            out.richardson_defect = std::max(out.richardson_defect, std::abs(c - ch2));
        }
    return out;
}

EinsteinReport einstein_residual(const TorusGrid& grid,
                                 const reservoir::SpectralDensity& sd,
                                 const lattice::DispersionLaw& eps, double fd_step,
                                 Caps caps) {
    const int d = grid.dim();
    const Eigen::MatrixXd rate = rate_matrix(grid, sd, eps);
    const std::vector<double> zero(d, 0.0);

    const KineticGenerator gen0(grid, rate, eps, zero, zero, zero, caps);
    const StationaryState st0 = stationary_state(gen0);
    const Eigen::MatrixXd D = diffusion_gk(gen0, st0.zeta);
    const double beta = sd.beta();

    auto velocity_at = [&](int axis, double f) {
        std::vector<double> field(d, 0.0);
        field[axis] = f;
        const KineticGenerator gen(grid, rate, eps, zero, zero, field, caps);
        const StationaryState st = stationary_state(gen);
        return drift_velocity(gen, st.zeta);
    };

    Eigen::MatrixXd mobility(d, d);
    double defect = 0.0;
    for (int i = 0; i < d; ++i) {
        auto first = [&](double h) {
            const auto vp = velocity_at(i, h);
            const auto vm = velocity_at(i, -h);
            Eigen::VectorXd out(d);
            for (int j = 0; j < d; ++j) out[j] = (vp[j] - vm[j]) / (2.0 * h);
            return out;
        };
        const Eigen::VectorXd d1 = first(fd_step);
        const Eigen::VectorXd d2 = first(0.5 * fd_step);
        const Eigen::VectorXd d4 = first(0.25 * fd_step);
        const Eigen::VectorXd r1 = (4.0 * d2 - d1) / 3.0;
        const Eigen::VectorXd r2 = (4.0 * d4 - d2) / 3.0;
        defect = std::max(defect, (r2 - r1).norm() / std::max(1e-300, r2.norm()));
        mobility.row(i) = r2.transpose();
    }
    if (!(defect < 1e-2))
        throw NumericalError("einstein_residual: Richardson sequence is not Cauchy");

    EinsteinReport rep;
    rep.dv_dfield = mobility;
    rep.beta_d = beta * D;
    const double scale = rep.beta_d.diagonal().cwiseAbs().maxCoeff();
    double res = 0.0;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            const double denom = i == j ? std::abs(rep.beta_d(i, j)) : scale;
            res = std::max(res, std::abs(mobility(i, j) - rep.beta_d(i, j)) / denom);
        }
    rep.residual = res;
    rep.richardson_defect = defect;
    return rep;
}

Eigen::MatrixXcd expm(const Eigen::MatrixXcd& a) {
    const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();  // inf-norm
    int squarings = 0;
    double scaled = norm;
    while (scaled > 0.5) {
        scaled *= 0.5;
        ++squarings;
    }
    const Eigen::MatrixXcd b = a / std::pow(2.0, squarings);
    const int n = a.rows();
    Eigen::MatrixXcd term = Eigen::MatrixXcd::Identity(n, n);
    Eigen::MatrixXcd sum = term;
    // ||b|| <= 1/2: the Taylor tail after k terms is below eps for k ~ 20.
    for (int k = 1; k <= 24; ++k) {
        term = term * b / static_cast<double>(k);
        sum += term;
        if (term.norm() < 1e-18 * sum.norm()) break;
    }
    for (int s = 0; s < squarings; ++s) sum = sum * sum;
    return sum;
}

EvolveResult evolve(const KineticGenerator& gen, const Eigen::VectorXcd& f0, double t) {
    if (t < 0.0) throw DomainError("evolve: t must be nonnegative");
    const Eigen::MatrixXcd m = gen.assembled();
    const Spectrum s = dense_spectrum(m);
    const Eigen::FullPivLU<Eigen::MatrixXcd> lu(s.vectors);
    const bool invertible = lu.isInvertible();
    if (s.diag_residual <= 1e-8 && invertible) {
        Eigen::VectorXcd c = lu.solve(f0);
        // conditioning check through the reconstruction error
        if ((s.vectors * c - f0).norm() <= 1e-8 * (1.0 + f0.norm())) {
            for (int i = 0; i < c.size(); ++i) c[i] *= std::exp(t * s.values[i]);
            return {s.vectors * c, EvolveMethod::EigenBasis};
        }
    }
    return {expm(m * t) * f0, EvolveMethod::ScalingSquaring};
}

}  // namespace latkin::kinetic
