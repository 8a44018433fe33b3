#include "latkin/dyson.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "latkin/quadrature.hpp"

namespace latkin::dyson {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr complexd kI{0.0, 1.0};

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double uniform01(std::uint64_t seed, std::uint64_t idx) {
    return (splitmix64(seed ^ splitmix64(idx)) >> 11) * 0x1.0p-53;
}
}  // namespace

PeriodicFiberBasis::PeriodicFiberBasis(const lattice::DispersionLaw& eps, int L)
    : eps_(&eps), L_(L), grid_(eps.dim(), L) {}

Eigen::VectorXd PeriodicFiberBasis::eps_shifted(const std::vector<double>& shift) const {
    const int n = grid_.size();
    Eigen::VectorXd v(n);
    std::vector<double> k(d());
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d(); ++j) k[j] = grid_.node(i)[j] + shift[j];
        v[i] = eps_->eval_real(k);
    }
    return v;
}

std::vector<double> fiber_for_kappa(double lambda, const std::vector<double>& kappa) {
    // The fiber transform convention fixes p = -lambda^2 kappa so that the
    // rescaled free generator contributes +i kappa.grad(eps).
    std::vector<double> p(kappa.size());
    for (std::size_t j = 0; j < kappa.size(); ++j) p[j] = -lambda * lambda * kappa[j];
    return p;
}

Eigen::MatrixXd shift_matrix(const kinetic::TorusGrid& grid,
                             const std::vector<double>& a) {
    const int d = grid.dim();
    const int N = grid.points_per_axis();
    // Per-axis matrix exp(-a D): modes |m| < N/2 advect, the Nyquist mode is
    // held fixed (the differentiation matrix annihilates it).
    std::vector<Eigen::MatrixXd> s1(d);
    for (int ax = 0; ax < d; ++ax) {
        Eigen::MatrixXd s = Eigen::MatrixXd::Zero(N, N);
        for (int j = 0; j < N; ++j)
            for (int l = 0; l < N; ++l) {
                const double x = 2.0 * kPi * (j - l) / N;
                double acc = std::cos(0.5 * N * x);  // Nyquist
                for (int m = 1; m < N / 2; ++m) acc += 2.0 * std::cos(m * (x - a[ax]));
                acc += 1.0;  // m = 0
                s(j, l) = acc / N;
            }
        s1[ax] = s;
    }
    Eigen::MatrixXd out = s1[0];
    for (int ax = 1; ax < d; ++ax) {
        // Kronecker with axis 0 fastest, matching the grid flattening.
        const Eigen::MatrixXd prev = out;
        const int n0 = prev.rows();
        out = Eigen::MatrixXd::Zero(n0 * N, n0 * N);
        for (int j = 0; j < N; ++j)
            for (int l = 0; l < N; ++l)
                out.block(j * n0, l * n0, n0, n0) = s1[ax](j, l) * prev;
    }
    return out;
}

namespace {
// Phase integral Phi_q(k; t) = int_0^t Omega_q(k - lambda^2 F u) du evaluated
// per Fourier mode of the dispersion.
struct PhaseAccumulator {
    const lattice::DispersionLaw* eps;
    double t;
    double lf;  // lambda^2
    std::vector<double> field;

    double value(const std::vector<double>& q, const std::vector<double>& ktilde) const {
        complexd acc{0.0, 0.0};
        for (const auto& term : eps->terms()) {
            double qx = 0.0, kx = 0.0, fx = 0.0;
            for (std::size_t j = 0; j < q.size(); ++j) {
                qx += q[j] * term.offset[j];
                kx += ktilde[j] * term.offset[j];
                fx += field[j] * term.offset[j];
            }
            complexd time_factor;
            const double c = lf * fx;
            if (std::abs(c) < 1e-14) {
                time_factor = complexd(t, 0.0);
            } else {
                time_factor = (1.0 - std::exp(-kI * c * t)) / (kI * c);
            }
            acc += term.coeff * 2.0 * kI * std::sin(0.5 * qx) * std::exp(kI * kx) *
                   time_factor;
        }
        return acc.real();
    }
};
}  // namespace

Eigen::MatrixXcd free_fiber_generator(const PeriodicFiberBasis& basis,
                                      const std::vector<double>& p, double lambda,
                                      const std::vector<double>& field) {
    const auto& grid = basis.grid();
    const int n = grid.size();
    const int d = basis.d();
    Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n, n);
    std::vector<double> kp(d), km(d);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) {
            kp[j] = grid.node(i)[j] + 0.5 * p[j];
            km[j] = grid.node(i)[j] - 0.5 * p[j];
        }
        a(i, i) = -kI * (basis.dispersion().eval_real(kp) - basis.dispersion().eval_real(km));
    }
    const double l2 = lambda * lambda;
    for (int ax = 0; ax < d; ++ax)
        if (field[ax] != 0.0)
            a -= (l2 * field[ax]) * grid.differentiation_matrix(ax).cast<complexd>();
    return a;
}

FiberOperator free_fiber_propagator(const PeriodicFiberBasis& basis,
                                    const std::vector<double>& p, double t,
                                    double lambda, const std::vector<double>& field) {
    if (t < 0.0) throw DomainError("free_fiber_propagator: t must be nonnegative");
    const auto& grid = basis.grid();
    const int n = grid.size();
    const int d = basis.d();
    const double l2 = lambda * lambda;
    const PhaseAccumulator phase{&basis.dispersion(), t, l2, field};

    Eigen::VectorXcd ph(n);
    for (int i = 0; i < n; ++i)
        ph[i] = std::exp(-kI * phase.value(p, grid.node(i)));

    FiberOperator out;
    out.p = p;
    out.lambda = lambda;
    out.field = field;
    out.t = t;
    bool shifted = false;
    for (int ax = 0; ax < d; ++ax) shifted = shifted || field[ax] != 0.0;
    if (shifted) {
        std::vector<double> a(d);
        for (int ax = 0; ax < d; ++ax) a[ax] = l2 * field[ax] * t;
        out.matrix = ph.asDiagonal() * shift_matrix(grid, a).cast<complexd>();
    } else {
        out.matrix = Eigen::MatrixXcd(ph.asDiagonal());
    }
    return out;
}

FiberOperator ladder_vertex(const PeriodicFiberBasis& basis,
                            const reservoir::SpectralDensity& sd,
                            const std::vector<double>& p, double t, double lambda,
                            const std::vector<double>& field, SigmaOrder order) {
    if (!(t > 0.0)) throw DomainError("ladder_vertex: t must be positive");
    const auto& grid = basis.grid();
    const int n = grid.size();
    const int d = basis.d();
    const double l2 = lambda * lambda;
    const double invn = 1.0 / n;
    const PhaseAccumulator phase{&basis.dispersion(), t, l2, field};

    const complexd psi_plus = sd.correlation(complexd(t, 0.0));   // psi_hat(t)
    const complexd psi_minus = std::conj(psi_plus);               // psi_hat(-t)
    // Aligned order keeps side_j with time_j: the (earlier-left, later-right)
    // sandwich carries psi_hat(-t).  The printed equation swaps the two mixed
    // coefficients.
    const complexd c_lr = order == SigmaOrder::TimeAligned ? psi_minus : psi_plus;
    const complexd c_rl = order == SigmaOrder::TimeAligned ? psi_plus : psi_minus;

    std::vector<double> a(d, 0.0);
    bool shifted = false;
    for (int ax = 0; ax < d; ++ax) {
        a[ax] = l2 * field[ax] * t;
        shifted = shifted || field[ax] != 0.0;
    }

    Eigen::MatrixXcd gain(n, n);
    std::vector<double> q(d), kt(d);
    for (int i = 0; i < n; ++i) {
        const auto& ki = grid.node(i);
        for (int j = 0; j < n; ++j) {
            const auto& kj = grid.node(j);
            for (int ax = 0; ax < d; ++ax) kt[ax] = 0.5 * (ki[ax] + kj[ax] + a[ax]);
            for (int ax = 0; ax < d; ++ax) q[ax] = ki[ax] - kj[ax] - a[ax] + p[ax];
            const complexd g_lr = std::exp(-kI * phase.value(q, kt));
            for (int ax = 0; ax < d; ++ax) q[ax] = kj[ax] - ki[ax] + a[ax] + p[ax];
            const complexd g_rl = std::exp(-kI * phase.value(q, kt));
            gain(i, j) = invn * (c_lr * g_lr + c_rl * g_rl);
        }
    }

    Eigen::VectorXcd loss(n);
    for (int i = 0; i < n; ++i) {
        const auto& ki = grid.node(i);
        complexd acc_ll{0.0, 0.0}, acc_rr{0.0, 0.0};
        for (int m = 0; m < n; ++m) {
            const auto& Q = grid.node(m);
            for (int ax = 0; ax < d; ++ax) {
                q[ax] = Q[ax] - ki[ax] + 0.5 * p[ax];
                kt[ax] = 0.5 * (Q[ax] + ki[ax] - 0.5 * p[ax]);
            }
            acc_ll += std::exp(-kI * phase.value(q, kt));
            for (int ax = 0; ax < d; ++ax) {
                q[ax] = ki[ax] + 0.5 * p[ax] - Q[ax];
                kt[ax] = 0.5 * (ki[ax] + 0.5 * p[ax] + Q[ax]);
            }
            acc_rr += std::exp(-kI * phase.value(q, kt));
        }
        loss[i] = -invn * (psi_minus * acc_ll + psi_plus * acc_rr);
    }

    Eigen::MatrixXcd v = gain;
    if (shifted) {
        const Eigen::MatrixXcd s = shift_matrix(grid, a).cast<complexd>();
        v += Eigen::MatrixXcd(loss.asDiagonal()) * s;
    } else {
        v += Eigen::MatrixXcd(loss.asDiagonal());
    }
    v *= l2;

    FiberOperator out;
    out.p = p;
    out.lambda = lambda;
    out.field = field;
    out.t = t;
    out.matrix = std::move(v);
    return out;
}

FiberOperator ladder_transfer(const PeriodicFiberBasis& basis,
                              const reservoir::SpectralDensity& sd,
                              const std::vector<double>& p, complexd z,
                              double lambda, const std::vector<double>& field,
                              const TransferOptions& opts) {
    if (opts.check_tail) {
        const auto& cert = sd.certificate();
        if (!cert)
            throw ConfigError("ladder_transfer: spectral density lacks a decay certificate");
        if (z.real() <= -0.25 * cert->g_res)
            throw DomainError("ladder_transfer: Re z too far left of the memory rate");
        const double c_eff = std::max(cert->prefactor, cert->envelope);
        const double tail = c_eff * lambda * lambda *
                            std::exp(-(cert->g_res / 3.0 + z.real()) * opts.T_cut);
        if (!(tail < 1e-10))
            throw ConfigError("ladder_transfer: T_cut leaves a memory tail of " +
                              std::to_string(tail));
    }

    const int n = basis.grid().size();
    auto integrate = [&](int panels) {
        Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
        const auto [x0, w0] = quadrature::gauss_legendre(opts.nodes_per_panel, 0.0, 1.0);
        const double h = opts.T_cut / panels;
        for (int pp = 0; pp < panels; ++pp) {
            const double lo = pp * h;
            for (int jn = 0; jn < opts.nodes_per_panel; ++jn) {
                const double t = lo + x0[jn] * h;
                const auto v = ladder_vertex(basis, sd, p, t, lambda, field, opts.order);
                acc += (w0[jn] * h) * std::exp(-z * t) * v.matrix;
            }
        }
        return acc;
    };
    const Eigen::MatrixXcd fine = integrate(opts.panels);
    const Eigen::MatrixXcd coarse = integrate(std::max(1, opts.panels / 2));

    FiberOperator out;
    out.p = p;
    out.lambda = lambda;
    out.field = field;
    out.z = z;
    out.quad_error = (fine - coarse).norm();
    out.matrix = fine;
    return out;
}

Eigen::MatrixXcd pseudo_resolvent_symbol(const PeriodicFiberBasis& basis,
                                         const reservoir::SpectralDensity& sd,
                                         const std::vector<double>& p, complexd z,
                                         double lambda,
                                         const std::vector<double>& field,
                                         const TransferOptions& opts) {
    return free_fiber_generator(basis, p, lambda, field) +
           ladder_transfer(basis, sd, p, z, lambda, field, opts).matrix;
}

namespace {
double opnorm(const Eigen::MatrixXcd& m) {
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    return svd.singularValues()[0];
}
}  // namespace

LadderCheck ladder_limit_check(const PeriodicFiberBasis& basis,
                               const reservoir::SpectralDensity& sd,
                               const std::vector<double>& kappa,
                               const std::vector<double>& lambdas,
                               const TransferOptions& opts) {
    const auto& grid = basis.grid();
    const int d = basis.d();
    const std::vector<double> zero(d, 0.0);
    const Eigen::MatrixXd rate = kinetic::rate_matrix(grid, sd, basis.dispersion());
    const kinetic::KineticGenerator gen(grid, rate, basis.dispersion(), kappa, zero,
                                        zero);
    const Eigen::MatrixXcd m_kin = gen.assembled();

    LadderCheck out;
    for (double lambda : lambdas) {
        const auto p = fiber_for_kappa(lambda, kappa);
        const Eigen::MatrixXcd s0 =
            pseudo_resolvent_symbol(basis, sd, p, {0.0, 0.0}, lambda, zero, opts);
        const Eigen::MatrixXcd diff = s0 / (lambda * lambda) - m_kin;
        const Eigen::MatrixXcd anti = 0.5 * (diff - diff.adjoint());
        out.points.push_back({lambda, opnorm(diff), opnorm(anti)});
    }
    // log-log slope by least squares
    const int m = static_cast<int>(out.points.size());
    if (m >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (const auto& pt : out.points) {
            const double x = std::log(pt.lambda), y = std::log(pt.opnorm_diff);
            sx += x; sy += y; sxx += x * x; sxy += x * y;
        }
        out.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    }
    return out;
}

PoleResult pole_track(const PeriodicFiberBasis& basis,
                      const reservoir::SpectralDensity& sd,
                      const std::vector<double>& kappa, double lambda,
                      const std::vector<double>& field, complexd seed,
                      const PoleOptions& opts) {
    const auto p = fiber_for_kappa(lambda, kappa);
    auto nearest_eig = [&](complexd z, complexd target) {
        const Eigen::MatrixXcd s =
            pseudo_resolvent_symbol(basis, sd, p, z, lambda, field, opts.transfer);
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(s);
        if (es.info() != Eigen::Success)
            throw NumericalError("pole_track: eigendecomposition failed");
        int best = 0;
        for (int i = 1; i < es.eigenvalues().size(); ++i)
            if (std::abs(es.eigenvalues()[i] - target) <
                std::abs(es.eigenvalues()[best] - target))
                best = i;
        return es.eigenvalues()[best];
    };

    complexd z = seed;
    complexd branch = seed;
    int it = 0;
    for (; it < opts.max_iterations; ++it) {
        const complexd mu = nearest_eig(z, branch);
        const complexd znew = (1.0 - opts.damping) * z + opts.damping * mu;
        branch = mu;
        const double delta = std::abs(znew - z);
        z = znew;
        if (delta < opts.tol) break;
    }
    if (it >= opts.max_iterations)
        throw NumericalError("pole_track: fixed-point iteration did not converge, last z = " +
                             std::to_string(z.real()) + " + " + std::to_string(z.imag()) + "i");

    // Residue by contour quadrature around z*.
    const double radius = 0.5 * lambda * lambda * opts.radius_scale;
    const int n = basis.grid().size();
    Eigen::MatrixXcd residue = Eigen::MatrixXcd::Zero(n, n);
    for (int m = 0; m < opts.contour_nodes; ++m) {
        const double theta = 2.0 * kPi * m / opts.contour_nodes;
        const complexd zc = z + radius * std::exp(kI * theta);
        const Eigen::MatrixXcd s =
            pseudo_resolvent_symbol(basis, sd, p, zc, lambda, field, opts.transfer);
        Eigen::MatrixXcd resolvent =
            (zc * Eigen::MatrixXcd::Identity(n, n) - s).partialPivLu().solve(
                Eigen::MatrixXcd::Identity(n, n));
        residue += (radius * std::exp(kI * theta) / static_cast<double>(opts.contour_nodes)) *
                   resolvent;
    }

    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(residue);
    const double defect = svd.singularValues()[1] / svd.singularValues()[0];

    return {z, residue, defect, it + 1};
}

MixingResult mixing_check(const PeriodicFiberBasis& basis,
                          const reservoir::SpectralDensity& sd,
                          const std::vector<double>& kappa, double lambda,
                          const PoleResult& pole, const MixingOptions& opts) {
    const auto& grid = basis.grid();
    const int n = grid.size();
    const int d = basis.d();
    const std::vector<double> zero(d, 0.0);
    const auto p = fiber_for_kappa(lambda, kappa);
    const double l2 = lambda * lambda;

    const Eigen::MatrixXcd a = free_fiber_generator(basis, p, lambda, zero);

    // Memory kernel on the fine grid (even count for the Simpson weights).
    int mem = static_cast<int>(std::round(opts.memory_span / opts.dt));
    if (mem % 2 != 0) ++mem;
    std::vector<Eigen::MatrixXcd> v(mem + 1);
    for (int j = 0; j <= mem; ++j) {
        const double s = std::max(j * opts.dt, 1e-9);
        v[j] = ladder_vertex(basis, sd, p, s, lambda, zero, opts.order).matrix;
    }
    // Composite Simpson weights over 0..jmax, trapezoid stub on an odd tail.
    auto conv_weight = [&](int j, int jmax) {
        if (jmax == 0) return 0.0;
        if (jmax == 1) return 0.5;
        const int simpson_end = jmax - (jmax % 2);
        double w = 0.0;
        if (j <= simpson_end) {
            if (j == 0 || j == simpson_end)
                w = 1.0 / 3.0;
            else
                w = (j % 2 == 1) ? 4.0 / 3.0 : 2.0 / 3.0;
        }
        if (jmax % 2 == 1 && (j == jmax || j == jmax - 1)) w += 0.5;
        return w;
    };

    const double t_max = opts.t_max_gaps / (l2 * opts.g_ref);
    const int steps = static_cast<int>(std::ceil(t_max / opts.dt));

    // Ring buffer of the last mem+1 states.
    std::vector<Eigen::MatrixXcd> ring(mem + 1, Eigen::MatrixXcd::Zero(n, n));
    auto at = [&](int step) -> Eigen::MatrixXcd& { return ring[step % (mem + 1)]; };
    at(0) = Eigen::MatrixXcd::Identity(n, n);

    auto memory_term = [&](int step) {
        Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
        const int jmax = std::min(step, mem);
        for (int j = 0; j <= jmax; ++j)
            acc += (conv_weight(j, jmax) * opts.dt) * (v[j] * at(step - j));
        return acc;
    };

    MixingResult out;
    const int stride = std::max(1, steps / 300);
    Eigen::VectorXcd prob(n);
    for (int i = 0; i < n; ++i) prob[i] = 1.0 + 0.3 * std::cos(grid.node(i)[0]);
    prob /= grid.mean_functional(prob).real();
    const complexd prob_mass0 = grid.mean_functional(prob);

    bool p_zero = true;
    for (double x : p) p_zero = p_zero && std::abs(x) < 1e-300;

    for (int step = 0; step <= steps; ++step) {
        const double t = step * opts.dt;
        if (step % stride == 0 || step == steps) {
            const Eigen::MatrixXcd dev = at(step) - std::exp(pole.u * t) * pole.residue;
            out.times.push_back(t);
            out.deviation_norms.push_back(dev.norm());
            if (p_zero) {
                const complexd mass =
                    grid.mean_functional(Eigen::VectorXcd(at(step) * prob));
                out.probability_drift =
                    std::max(out.probability_drift, std::abs(mass - prob_mass0));
            }
        }
        if (step == steps) break;
        // Heun step of Z' = a Z + (V * Z)(t)
        const Eigen::MatrixXcd z0 = at(step);
        const Eigen::MatrixXcd f0 = a * z0 + memory_term(step);
        at(step + 1) = z0 + opts.dt * f0;
        const Eigen::MatrixXcd f1 = a * at(step + 1) + memory_term(step + 1);
        at(step + 1) = z0 + 0.5 * opts.dt * (f0 + f1);
    }

    // Fit the deviation decay over the configured window.
    const double lo = opts.fit_lo_gaps / (l2 * opts.g_ref);
    const double hi = opts.fit_hi_gaps / (l2 * opts.g_ref);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int used = 0;
    for (std::size_t i = 0; i < out.times.size(); ++i) {
        const double t = out.times[i];
        if (t < lo || t > hi) continue;
        const double devn = out.deviation_norms[i];
        if (devn <= 0.0) continue;
        const double y = std::log(devn);
        sx += t; sy += y; sxx += t * t; sxy += t * y;
        ++used;
    }
    if (used < 4) throw NumericalError("mixing_check: too few points in the fit window");
    const double slope = (used * sxy - sx * sy) / (used * sxx - sx * sx);
    out.fitted_rate = -slope / l2;
    if (!(out.fitted_rate > 0.0))
        throw NumericalError("mixing_check: fitted decay rate is not positive");
    return out;
}

Eigen::MatrixXcd zt_volterra(const PeriodicFiberBasis& basis,
                             const reservoir::SpectralDensity& sd,
                             const std::vector<double>& p, double lambda,
                             const std::vector<double>& field, double t,
                             double dt, double memory_span, SigmaOrder order) {
    const int n = basis.grid().size();
    const Eigen::MatrixXcd a = free_fiber_generator(basis, p, lambda, field);
    int mem = static_cast<int>(std::round(memory_span / dt));
    if (mem % 2 != 0) ++mem;
    std::vector<Eigen::MatrixXcd> v(mem + 1);
    for (int j = 0; j <= mem; ++j)
        v[j] = ladder_vertex(basis, sd, p, std::max(j * dt, 1e-9), lambda, field, order)
                   .matrix;
    auto conv_weight = [&](int j, int jmax) {
        if (jmax == 0) return 0.0;
        if (jmax == 1) return 0.5;
        const int simpson_end = jmax - (jmax % 2);
        double w = 0.0;
        if (j <= simpson_end)
            w = (j == 0 || j == simpson_end) ? 1.0 / 3.0
                                             : (j % 2 == 1 ? 4.0 / 3.0 : 2.0 / 3.0);
        if (jmax % 2 == 1 && (j == jmax || j == jmax - 1)) w += 0.5;
        return w;
    };
    const int steps = static_cast<int>(std::ceil(t / dt));
    std::vector<Eigen::MatrixXcd> ring(mem + 1, Eigen::MatrixXcd::Zero(n, n));
    auto at = [&](int step) -> Eigen::MatrixXcd& { return ring[step % (mem + 1)]; };
    at(0) = Eigen::MatrixXcd::Identity(n, n);
    auto memory_term = [&](int step) {
        Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
        const int jmax = std::min(step, mem);
        for (int j = 0; j <= jmax; ++j)
            acc += (conv_weight(j, jmax) * dt) * (v[j] * at(step - j));
        return acc;
    };
    for (int step = 0; step < steps; ++step) {
        const Eigen::MatrixXcd z0 = at(step);
        const Eigen::MatrixXcd f0 = a * z0 + memory_term(step);
        at(step + 1) = z0 + dt * f0;
        const Eigen::MatrixXcd f1 = a * at(step + 1) + memory_term(step + 1);
        at(step + 1) = z0 + 0.5 * dt * (f0 + f1);
    }
    return at(steps);
}

Eigen::MatrixXcd zt_bromwich(const PeriodicFiberBasis& basis,
                             const reservoir::SpectralDensity& sd,
                             const std::vector<double>& p, double lambda,
                             const std::vector<double>& field, double t,
                             double abscissa, double span, int nodes,
                             const TransferOptions& opts) {
    const int n = basis.grid().size();
    const Eigen::MatrixXcd a = free_fiber_generator(basis, p, lambda, field);
    const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);
    const Eigen::MatrixXcd free_part =
        free_fiber_propagator(basis, p, t, lambda, field).matrix;

    // Z_t = U_t + (1/2 pi) int e^{(c+iy)t} [R(z) - R_free(z)] dy; subtracting
    // the free resolvent makes the integrand O(|y|^{-2}).
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(n, n);
    const double dy = 2.0 * span / nodes;
    for (int m = 0; m < nodes; ++m) {
        const double y = -span + (m + 0.5) * dy;
        const complexd z(abscissa, y);
        const Eigen::MatrixXcd s =
            pseudo_resolvent_symbol(basis, sd, p, z, lambda, field, opts);
        const Eigen::MatrixXcd r = (z * id - s).partialPivLu().solve(id);
        const Eigen::MatrixXcd rfree = (z * id - a).partialPivLu().solve(id);
        acc += std::exp(z * t) * (r - rfree) * dy;
    }
    return free_part + acc / (2.0 * kPi);
}

N2Estimate vertex_n2_norm(const PeriodicFiberBasis& basis,
                          const reservoir::SpectralDensity& sd,
                          const std::vector<double>& p, double t, double lambda,
                          const std::vector<double>& field, int mc_samples,
                          std::uint64_t seed) {
    (void)p;  // the column-sum surrogate bounds every fiber uniformly
    for (double f : field)
        if (f != 0.0)
            throw ConfigError("vertex_n2_norm: surrogate implemented at F = 0");
    if (mc_samples < 8) throw ConfigError("vertex_n2_norm: need at least 8 samples");
    if (!(t > 0.0)) throw DomainError("vertex_n2_norm: t must be positive");

    const auto& grid = basis.grid();
    const int n = grid.size();
    const int d = basis.d();
    const int N = grid.points_per_axis();
    const double l4 = std::pow(lambda, 4);

    Eigen::VectorXd eps_k(n);
    for (int i = 0; i < n; ++i) eps_k[i] = basis.dispersion().eval_real(grid.node(i));

    // |e^{-i tau T}|(x, y) on the periodic lattice; depends on x - y mod N
    // per axis.  Site flat indices use the same axis-0-fastest layout as the
    // momentum grid.
    auto abs_kernel = [&](double tau) {
        std::vector<double> cache(n);
        for (int off = 0; off < n; ++off) {
            complexd acc{0.0, 0.0};
            for (int k = 0; k < n; ++k) {
                double kx = 0.0;
                int oi = off;
                for (int ax = 0; ax < d; ++ax) {
                    kx += grid.node(k)[ax] * (oi % N);
                    oi /= N;
                }
                acc += std::exp(complexd(0.0, -tau * eps_k[k]) + complexd(0.0, kx));
            }
            cache[off] = std::abs(acc) / n;
        }
        Eigen::MatrixXd out(n, n);
        for (int x = 0; x < n; ++x)
            for (int y = 0; y < n; ++y) {
                int off = 0, mult = 1, xi = x, yi = y;
                for (int ax = 0; ax < d; ++ax) {
                    off += (((xi % N) - (yi % N) + N) % N) * mult;
                    mult *= N;
                    xi /= N;
                    yi /= N;
                }
                out(x, y) = cache[off];
            }
        return out;
    };

    std::vector<double> values(mc_samples);
    for (int s = 0; s < mc_samples; ++s) {
        const double u1 = uniform01(seed, 2 * s);
        const double u2 = uniform01(seed, 2 * s + 1);
        const double t2 = t * std::min(u1, u2);
        const double t3 = t * std::max(u1, u2);
        const double times[4] = {0.0, t2, t3, t};

        // kernel and its column sums for every marker pair (a <= b)
        Eigen::MatrixXd K[4][4];
        Eigen::VectorXd tail[4];  // sum over endpoints of |P_(t - times[a])|
        for (int a2 = 0; a2 < 4; ++a2) {
            for (int b = a2; b < 4; ++b) K[a2][b] = abs_kernel(times[b] - times[a2]);
            tail[a2] = K[a2][3].colwise().sum();
        }

        // chain factor with input pinned at site 0; pins = (slot, site)
        auto side_factor = [&](const std::vector<std::pair<int, int>>& pins) {
            if (pins.empty()) return tail[0][0];
            double acc = K[0][pins.front().first](pins.front().second, 0);
            for (std::size_t m = 0; m + 1 < pins.size(); ++m)
                acc *= K[pins[m].first][pins[m + 1].first](pins[m + 1].second,
                                                           pins[m].second);
            acc *= tail[pins.back().first][pins.back().second];
            return acc;
        };

        const double habs_cross = std::abs(sd.correlation(complexd(t3, 0.0))) *
                                  std::abs(sd.correlation(complexd(t - t2, 0.0)));
        const double habs_nest = std::abs(sd.correlation(complexd(t, 0.0))) *
                                 std::abs(sd.correlation(complexd(t3 - t2, 0.0)));

        double g = 0.0;
        std::vector<std::pair<int, int>> left, right;
        for (int pairing = 0; pairing < 2; ++pairing) {
            const double habs = pairing == 0 ? habs_cross : habs_nest;
            for (int mask = 0; mask < 16; ++mask)
                for (int xa = 0; xa < n; ++xa)
                    for (int xb = 0; xb < n; ++xb) {
                        int site[4];
                        if (pairing == 0) {  // crossing (1,3)(2,4)
                            site[0] = xa; site[2] = xa; site[1] = xb; site[3] = xb;
                        } else {  // nested (1,4)(2,3)
                            site[0] = xa; site[3] = xa; site[1] = xb; site[2] = xb;
                        }
                        left.clear();
                        right.clear();
                        for (int slot = 0; slot < 4; ++slot) {
                            const bool is_left = ((mask >> slot) & 1) == 0;
                            (is_left ? left : right).emplace_back(slot, site[slot]);
                        }
                        g += habs * side_factor(left) * side_factor(right);
                    }
        }
        values[s] = l4 * 0.5 * t * t * g;
    }

    double mean = 0.0;
    for (double x : values) mean += x;
    mean /= mc_samples;
    double var = 0.0;
    for (double x : values) var += (x - mean) * (x - mean);
    var /= std::max(1, mc_samples - 1);
    const double se = std::sqrt(var / mc_samples);
    if (se > 0.3 * mean)
        throw NumericalError("vertex_n2_norm: standard error above 30% of the estimate");
    return {mean, se, mc_samples};
}

}  // namespace latkin::dyson
