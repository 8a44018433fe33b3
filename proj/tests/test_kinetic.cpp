#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "latkin/kinetic.hpp"
#include "latkin/quadrature.hpp"

using namespace latkin;
using kinetic::KineticGenerator;
using kinetic::TorusGrid;
using lattice::DispersionLaw;
using complexd = std::complex<double>;

namespace {
constexpr double kPi = std::numbers::pi;

reservoir::SpectralDensity certified_sd(double beta = 1.0, int d_res = 3) {
    reservoir::SpectralDensity sd(reservoir::ReservoirParams(
        beta, reservoir::FormFactor(reservoir::ProfileKind::Gaussian, 1.0, d_res)));
    sd.certify();
    return sd;
}

Eigen::VectorXd gibbs_state(const TorusGrid& grid, const DispersionLaw& eps,
                            double beta) {
    Eigen::VectorXd g(grid.size());
    for (int i = 0; i < grid.size(); ++i)
        g[i] = std::exp(-beta * eps.eval_real(grid.node(i)));
    g /= grid.mean_functional(g);
    return g;
}

std::uint64_t xorshift(std::uint64_t& s) {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    return s;
}
}  // namespace

TEST_CASE("trapezoid rule on the torus grid integrates low Fourier modes exactly") {
    const TorusGrid grid(1, 16);
    for (int m = 1; m < 16; ++m) {
        complexd acc{0.0, 0.0};
        for (int i = 0; i < grid.size(); ++i)
            acc += grid.weight() * std::exp(complexd(0.0, m * grid.node(i)[0]));
        CHECK(std::abs(acc) <= 1e-13);
    }
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(grid.size());
    CHECK(grid.mean_functional(ones) == doctest::Approx(2.0 * kPi).epsilon(1e-14));
}

TEST_CASE("differentiation matrix is antisymmetric and exact on resolved modes") {
    const TorusGrid grid(1, 16);
    const Eigen::MatrixXd D = grid.differentiation_matrix(0);
    CHECK((D + D.transpose()).norm() <= 1e-12);
    CHECK((D * Eigen::VectorXd::Ones(16)).norm() <= 1e-12);
    for (int m = 1; m <= 7; ++m) {
        Eigen::VectorXd f(16), df(16);
        for (int i = 0; i < 16; ++i) {
            f[i] = std::sin(m * grid.node(i)[0]);
            df[i] = m * std::cos(m * grid.node(i)[0]);
        }
        CHECK((D * f - df).norm() <= 1e-11);
    }
}

TEST_CASE("rate matrix satisfies detailed-balance conjugacy and parity") {
    const auto sd = certified_sd();
    const auto eps = DispersionLaw::laplacian(1);
    const TorusGrid grid(1, 32);
    const auto r = kinetic::rate_matrix(grid, sd, eps);
    Eigen::VectorXd e(grid.size());
    for (int i = 0; i < grid.size(); ++i) e[i] = eps.eval_real(grid.node(i));
    for (int i = 0; i < grid.size(); ++i) {
        CHECK(r(i, i) == doctest::Approx(sd.psd(0.0)));
        for (int j = 0; j < grid.size(); ++j) {
            const double lhs = std::exp(-e[i]) * r(i, j);
            const double rhs = std::exp(-e[j]) * r(j, i);
            CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(lhs, 1e-300));
        }
    }
    // parity: R[k,k'] = R[-k,-k']; on this grid -k maps to the reflected index
    for (int i = 1; i < 32; ++i)
        for (int j = 1; j < 32; ++j)
            CHECK(r(i, j) == doctest::Approx(r(32 - i, 32 - j)).epsilon(1e-12));
}

TEST_CASE("rate matrix requires a certificate") {
    reservoir::SpectralDensity sd(reservoir::ReservoirParams(
        1.0, reservoir::FormFactor(reservoir::ProfileKind::Gaussian, 1.0, 3)));
    const auto eps = DispersionLaw::laplacian(1);
    const TorusGrid grid(1, 8);
    CHECK_THROWS_AS(kinetic::rate_matrix(grid, sd, eps), ConfigError);
}

TEST_CASE("generator conserves the mean functional and fixes the Gibbs state") {
    const auto sd = certified_sd();
    const auto eps = DispersionLaw::laplacian(1);
    const TorusGrid grid(1, 64);
    const auto rate = kinetic::rate_matrix(grid, sd, eps);
    const std::vector<double> zero(1, 0.0);

    SUBCASE("conservation at kappa = 0 for 100 random vectors, with force") {
        const KineticGenerator gen(grid, rate, eps, zero, zero, {0.05});
        const Eigen::MatrixXd m = gen.assembled_real();
        std::uint64_t s = 7;
        for (int trial = 0; trial < 100; ++trial) {
            Eigen::VectorXd f(grid.size());
            for (int i = 0; i < grid.size(); ++i)
                f[i] = (xorshift(s) % 2000) / 1000.0 - 1.0;
            const double lhs = grid.mean_functional(Eigen::VectorXd(m * f));
            CHECK(std::abs(lhs) <= 1e-12 * (1.0 + f.norm()));
        }
    }
    SUBCASE("Gibbs stationarity at F = 0, discretization-exact") {
        const KineticGenerator gen(grid, rate, eps, zero, zero, zero);
        const auto gibbs = gibbs_state(grid, eps, 1.0);
        CHECK((gen.assembled_real() * gibbs).norm() * std::sqrt(grid.weight()) <= 1e-8);
    }
    SUBCASE("Gibbs stationarity in two dimensions") {
        const auto eps2 = DispersionLaw::laplacian(2);
        const TorusGrid grid2(2, 32);
        const auto rate2 = kinetic::rate_matrix(grid2, sd, eps2);
        const std::vector<double> zero2(2, 0.0);
        const KineticGenerator gen2(grid2, rate2, eps2, zero2, zero2, zero2);
        const auto gibbs2 = gibbs_state(grid2, eps2, 1.0);
        CHECK((gen2.assembled_real() * gibbs2).norm() * std::sqrt(grid2.weight()) <=
              1e-7);
    }
    SUBCASE("kappa enters only through the diagonal drift term") {
        const KineticGenerator gen0(grid, rate, eps, zero, zero, zero);
        const KineticGenerator genk(grid, rate, eps, {0.1}, zero, zero);
        Eigen::MatrixXcd diff = genk.assembled() - gen0.assembled().cast<complexd>();
        for (int i = 0; i < grid.size(); ++i) {
            const complexd expected =
                complexd(0.0, 0.1) * eps.grad_real(grid.node(i), 0);
            CHECK(std::abs(diff(i, i) - expected) <= 1e-14);
            diff(i, i) = 0.0;
        }
        CHECK(diff.norm() <= 1e-14);
    }
    SUBCASE("caps are enforced") {
        CHECK_THROWS_AS(KineticGenerator(grid, rate, eps, {0.5}, zero, zero),
                        ConfigError);
        CHECK_THROWS_AS(KineticGenerator(grid, rate, eps, zero, zero, {0.5}),
                        ConfigError);
    }
}

TEST_CASE("stationary state: Gibbs at F = 0, parity, and semigroup oracle at F != 0") {
    const auto sd = certified_sd();
    const auto eps = DispersionLaw::laplacian(1);
    const TorusGrid grid(1, 64);
    const auto rate = kinetic::rate_matrix(grid, sd, eps);
    const std::vector<double> zero(1, 0.0);

    SUBCASE("F = 0 recovers the Gibbs density and is even") {
        const KineticGenerator gen(grid, rate, eps, zero, zero, zero);
        const auto st = kinetic::stationary_state(gen);
        const auto gibbs = gibbs_state(grid, eps, 1.0);
        CHECK((st.zeta - gibbs).cwiseAbs().maxCoeff() <= 1e-8);
        for (int i = 1; i < 64; ++i)
            CHECK(st.zeta[i] == doctest::Approx(st.zeta[64 - i]).epsilon(1e-9));
    }
    SUBCASE("F = 0.05: eigenvector matches the long-time semigroup limit") {
        const TorusGrid grid128(1, 128);
        const auto rate128 = kinetic::rate_matrix(grid128, sd, eps);
        const KineticGenerator gen(grid128, rate128, eps, std::vector<double>(1, 0.0),
                                   std::vector<double>(1, 0.0), {0.05});
        const auto st = kinetic::stationary_state(gen);
        const double gap = kinetic::spectral_gap(gen);
        Eigen::VectorXcd f0 = Eigen::VectorXcd::Zero(grid128.size());
        for (int i = 0; i < grid128.size(); ++i)
            f0[i] = 1.0 / (2.0 * kPi) + 0.1 * std::cos(grid128.node(i)[0]);
        const auto ev = kinetic::evolve(gen, f0, 30.0 / gap);
        const Eigen::VectorXcd diff = ev.value - st.zeta.cast<complexd>();
        CHECK(std::sqrt(grid128.weight()) * diff.norm() <= 1e-6);
    }
}

TEST_CASE("spectral gap: positive, grid-stable, and exact for the flat-rate toy") {
    const auto sd = certified_sd();
    const auto eps = DispersionLaw::laplacian(1);
    const std::vector<double> zero(1, 0.0);

    SUBCASE("positive and stable under N -> 2N") {
        const TorusGrid g64(1, 64), g128(1, 128);
        const KineticGenerator gen64(g64, kinetic::rate_matrix(g64, sd, eps), eps,
                                     zero, zero, zero);
        const KineticGenerator gen128(g128, kinetic::rate_matrix(g128, sd, eps), eps,
                                      zero, zero, zero);
        const double gap64 = kinetic::spectral_gap(gen64);
        const double gap128 = kinetic::spectral_gap(gen128);
        CHECK(gap64 > 0.0);
        CHECK(std::abs(gap128 - gap64) <= 1e-4);
    }
    SUBCASE("drift and diffusion refine spectrally for a smooth rate density") {
        // d_res = 4 keeps the frequency density smooth, so the quadratures
        // converge faster than any power of 1/N
        reservoir::SpectralDensity sd4(reservoir::ReservoirParams(
            1.0, reservoir::FormFactor(reservoir::ProfileKind::Gaussian, 1.0, 4)));
        sd4.certify();
        auto measure = [&](int N) {
            const TorusGrid grid(1, N);
            const auto rate = kinetic::rate_matrix(grid, sd4, eps);
            const KineticGenerator gen(grid, rate, eps, zero, zero, zero);
            const auto st = kinetic::stationary_state(gen);
            const double D = kinetic::diffusion_gk(gen, st.zeta)(0, 0);
            const KineticGenerator genf(grid, rate, eps, zero, zero, {0.05});
            const auto stf = kinetic::stationary_state(genf);
            const double v = kinetic::drift_velocity(genf, stf.zeta)[0];
            return std::pair<double, double>{v, D};
        };
        const auto [v32, d32] = measure(32);
        const auto [v64, d64] = measure(64);
        CHECK(std::abs(v64 - v32) <= 1e-6);
        CHECK(std::abs(d64 - d32) <= 1e-6);
    }
    SUBCASE("flat rate: gap = c 2 pi, uniform invariant state, analytic diffusion") {
        const TorusGrid grid(1, 32);
        const double c = 0.7;
        const Eigen::MatrixXd rate = Eigen::MatrixXd::Constant(32, 32, c);
        const KineticGenerator gen(grid, rate, eps, zero, zero, zero);
        CHECK(kinetic::spectral_gap(gen) ==
              doctest::Approx(c * 2.0 * kPi).epsilon(1e-10));
        const auto st = kinetic::stationary_state(gen);
        for (int i = 0; i < 32; ++i)
            CHECK(st.zeta[i] == doctest::Approx(1.0 / (2.0 * kPi)).epsilon(1e-10));
        const auto D = kinetic::diffusion_gk(gen, st.zeta);
        // <(grad eps)^2>_uniform = (1/2pi) int 4 sin^2 = 2
        CHECK(D(0, 0) == doctest::Approx(2.0 / (c * 2.0 * kPi)).epsilon(1e-9));
    }
}

TEST_CASE("drift: odd in F, zero at equilibrium, aligned with the force") {
    const auto sd = certified_sd();
    const auto eps = DispersionLaw::laplacian(1);
    const TorusGrid grid(1, 64);
    const auto rate = kinetic::rate_matrix(grid, sd, eps);
    const std::vector<double> zero(1, 0.0);

    const KineticGenerator gen0(grid, rate, eps, zero, zero, zero);
    const auto st0 = kinetic::stationary_state(gen0);
    CHECK(std::abs(kinetic::drift_velocity(gen0, st0.zeta)[0]) <= 1e-12);

    const KineticGenerator genp(grid, rate, eps, zero, zero, {0.05});
    const KineticGenerator genm(grid, rate, eps, zero, zero, {-0.05});
    const double vp = kinetic::drift_velocity(genp, kinetic::stationary_state(genp).zeta)[0];
    const double vm = kinetic::drift_velocity(genm, kinetic::stationary_state(genm).zeta)[0];
    CHECK(vp * 0.05 > 0.0);
    CHECK(vp == doctest::Approx(-vm).epsilon(1e-10));
}

TEST_CASE("diffusion: symmetric positive, matches the time-domain quadrature") {
    const auto sd = certified_sd();
    const auto eps = DispersionLaw::laplacian(1);
    const TorusGrid grid(1, 64);
    const auto rate = kinetic::rate_matrix(grid, sd, eps);
    const std::vector<double> zero(1, 0.0);
    const KineticGenerator gen(grid, rate, eps, zero, zero, zero);
    const auto st = kinetic::stationary_state(gen);
    const auto D = kinetic::diffusion_gk(gen, st.zeta);
    CHECK(D(0, 0) > 0.0);

    // oracle: D = int_0^T <grad eps, e^{tM}(grad eps zeta)> dt by Simpson
    const double gap = kinetic::spectral_gap(gen);
    const double T = 20.0 / gap;
    const int steps = 400;  // Simpson over [0, T]
    const Eigen::VectorXd v = gen.velocity(0);
    const Eigen::VectorXcd rhs = (v.cwiseProduct(st.zeta)).cast<complexd>();
    auto corr = [&](double t) {
        const auto ev = kinetic::evolve(gen, rhs, t);
        return (grid.weight() * v.cast<complexd>().dot(ev.value)).real();
    };
    double acc = 0.0;
    const double h = T / steps;
    for (int i = 0; i <= steps; ++i) {
        const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
        acc += w * corr(i * h);
    }
    acc *= h / 3.0;
    CHECK(std::abs(acc - D(0, 0)) <= 1e-5);
}

TEST_CASE("eigen branch: u(0) = 0, conjugate symmetry, two-route agreement") {
    const auto sd = certified_sd();
    const auto eps = DispersionLaw::laplacian(1);
    const TorusGrid grid(1, 64);
    const auto rate = kinetic::rate_matrix(grid, sd, eps);
    const std::vector<double> zero(1, 0.0);

    const auto u0 = kinetic::branch_eigenvalue(grid, rate, eps, zero, zero, {0.0, 0.0});
    CHECK(std::abs(u0) <= 1e-12);

    const auto up = kinetic::branch_eigenvalue(grid, rate, eps, {0.07}, zero, {0.0, 0.0});
    const auto um = kinetic::branch_eigenvalue(grid, rate, eps, {-0.07}, zero, {0.0, 0.0});
    CHECK(std::abs(um - std::conj(up)) <= 1e-12);

    const KineticGenerator gen(grid, rate, eps, zero, zero, zero);
    const auto st = kinetic::stationary_state(gen);
    const auto D = kinetic::diffusion_gk(gen, st.zeta);
    const auto br = kinetic::branch_derivatives(grid, rate, eps, zero, 1e-2);
    CHECK(std::abs(br.diffusion(0, 0) - D(0, 0)) <= 1e-4 * D(0, 0));
    CHECK(std::abs(br.velocity[0]) <= 1e-10);
}

TEST_CASE("einstein residual is small and invariant under a global rate rescale") {
    const auto sd = certified_sd();
    const auto eps = DispersionLaw::laplacian(1);
    const TorusGrid grid(1, 64);
    const auto rep = kinetic::einstein_residual(grid, sd, eps, 1e-3);
    CHECK(rep.residual <= 1e-3);

    // residual built by hand from the generator family with rate and 2 rate
    const auto rate = kinetic::rate_matrix(grid, sd, eps);
    auto residual_for = [&](double scale) {
        const Eigen::MatrixXd r = scale * rate;
        const std::vector<double> zero(1, 0.0);
        auto velocity_at = [&](double f) {
            const KineticGenerator gen(grid, r, eps, zero, zero, {f});
            return kinetic::drift_velocity(gen, kinetic::stationary_state(gen).zeta)[0];
        };
        const double h = 1e-3;
        auto first = [&](double hh) {
            return (velocity_at(hh) - velocity_at(-hh)) / (2.0 * hh);
        };
        const double r1 = (4.0 * first(0.5 * h) - first(h)) / 3.0;
        const KineticGenerator gen0(grid, r, eps, zero, zero, zero);
        const auto st = kinetic::stationary_state(gen0);
        const auto D = kinetic::diffusion_gk(gen0, st.zeta);
        return std::abs(r1 - D(0, 0)) / D(0, 0);  // beta = 1
    };
    const double res1 = residual_for(1.0);
    const double res2 = residual_for(2.0);
    CHECK(std::abs(res1 - res2) <= 1e-10);
}

TEST_CASE("evolve: identity at t = 0, conservation, decay toward the invariant state") {
    const auto sd = certified_sd();
    const auto eps = DispersionLaw::laplacian(1);
    const TorusGrid grid(1, 32);
    const auto rate = kinetic::rate_matrix(grid, sd, eps);
    const std::vector<double> zero(1, 0.0);
    const KineticGenerator gen(grid, rate, eps, zero, zero, zero);

    Eigen::VectorXcd f0(grid.size());
    for (int i = 0; i < grid.size(); ++i) {
        const double k = grid.node(i)[0];
        f0[i] = 1.0 + 0.5 * std::cos(k) + 0.25 * std::sin(2.0 * k);
    }
    const auto e0 = kinetic::evolve(gen, f0, 0.0);
    CHECK((e0.value - f0).norm() <= 1e-10);

    const complexd mass0 = grid.mean_functional(f0);
    for (double t : {0.5, 2.0, 8.0}) {
        const auto ev = kinetic::evolve(gen, f0, t);
        CHECK(std::abs(grid.mean_functional(ev.value) - mass0) <= 1e-10);
    }

    const double gap = kinetic::spectral_gap(gen);
    const auto st = kinetic::stationary_state(gen);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int used = 0;
    for (int i = 0; i <= 60; ++i) {
        const double t = 0.5 / gap + (3.5 / gap) * i / 60.0;
        const auto ev = kinetic::evolve(gen, f0, t);
        const double dev = (ev.value - mass0 * st.zeta.cast<complexd>()).norm();
        if (dev <= 0.0) continue;
        sx += t; sy += std::log(dev); sxx += t * t; sxy += t * std::log(dev);
        ++used;
    }
    const double slope = (used * sxy - sx * sy) / (used * sxx - sx * sx);
    CHECK(-slope >= 0.9 * gap);
}

TEST_CASE("scaling-and-squaring fallback matches the eigenbasis path") {
    const auto sd = certified_sd();
    const auto eps = DispersionLaw::laplacian(1);
    const TorusGrid grid(1, 16);
    const auto rate = kinetic::rate_matrix(grid, sd, eps);
    const std::vector<double> zero(1, 0.0);
    const KineticGenerator gen(grid, rate, eps, zero, zero, zero);
    const Eigen::MatrixXcd m = gen.assembled();
    const auto s = kinetic::dense_spectrum(m);
    const Eigen::MatrixXcd via_eig =
        s.vectors *
        (s.values.array() * 1.3).exp().matrix().asDiagonal() *
        s.vectors.inverse();
    CHECK((kinetic::expm(m * 1.3) - via_eig).norm() <= 1e-10 * via_eig.norm());
}
