#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "latkin/lattice.hpp"

using namespace latkin;
using lattice::DispersionLaw;
using lattice::FiniteHamiltonian;
using complexd = std::complex<double>;

namespace {
constexpr double kPi = std::numbers::pi;

// Bessel J_n by ascending series with a certified geometric remainder bound.
double bessel_j(int n, double x) {
    const double half = 0.5 * x;
    double term = 1.0;
    for (int j = 1; j <= n; ++j) term *= half / j;
    double sum = term;
    for (int m = 1; m < 400; ++m) {
        term *= -half * half / (m * (n + m));
        sum += term;
        const double q = half * half / ((m + 1.0) * (n + m + 1.0));
        if (q < 0.5 && std::abs(term) * q / (1.0 - q) < 1e-16) break;
    }
    return sum;
}
}  // namespace

TEST_CASE("dispersion trivial values and symmetry") {
    const auto eps = DispersionLaw::laplacian(1);
    CHECK(eps.eval_real({0.0}) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(eps.eval_real({kPi}) == doctest::Approx(4.0).epsilon(1e-14));
    CHECK(std::abs(eps.grad_real({0.0}, 0)) <= 1e-14);
    for (int i = 0; i < 64; ++i) {
        const double k = -kPi + 2.0 * kPi * i / 64;
        CHECK(std::abs(eps.eval_real({k}) - eps.eval_real({-k})) <= 1e-12);
        const auto ec = eps.eval({complexd(k, 0.0)});
        CHECK(std::abs(ec.imag()) <= 1e-12);
    }
}

TEST_CASE("velocity symbol of the 1-d Laplacian is 2 sin k") {
    const auto eps = DispersionLaw::laplacian(1);
    double mean = 0.0, peak = 0.0;
    for (int i = 0; i < 64; ++i) {
        const double k = -kPi + 2.0 * kPi * i / 64;
        const double v = eps.grad_real({k}, 0);
        CHECK(v == doctest::Approx(2.0 * std::sin(k)).epsilon(1e-12));
        mean += v;
        peak = std::max(peak, std::abs(v));
    }
    CHECK(std::abs(mean / 64) <= 1e-14);
    CHECK(peak == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("dispersion rejects odd coefficient sets") {
    CHECK_THROWS_AS(DispersionLaw(1, {{{1}, -1.0}}), ConfigError);
}

TEST_CASE("propagator is unitary, t = 0 is the identity, group property holds") {
    const auto eps = DispersionLaw::laplacian(1);
    const FiniteHamiltonian h(eps, 41, 1.0, {0.1});
    const auto p0 = h.propagator(0.0);
    CHECK((p0 - Eigen::MatrixXcd::Identity(41, 41)).norm() <= 1e-12);
    const auto p = h.propagator(1.7);
    for (int c = 0; c < p.cols(); ++c)
        CHECK(p.col(c).norm() == doctest::Approx(1.0).epsilon(1e-12));
    const auto p2 = h.propagator(0.9);
    const auto p3 = h.propagator(2.6);
    CHECK((p * p2 - p3).norm() <= 1e-10);
}

TEST_CASE("free propagator matches the Bessel kernel away from the boundary") {
    const auto eps = DispersionLaw::laplacian(1);
    const FiniteHamiltonian h(eps, 201, 1.0, {0.0});
    const double t = 3.0;
    const auto p = h.propagator(t);
    // interior sites: |x|, |x'| <= 30, so the Dirichlet wall at 100 is far
    const int c = 100;  // flat index of site 0
    for (int dx = 0; dx <= 30; dx += 3)
        for (int dy : {0, 7, 19}) {
            const int a = c + dx, b = c - dy;
            const double exact = std::abs(bessel_j(std::abs(dx + dy), 2.0 * t));
            CHECK(std::abs(std::abs(p(a, b)) - exact) <= 1e-8);
        }
}

TEST_CASE("combes-thomas certificate") {
    const auto eps = DispersionLaw::laplacian(1);
    SUBCASE("t = 0 admits C = 1") {
        const auto cert = lattice::combes_thomas_fit(eps, 41, 1.0, {0.0}, 0.0, 0.5);
        CHECK(cert.C == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(cert.ok);
    }
    SUBCASE("t = 2 at nu = 0.5 is finite and stable") {
        const auto cert = lattice::combes_thomas_fit(eps, 101, 1.0, {0.0}, 2.0, 0.5);
        CHECK(cert.ok);
        CHECK(std::isfinite(cert.C));
        // sup over the strip of |Im eps| for the Laplacian is 2 sinh(nu)
        CHECK(cert.im_eps_sup == doctest::Approx(2.0 * std::sinh(0.5)).epsilon(1e-6));
    }
    SUBCASE("nu beyond the declared strip is refused") {
        CHECK_THROWS_AS(lattice::combes_thomas_fit(eps, 41, 1.0, {0.0}, 1.0, 1.5),
                        DomainError);
    }
}

TEST_CASE("position expectation under a force oscillates at the Bloch period") {
    const auto eps = DispersionLaw::laplacian(1);
    SUBCASE("no force: symmetric start stays put") {
        const FiniteHamiltonian h(eps, 81, 1.0, {0.0});
        const auto xs = h.position_expectation({0.0, 1.0, 3.0, 7.0}, 0, 3.0, 0.0);
        for (double x : xs) CHECK(std::abs(x) <= 1e-10);
    }
    SUBCASE("lambda^2 F = 0.2 gives period 2 pi / 0.2 within 2%") {
        const FiniteHamiltonian h(eps, 201, 1.0, {0.2});
        const int points = 1200;
        const double tmax = 100.0;
        std::vector<double> grid(points);
        for (int i = 0; i < points; ++i) grid[i] = tmax * i / (points - 1.0);
        // packet with nonuniform momentum content; a point start has a flat
        // k-distribution and its mean position stays frozen
        const auto xs = h.position_expectation(grid, 0, 4.0, 0.5 * kPi);
        // period from successive zero crossings of x(t) - <x>
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= points;
        std::vector<double> crossings;
        for (int i = 1; i < points; ++i) {
            const double a = xs[i - 1] - mean, b = xs[i] - mean;
            if (a <= 0.0 && b > 0.0)
                crossings.push_back(grid[i - 1] - a * (grid[i] - grid[i - 1]) / (b - a));
        }
        REQUIRE(crossings.size() >= 3);
        const double period = (crossings.back() - crossings.front()) / (crossings.size() - 1);
        CHECK(period == doctest::Approx(2.0 * kPi / 0.2).epsilon(0.02));
        // amplitude bounded uniformly
        for (double x : xs) CHECK(std::abs(x - mean) <= 25.0);
    }
}
