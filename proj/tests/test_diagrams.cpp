#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "latkin/combi_bounds.hpp"
#include "latkin/diagrams.hpp"
#include "latkin/quadrature.hpp"

using namespace latkin;
using namespace latkin::diagrams;
using complexd = std::complex<double>;

namespace {

reservoir::SpectralDensity default_sd(double beta = 1.0) {
    return reservoir::SpectralDensity(reservoir::ReservoirParams(
        beta, reservoir::FormFactor(reservoir::ProfileKind::Gaussian, 1.0, 3)));
}

Diagram make_diagram(const std::vector<double>& times,
                     std::vector<std::pair<int, int>> pairs, int site = 0) {
    std::vector<Triple> triples;
    for (double t : times) triples.push_back({{site}, Side::Left, t});
    return Diagram(Path(std::move(triples)), Pairing(std::move(pairs)));
}

std::uint64_t xorshift(std::uint64_t& s) {
    s ^= s << 13;
    s ^= s >> 7;
    s ^= s << 17;
    return s;
}

// Oracle for the pair-sum series at fixed p: enumerate pairings, and for each
// integrate prod k over the ordered simplex through the gap-profile ODE
// F_j' = -gamma d_j F_j + F_{j-1}.
double pairing_simplex_integral(const Pairing& pi, double S, ExpKernel k,
                                bool pinned) {
    const int n2 = 2 * pi.size();
    std::vector<int> depth(n2 + 1, 0);  // depth in gap j, between slot j and j+1
    for (const auto& [r, s] : pi.pairs)
        for (int j = r + 1; j <= s; ++j) depth[j] += 1;
    // gaps j = 0..n2; pinned drops the first and last gap
    const int lo = pinned ? 1 : 0;
    const int hi = pinned ? n2 - 1 : n2;
    std::vector<int> rates;
    for (int j = lo; j <= hi; ++j) rates.push_back(depth[j]);
    // convolution of exponentials solved as a triangular linear ODE
    const int m = static_cast<int>(rates.size());
    std::vector<double> f(m, 0.0);
    auto deriv = [&](const std::vector<double>& cur, std::vector<double>& out) {
        for (int j = 0; j < m; ++j) {
            out[j] = -k.rate * rates[j] * cur[j];
            if (j > 0) out[j] += cur[j - 1];
        }
    };
    f[0] = 1.0;  // F_0(0) = 1 represents e^{-d_0 rate s} after integration
    // integrate F' = A F with F_0(s) = e^{-d_0 gamma s}: embed by one extra slot
    // simpler: solve dF_0/ds = -d0 g F0, F0(0)=1; dF_j = -dj g Fj + F_{j-1}
    const int steps = std::max(2000, static_cast<int>(4000 * S));
    const double h = S / steps;
    std::vector<double> k1(m), k2(m), k3(m), k4(m), tmp(m);
    for (int s = 0; s < steps; ++s) {
        deriv(f, k1);
        for (int j = 0; j < m; ++j) tmp[j] = f[j] + 0.5 * h * k1[j];
        deriv(tmp, k2);
        for (int j = 0; j < m; ++j) tmp[j] = f[j] + 0.5 * h * k2[j];
        deriv(tmp, k3);
        for (int j = 0; j < m; ++j) tmp[j] = f[j] + h * k3[j];
        deriv(tmp, k4);
        for (int j = 0; j < m; ++j)
            f[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
    const double scale = std::pow(k.scale, pi.size());
    return scale * f[m - 1];
}

double oracle_series(int n, int p_max, double S, ExpKernel k, bool pinned) {
    double acc = 0.0;
    for (int p = std::max(n, pinned ? 1 : 0); p <= p_max; ++p) {
        if (p == 0) {
            acc += 1.0;  // empty configuration
            continue;
        }
        for (const auto& pi : enumerate_pairings(p))
            acc += pairing_simplex_integral(pi, S, k, pinned);
    }
    return acc;
}

}  // namespace

TEST_CASE("pairing enumeration counts (2n-1)!!") {
    CHECK(enumerate_pairings(0).size() == 1);
    CHECK(enumerate_pairings(1).size() == 1);
    CHECK(enumerate_pairings(2).size() == 3);
    CHECK(enumerate_pairings(3).size() == 15);
    for (int n = 4; n <= 6; ++n)
        CHECK(enumerate_pairings(n).size() == double_factorial_odd(n));
    CHECK_THROWS_AS(enumerate_pairings(9), ConfigError);
}

TEST_CASE("domains and irreducibility on the spec examples") {
    const std::vector<double> times{1.0, 2.0, 3.0, 4.0};
    SUBCASE("(1,2)(3,4) is reducible") {
        const auto d = make_diagram(times, {{0, 1}, {2, 3}});
        CHECK(!is_irreducible(d));
        CHECK(domain(d).intervals().size() == 2);
    }
    SUBCASE("(1,3)(2,4) is irreducible") {
        CHECK(is_irreducible(make_diagram(times, {{0, 2}, {1, 3}})));
    }
    SUBCASE("(1,4)(2,3) is irreducible") {
        CHECK(is_irreducible(make_diagram(times, {{0, 3}, {1, 2}})));
    }
}

TEST_CASE("irreducible decomposition: order, domains, and exact reassembly") {
    SUBCASE("irreducible input stays a singleton") {
        const auto d = make_diagram({0.0, 0.5, 1.0, 2.0}, {{0, 2}, {1, 3}});
        CHECK(irreducible_decomposition(d).size() == 1);
    }
    SUBCASE("two disjoint pairs split") {
        const auto d = make_diagram({0.0, 0.5, 1.0, 2.0}, {{0, 1}, {2, 3}});
        const auto parts = irreducible_decomposition(d);
        REQUIRE(parts.size() == 2);
        CHECK(parts[0].path.triples.back().t < parts[1].path.triples.front().t);
        for (const auto& part : parts) CHECK(is_irreducible(part));
    }
    SUBCASE("every pairing at n <= 4 decomposes into ordered irreducible parts") {
        std::uint64_t s = 5;
        for (int n = 1; n <= 4; ++n) {
            std::vector<double> times;
            double t = 0.0;
            for (int i = 0; i < 2 * n; ++i) {
                t += 0.5 + static_cast<double>(xorshift(s) % 701) / 701.0;
                times.push_back(t);
            }
            for (const auto& pairing : enumerate_pairings(n)) {
                std::vector<Triple> triples;
                for (double tv : times) triples.push_back({{0}, Side::Left, tv});
                const Diagram dg(Path(triples), pairing);
                const auto parts = irreducible_decomposition(dg);
                int total = 0;
                double prev_sup = -1.0;
                for (const auto& part : parts) {
                    CHECK(is_irreducible(part));
                    CHECK(part.path.triples.front().t > prev_sup);
                    prev_sup = part.path.triples.back().t;
                    total += part.path.size();
                }
                CHECK(total == 2 * n);
            }
        }
    }
    SUBCASE("random diagrams reassemble exactly") {
        std::uint64_t s = 42;
        for (int trial = 0; trial < 300; ++trial) {
            const int n = 1 + static_cast<int>(xorshift(s) % 6);
            const auto all = enumerate_pairings(n);
            const auto& pairing = all[xorshift(s) % all.size()];
            std::vector<Triple> triples;
            double t = 0.0;
            for (int i = 0; i < 2 * n; ++i) {
                t += 1.0 + static_cast<double>(xorshift(s) % 977) / 250.0;
                triples.push_back({{static_cast<int>(xorshift(s) % 3)},
                                   (xorshift(s) & 1) ? Side::Left : Side::Right, t});
            }
            const Diagram dg(Path(triples), pairing);
            const auto parts = irreducible_decomposition(dg);
            std::vector<Triple> re;
            std::vector<std::pair<int, int>> rp;
            int off = 0;
            double prev_sup = -1.0;
            for (const auto& part : parts) {
                CHECK(is_irreducible(part));
                CHECK(part.path.triples.front().t > prev_sup);
                prev_sup = part.path.triples.back().t;
                for (const auto& tr : part.path.triples) re.push_back(tr);
                for (const auto& [r, ss] : part.pairing.pairs)
                    rp.emplace_back(r + off, ss + off);
                off += part.path.size();
            }
            std::sort(rp.begin(), rp.end());
            auto orig = dg.pairing.pairs;
            std::sort(orig.begin(), orig.end());
            REQUIRE(re.size() == dg.path.triples.size());
            CHECK(rp == orig);
            for (std::size_t i = 0; i < re.size(); ++i) {
                CHECK(re[i].t == dg.path.triples[i].t);
                CHECK(re[i].site == dg.path.triples[i].site);
                CHECK(re[i].side == dg.path.triples[i].side);
            }
        }
    }
}

TEST_CASE("h_value reproduces the real-time case table") {
    const auto sd = default_sd();
    const double u = 0.3, v = 1.1;
    const auto psi = [&](double t) { return sd.correlation(complexd(t, 0.0)); };
    CHECK(std::abs(h_value(u, v, Side::Left, Side::Left, sd) + psi(u - v)) <= 1e-13);
    CHECK(std::abs(h_value(u, v, Side::Right, Side::Right, sd) + psi(v - u)) <= 1e-13);
    CHECK(std::abs(h_value(u, v, Side::Right, Side::Left, sd) - psi(v - u)) <= 1e-13);
    CHECK(std::abs(h_value(u, v, Side::Left, Side::Right, sd) - psi(u - v)) <= 1e-13);
    // mixed sides are conjugates of one another for real times
    CHECK(std::abs(h_value(u, v, Side::Right, Side::Left, sd) -
                   std::conj(h_value(u, v, Side::Left, Side::Right, sd))) <= 1e-13);
    // equal times, positive: plus/minus psi_hat(0) per the table
    const double t = 0.8;
    CHECK(std::abs(h_value(t, t, Side::Left, Side::Left, sd) + psi(0.0)) <= 1e-13);
    CHECK(std::abs(h_value(t, t, Side::Right, Side::Left, sd) - psi(0.0)) <= 1e-13);
}

TEST_CASE("h_value imaginary-time junction and strip guard") {
    const auto sd = default_sd();
    // s = 0 sits on the real-time branch: continuity from above is plain
    const auto at0 = h_value(0.0, 1.0, Side::Left, Side::Left, sd);
    const auto above = h_value(1e-8, 1.0, Side::Left, Side::Left, sd);
    CHECK(std::abs(above - at0) <= 1e-6);
    // from the imaginary side the prefactor switches branch; the modulus is
    // continuous across the junction
    const auto below = h_value(-1e-8, 1.0, Side::Left, Side::Left, sd);
    CHECK(std::abs(std::abs(below) - std::abs(at0)) <= 1e-6);
    // argument leaving the strip is refused: the later time on the beta leg
    CHECK_THROWS_AS(h_value(0.5, -0.2, Side::Left, Side::Left, sd), DomainError);
    // times below -beta/2 are refused
    CHECK_THROWS_AS(h_value(-0.7, 1.0, Side::Left, Side::Left, sd), DomainError);
}

TEST_CASE("weights: site pinning, printed single-pair value, exact factorization") {
    const auto sd = default_sd();
    SUBCASE("site mismatch kills the weight") {
        std::vector<Triple> ts = {{{0}, Side::Left, 0.0}, {{1}, Side::Left, 1.0}};
        const Diagram d(Path(ts), Pairing({{0, 1}}));
        CHECK(weight(d, 0.7, sd) == complexd(0.0, 0.0));
    }
    SUBCASE("single pair at (0, t), both left") {
        const double t = 1.3, lambda = 0.7;
        std::vector<Triple> ts = {{{2}, Side::Left, 0.0}, {{2}, Side::Left, t}};
        const Diagram d(Path(ts), Pairing({{0, 1}}));
        const complexd expected =
            lambda * lambda * (-sd.correlation(complexd(-t, 0.0)));
        CHECK(std::abs(weight(d, lambda, sd) - expected) <= 1e-13);
        // the sigma order switch only affects mixed-side pairs
        CHECK(weight(d, lambda, sd, SigmaOrder::TimeAligned) ==
              weight(d, lambda, sd, SigmaOrder::AsPrinted));
    }
    SUBCASE("mixed-side pair is sensitive to the sigma order") {
        std::vector<Triple> ts = {{{2}, Side::Left, 0.2}, {{2}, Side::Right, 1.3}};
        const Diagram d(Path(ts), Pairing({{0, 1}}));
        const auto printed = weight(d, 1.0, sd, SigmaOrder::AsPrinted);
        const auto aligned = weight(d, 1.0, sd, SigmaOrder::TimeAligned);
        CHECK(std::abs(printed - std::conj(aligned)) <= 1e-13);
    }
    SUBCASE("weight equals the product over decomposition parts, bit for bit") {
        std::uint64_t s = 11;
        for (int trial = 0; trial < 50; ++trial) {
            const int n = 1 + static_cast<int>(xorshift(s) % 4);
            const auto all = enumerate_pairings(n);
            const auto& pairing = all[xorshift(s) % all.size()];
            std::vector<Triple> triples;
            double t = 0.1;
            for (int i = 0; i < 2 * n; ++i) {
                t += 0.3 + static_cast<double>(xorshift(s) % 400) / 400.0;
                triples.push_back({{0}, (xorshift(s) & 1) ? Side::Left : Side::Right, t});
            }
            const Diagram dg(Path(triples), pairing);
            complexd prod{1.0, 0.0};
            for (const auto& part : irreducible_decomposition(dg))
                prod *= weight(part, 0.6, sd);
            CHECK(weight(dg, 0.6, sd) == prod);
        }
    }
    SUBCASE("factorization over ordered disjoint parts is exact") {
        std::vector<Triple> t1 = {{{0}, Side::Left, 0.25}, {{0}, Side::Right, 1.0}};
        std::vector<Triple> t2 = {{{2}, Side::Right, 1.5},
                                  {{2}, Side::Left, 2.0},
                                  {{2}, Side::Left, 2.25},
                                  {{2}, Side::Right, 3.0}};
        const Diagram d1(Path(t1), Pairing({{0, 1}}));
        const Diagram d2(Path(t2), Pairing({{0, 2}, {1, 3}}));
        std::vector<Triple> tu = t1;
        tu.insert(tu.end(), t2.begin(), t2.end());
        const Diagram du(Path(tu), Pairing({{0, 1}, {2, 4}, {3, 5}}));
        CHECK(weight(du, 0.5, sd) == weight(d1, 0.5, sd) * weight(d2, 0.5, sd));
    }
}

TEST_CASE("pair-sum series matches the per-pairing nested-quadrature oracle") {
    const ExpKernel k{1.0, 1.0};
    for (double S : {0.8, 1.6}) {
        for (int n = 0; n <= 2; ++n) {
            const double fast = pair_sum_series(n, 3, S, k, false);
            const double slow = oracle_series(n, 3, S, k, false);
            CHECK(fast == doctest::Approx(slow).epsilon(1e-8));
        }
        for (int n = 1; n <= 2; ++n) {
            const double fast = pair_sum_series(n, 3, S, k, true);
            const double slow = oracle_series(n, 3, S, k, true);
            CHECK(fast == doctest::Approx(slow).epsilon(1e-8));
        }
    }
}

TEST_CASE("combinatorial bounds hold on the spec instances") {
    SUBCASE("plain bound, n = 0 tail identity") {
        const auto b = bound_check_combi(0, 1.0);
        CHECK(b.ok);
        CHECK(b.rhs == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
    }
    SUBCASE("exp tail identity e^x_1 = e^x - 1") {
        CHECK(exp_tail(1.7, 1) == doctest::Approx(std::exp(1.7) - 1.0).epsilon(1e-12));
        CHECK(exp_tail(1.7, 0) == doctest::Approx(std::exp(1.7)).epsilon(1e-12));
    }
    for (double ilen : {1.0, 2.0}) {
        for (int n = 0; n <= 3; ++n) CHECK(bound_check_combi(n, ilen).ok);
        for (int n = 1; n <= 3; ++n) CHECK(bound_check_combi_pinned(n, ilen).ok);
    }
    SUBCASE("caps are enforced") {
        CHECK_THROWS_AS(bound_check_combi(4, 1.0), ConfigError);
        CHECK_THROWS_AS(bound_check_combi(1, 3.0), ConfigError);
    }
}
