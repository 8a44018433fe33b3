#include "latkin/combi_bounds.hpp"

#include <cmath>
#include <vector>

namespace latkin::diagrams {

double exp_tail(double x, int n) {
    if (n <= 0) return std::exp(x);
    double head = 0.0, term = 1.0;
    for (int j = 0; j < n; ++j) {
        head += term;
        term *= x / (j + 1);
    }
    return std::exp(x) - head;
}

namespace {
// State F[d][p]: weight of configurations on [0, s] with d open pairs and p
// pairs opened so far.  Openings carry k.scale, each open pair decays at
// k.rate, closings pick any open pair.  Marching this linear system across
// the interval sums every pairing and its simplex integral at once.
struct Master {
    int pmax;
    ExpKernel k;

    std::vector<std::vector<double>> deriv(const std::vector<std::vector<double>>& f) const {
        std::vector<std::vector<double>> df(pmax + 1, std::vector<double>(pmax + 1, 0.0));
        for (int p = 0; p <= pmax; ++p)
            for (int d = 0; d <= p; ++d) {
                double v = -k.rate * d * f[p][d];
                if (p >= 1 && d >= 1) v += k.scale * f[p - 1][d - 1];
                if (d + 1 <= p) v += (d + 1) * f[p][d + 1];
                df[p][d] = v;
            }
        return df;
    }

    // Classic RK4; the system is small and smooth.
    void step(std::vector<std::vector<double>>& f, double h) const {
        const auto k1 = deriv(f);
        auto add = [&](const std::vector<std::vector<double>>& a, double c,
                       const std::vector<std::vector<double>>& b) {
            auto out = a;
            for (std::size_t p = 0; p < out.size(); ++p)
                for (std::size_t d = 0; d < out[p].size(); ++d) out[p][d] += c * b[p][d];
            return out;
        };
        const auto k2 = deriv(add(f, 0.5 * h, k1));
        const auto k3 = deriv(add(f, 0.5 * h, k2));
        const auto k4 = deriv(add(f, h, k3));
        for (int p = 0; p <= pmax; ++p)
            for (int d = 0; d <= p; ++d)
                f[p][d] += h / 6.0 * (k1[p][d] + 2.0 * k2[p][d] + 2.0 * k3[p][d] + k4[p][d]);
    }
};
}  // namespace

double pair_sum_series(int n, int p_max, double I_len, ExpKernel k, bool pinned) {
    if (I_len < 0.0) throw ConfigError("pair_sum_series: negative interval");
    Master master{p_max, k};
    std::vector<std::vector<double>> f(p_max + 1, std::vector<double>(p_max + 1, 0.0));
    if (pinned)
        f[1][1] = k.scale;  // one pair forced open at the left endpoint
    else
        f[0][0] = 1.0;
    const int steps = std::max(400, static_cast<int>(800 * I_len));
    const double h = I_len / steps;
    for (int s = 0; s < steps; ++s) master.step(f, h);
    double acc = 0.0;
    if (pinned) {
        // The final closing is pinned at sup I: flux out of depth 1.
        for (int p = std::max(n, 1); p <= p_max; ++p) acc += f[p][1];
    } else {
        for (int p = n; p <= p_max; ++p) acc += f[p][0];
    }
    return acc;
}

namespace {
// Certified remainder of the p-series: each v-integral is bounded by ||k||_1
// and the u-simplex gives |I|^p / p!; the pinned variant uses the endpoint
// split into the (1,2p) pair and the general case.
double series_tail(int p_from, double I_len, ExpKernel k, bool pinned) {
    const double x = I_len * k.l1();
    if (!pinned) return exp_tail(x, p_from);
    return k.linf() * exp_tail(x, p_from - 1) + k.l1() * k.l1() * exp_tail(x, p_from - 2);
}
}  // namespace

BoundCheck bound_check_combi(int n, double I_len, ExpKernel k) {
    if (n < 0 || n > 3) throw ConfigError("bound_check_combi: n must be in [0, 3]");
    if (I_len < 0.0 || I_len > 2.0)
        throw ConfigError("bound_check_combi: |I| must be in [0, 2]");
    const int p_max = 18;
    BoundCheck out;
    out.lhs_partial = pair_sum_series(n, p_max, I_len, k, false);
    out.tail_bound = series_tail(p_max + 1, I_len, k, false);
    out.lhs = out.lhs_partial + out.tail_bound;
    out.rhs = exp_tail(I_len * k.l1(), n);
    out.ok = out.lhs <= out.rhs * (1.0 + 1e-8);
    return out;
}

BoundCheck bound_check_combi_pinned(int n, double I_len, ExpKernel k) {
    if (n < 1 || n > 3) throw ConfigError("bound_check_combi_pinned: n must be in [1, 3]");
    if (I_len < 0.0 || I_len > 2.0)
        throw ConfigError("bound_check_combi_pinned: |I| must be in [0, 2]");
    const int p_max = 18;
    BoundCheck out;
    out.lhs_partial = pair_sum_series(n, p_max, I_len, k, true);
    out.tail_bound = series_tail(p_max + 1, I_len, k, true);
    out.lhs = out.lhs_partial + out.tail_bound;
    const double x = I_len * k.l1();
    out.rhs = k.linf() * exp_tail(x, n - 1) + k.l1() * k.l1() * exp_tail(x, n - 2);
    out.ok = out.lhs <= out.rhs * (1.0 + 1e-8);
    return out;
}

}  // namespace latkin::diagrams
