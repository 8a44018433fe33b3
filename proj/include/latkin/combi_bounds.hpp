#pragma once

#include "latkin/errors.hpp"

namespace latkin::diagrams {

// Decay kernel k(t) = scale * exp(-rate t) entering the pair-sum bounds.
struct ExpKernel {
    double scale = 1.0;
    double rate = 1.0;

    double l1() const { return scale / rate; }
    double linf() const { return scale; }
};

struct BoundCheck {
    double lhs = 0.0;        // computed series value (upper estimate incl. tail)
    double lhs_partial = 0.0;
    double tail_bound = 0.0; // certified truncation remainder
    double rhs = 0.0;
    bool ok = false;
};

// exp tail e^x_n = sum_{j >= n} x^j / j!, with e^x_{-m} = e^x.
double exp_tail(double x, int n);

// Sum over p >= n and all pairings of 2p times in [0, I_len] of the simplex
// integral of prod k(t_s - t_r), compared against e^{|I| ||k||_1}_n.
BoundCheck bound_check_combi(int n, double I_len, ExpKernel k = {});

// Pinned-endpoint variant (t_1 = inf I, t_2p = sup I) against
// ||k||_inf e^{..}_{n-1} + ||k||_1^2 e^{..}_{n-2}.
BoundCheck bound_check_combi_pinned(int n, double I_len, ExpKernel k = {});

// Series evaluators used by the checks (exposed for the test oracles):
// total weight of fully paired configurations with p in [n, p_max].
double pair_sum_series(int n, int p_max, double I_len, ExpKernel k, bool pinned);

}  // namespace latkin::diagrams
