#include "latkin/diagrams.hpp"

#include <algorithm>
#include <limits>
#include <map>

namespace latkin::diagrams {

Path::Path(std::vector<Triple> ts) : triples(std::move(ts)) {
    for (std::size_t i = 1; i < triples.size(); ++i)
        if (!(triples[i - 1].t < triples[i].t))
            throw DomainError("path: times must be strictly increasing");
}

Pairing::Pairing(std::vector<std::pair<int, int>> ps) : pairs(std::move(ps)) {
    const int n2 = 2 * static_cast<int>(pairs.size());
    std::vector<bool> seen(n2, false);
    for (auto& [r, s] : pairs) {
        if (r >= s) throw DomainError("pairing: pairs must satisfy r < s");
        if (r < 0 || s >= n2 || seen[r] || seen[s])
            throw DomainError("pairing: not a partition into pairs");
        seen[r] = seen[s] = true;
    }
}

Diagram::Diagram(Path p, Pairing pi) : path(std::move(p)), pairing(std::move(pi)) {
    if (path.size() != 2 * pairing.size())
        throw DomainError("diagram: path and pairing sizes are incompatible");
}

void IntervalUnion::add(double lo, double hi) {
    if (lo > hi) std::swap(lo, hi);
    std::vector<std::pair<double, double>> out;
    bool placed = false;
    for (const auto& [a, b] : iv_) {
        if (b < lo || hi < a) {
            if (a > hi && !placed) {
                out.emplace_back(lo, hi);
                placed = true;
            }
            out.emplace_back(a, b);
        } else {
            lo = std::min(lo, a);
            hi = std::max(hi, b);
        }
    }
    if (!placed) out.emplace_back(lo, hi);
    std::sort(out.begin(), out.end());
    iv_ = std::move(out);
}

bool IntervalUnion::is_single_interval(double lo, double hi) const {
    return iv_.size() == 1 && iv_[0].first == lo && iv_[0].second == hi;
}

std::uint64_t double_factorial_odd(int n) {
    std::uint64_t acc = 1;
    for (int j = 2 * n - 1; j > 1; j -= 2) acc *= static_cast<std::uint64_t>(j);
    return acc;
}

namespace {
void enumerate_rec(std::vector<int>& free, std::vector<std::pair<int, int>>& cur,
                   std::vector<Pairing>& out) {
    if (free.empty()) {
        out.emplace_back(cur);
        return;
    }
    const int r = free.front();
    for (std::size_t j = 1; j < free.size(); ++j) {
        const int s = free[j];
        std::vector<int> rest;
        rest.reserve(free.size() - 2);
        for (std::size_t m = 1; m < free.size(); ++m)
            if (m != j) rest.push_back(free[m]);
        cur.emplace_back(r, s);
        enumerate_rec(rest, cur, out);
        cur.pop_back();
    }
}
}  // namespace

std::vector<Pairing> enumerate_pairings(int n) {
    if (n < 0 || n > 8) throw ConfigError("enumerate_pairings: n must be in [0, 8]");
    std::vector<Pairing> out;
    out.reserve(double_factorial_odd(n));
    std::vector<int> free(2 * n);
    for (int i = 0; i < 2 * n; ++i) free[i] = i;
    std::vector<std::pair<int, int>> cur;
    enumerate_rec(free, cur, out);
    return out;
}

IntervalUnion domain(const Diagram& d) {
    IntervalUnion u;
    for (const auto& [r, s] : d.pairing.pairs)
        u.add(d.path.triples[r].t, d.path.triples[s].t);
    return u;
}

bool is_irreducible(const Diagram& d, double lo, double hi) {
    if (d.path.size() == 0) return false;
    return domain(d).is_single_interval(lo, hi);
}

bool is_irreducible(const Diagram& d) {
    if (d.path.size() == 0) return false;
    return is_irreducible(d, d.path.triples.front().t, d.path.triples.back().t);
}

std::vector<Diagram> irreducible_decomposition(const Diagram& d) {
    const int n2 = d.path.size();
    if (n2 == 0) return {};
    // Pairs sorted by opening time; a component closes when the running
    // cover max lies strictly before the next opening.
    auto pairs = d.pairing.pairs;
    std::sort(pairs.begin(), pairs.end(), [&](const auto& a, const auto& b) {
        return d.path.triples[a.first].t < d.path.triples[b.first].t;
    });
    std::vector<std::vector<std::pair<int, int>>> comps;
    double cover = -std::numeric_limits<double>::infinity();
    for (const auto& pr : pairs) {
        const double tr = d.path.triples[pr.first].t;
        const double ts = d.path.triples[pr.second].t;
        if (comps.empty() || tr > cover) comps.emplace_back();
        comps.back().push_back(pr);
        cover = std::max(cover, ts);
    }
    std::vector<Diagram> out;
    out.reserve(comps.size());
    for (const auto& comp : comps) {
        std::vector<int> members;
        for (const auto& [r, s] : comp) {
            members.push_back(r);
            members.push_back(s);
        }
        std::sort(members.begin(), members.end());
        std::map<int, int> remap;
        std::vector<Triple> triples;
        for (int m : members) {
            remap[m] = static_cast<int>(triples.size());
            triples.push_back(d.path.triples[m]);
        }
        std::vector<std::pair<int, int>> rp;
        for (const auto& [r, s] : comp) rp.emplace_back(remap[r], remap[s]);
        std::sort(rp.begin(), rp.end());
        out.emplace_back(Path(std::move(triples)), Pairing(std::move(rp)));
    }
    return out;
}

namespace {
// m_-(s) and m_+(s): identity on s >= 0, -is and +is on [-beta/2, 0].
complexd m_minus(double s) { return s >= 0.0 ? complexd(s, 0.0) : complexd(0.0, -s); }
complexd m_plus(double s) { return s >= 0.0 ? complexd(s, 0.0) : complexd(0.0, s); }

// 1 on the imaginary leg, -i / +i for left / right insertions at real times.
// The junction s = 0 counts as real time, which keeps the four-case table of
// the real-time expansion valid on all of [0, inf).
complexd sigma_prefactor(double s, Side side) {
    if (s < 0.0) return {1.0, 0.0};
    return side == Side::Left ? complexd(0.0, -1.0) : complexd(0.0, 1.0);
}
}  // namespace

complexd h_value(double s, double s_prime, Side sigma, Side sigma_prime,
                 const reservoir::SpectralDensity& sd) {
    const double beta = sd.beta();
    if (s < -0.5 * beta - 1e-12 || s_prime < -0.5 * beta - 1e-12)
        throw DomainError("h_value: times must lie in [-beta/2, inf)");
    complexd arg;
    if (sigma == Side::Left && sigma_prime == Side::Left)
        arg = m_minus(s) - m_minus(s_prime);
    else if (sigma == Side::Right && sigma_prime == Side::Right)
        arg = m_plus(s_prime) - m_plus(s);
    else if (sigma == Side::Right && sigma_prime == Side::Left)
        arg = m_minus(s_prime) - m_plus(s);
    else
        arg = m_minus(s) - m_plus(s_prime);
    if (arg.imag() < -1e-12 || arg.imag() > beta + 1e-12)
        throw DomainError("h_value: correlation argument left the strip");
    // All case signs are carried by the sigma prefactors: for positive times
    // (sigma sigma') equals -1 on equal sides and +1 on mixed sides, which
    // reproduces the real-time case table.
    return sigma_prefactor(s, sigma) * sigma_prefactor(s_prime, sigma_prime) *
           sd.correlation(arg);
}

namespace {
complexd component_weight(const Diagram& d, double lambda,
                          const reservoir::SpectralDensity& sd, SigmaOrder order) {
    complexd acc{1.0, 0.0};
    for (const auto& [r, s] : d.pairing.pairs) {
        const Triple& tr = d.path.triples[r];
        const Triple& ts = d.path.triples[s];
        if (tr.site != ts.site) return {0.0, 0.0};
        const complexd h = order == SigmaOrder::AsPrinted
                               ? h_value(tr.t, ts.t, ts.side, tr.side, sd)
                               : h_value(tr.t, ts.t, tr.side, ts.side, sd);
        acc *= lambda * lambda * h;
    }
    return acc;
}
}  // namespace

complexd weight(const Diagram& d, double lambda, const reservoir::SpectralDensity& sd,
                SigmaOrder order) {
    // Evaluated through the irreducible decomposition in its canonical pair
    // order, so the product of the part weights reproduces the whole bit for
    // bit.
    const auto parts = irreducible_decomposition(d);
    if (parts.empty()) return {1.0, 0.0};
    complexd acc{1.0, 0.0};
    for (const auto& part : parts) acc *= component_weight(part, lambda, sd, order);
    return acc;
}

}  // namespace latkin::diagrams
