#pragma once

#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include "latkin/errors.hpp"
#include "latkin/reservoir.hpp"

namespace latkin::diagrams {

using complexd = std::complex<double>;

enum class Side : std::uint8_t { Left, Right };

// One interaction event: lattice site, multiplication side, time.
struct Triple {
    std::vector<int> site;
    Side side = Side::Left;
    double t = 0.0;
};

// Strictly time-ordered list of triples.
struct Path {
    std::vector<Triple> triples;

    explicit Path(std::vector<Triple> ts = {});
    int size() const { return static_cast<int>(triples.size()); }
};

// Perfect matching of {0..2n-1}, each pair stored (r, s) with r < s.
struct Pairing {
    std::vector<std::pair<int, int>> pairs;

    explicit Pairing(std::vector<std::pair<int, int>> ps = {});
    int size() const { return static_cast<int>(pairs.size()); }
};

struct Diagram {
    Path path;
    Pairing pairing;

    Diagram(Path p, Pairing pi);
};

// Sorted union of disjoint closed intervals.
class IntervalUnion {
  public:
    void add(double lo, double hi);
    const std::vector<std::pair<double, double>>& intervals() const { return iv_; }
    bool is_single_interval(double lo, double hi) const;

  private:
    std::vector<std::pair<double, double>> iv_;
};

// All perfect pairings of 2n elements; |result| = (2n-1)!!.
std::vector<Pairing> enumerate_pairings(int n);

std::uint64_t double_factorial_odd(int n);  // (2n-1)!!

IntervalUnion domain(const Diagram& d);
bool is_irreducible(const Diagram& d, double lo, double hi);
bool is_irreducible(const Diagram& d);  // over its own time span

// Unique ordered decomposition into irreducible diagrams with pairwise
// disjoint domains; concatenation reproduces the input.
std::vector<Diagram> irreducible_decomposition(const Diagram& d);

// Argument order used when evaluating pair weights: the printed equation
// passes the sides swapped relative to the times; the aligned order keeps
// side j with time j.
enum class SigmaOrder { AsPrinted, TimeAligned };

// Pair correlation h(s, s', side, side') on [-beta/2, inf)^2 including the
// imaginary-time extension and the sigma prefactors.
complexd h_value(double s, double s_prime, Side sigma, Side sigma_prime,
                 const reservoir::SpectralDensity& sd);

// Product weight of a paired path; zero unless paired sites coincide.
complexd weight(const Diagram& d, double lambda,
                const reservoir::SpectralDensity& sd,
                SigmaOrder order = SigmaOrder::AsPrinted);

}  // namespace latkin::diagrams
