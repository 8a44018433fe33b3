#pragma once

#include <complex>
#include <string>
#include <vector>

#include "latkin/errors.hpp"

namespace latkin::lattice {

using complexd = std::complex<double>;

// Dispersion law on the d-torus given as a finite Fourier series
//   eps(k) = sum_x ehat(x) exp(i k.x),
// with real, even coefficient set (ehat(x) = ehat(-x)), so eps is real and
// even on real momenta and entire in each complex variable.
class DispersionLaw {
  public:
    struct Term {
        std::vector<int> offset;
        double coeff;
    };

    DispersionLaw(int d, std::vector<Term> terms, double strip = 1.0);

    // Nearest-neighbour Laplacian sum_j 2(1 - cos k_j).
    static DispersionLaw laplacian(int d, double strip = 1.0);

    int dim() const { return d_; }
    double strip() const { return strip_; }
    const std::vector<Term>& terms() const { return terms_; }

    complexd eval(const std::vector<complexd>& k) const;
    double eval_real(const std::vector<double>& k) const;
    std::vector<complexd> grad(const std::vector<complexd>& k) const;
    double grad_real(const std::vector<double>& k, int axis) const;

    // Hopping kernel entry ehat(x - x').
    double hopping(const std::vector<int>& dx) const;

    // sup of |Im eps| over the polystrip |Im k_j| <= nu, sampled on the
    // distinguished boundary.
    double im_sup(double nu, int samples_per_axis = 64) const;

    // Assumption check: no fixed direction v with v . grad(eps) == 0 on the
    // torus.  Returns the smallest eigenvalue of the sampled Gram matrix of
    // grad(eps); positive means non-degenerate.
    double nondegeneracy(int samples_per_axis = 16) const;

  private:
    int d_;
    std::vector<Term> terms_;
    double strip_;
};

}  // namespace latkin::lattice
