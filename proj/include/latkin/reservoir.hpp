#pragma once

#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "latkin/errors.hpp"

namespace latkin::reservoir {

using complexd = std::complex<double>;

// Radial coupling profile r >= 0 -> phi(r), as a named analytic family.
enum class ProfileKind {
    Gaussian,       // exp(-r^2 / (2 sigma^2))
    GaussianTimesR, // r * exp(-r^2 / (2 sigma^2))
    GaussianSqrtR,  // sqrt(r) * exp(-r^2 / (2 sigma^2))
};

ProfileKind profile_from_name(const std::string& name);
std::string profile_name(ProfileKind kind);

struct FormFactor {
    ProfileKind profile = ProfileKind::Gaussian;
    double sigma = 1.0;
    int d_res = 3;

    FormFactor() = default;
    FormFactor(ProfileKind p, double sigma_, int d_res_);

    double operator()(double r) const;
    double profile_at_zero() const;
};

struct QuadSettings {
    int nodes = 400;
    double cutoff = 12.0;
};

struct ReservoirParams {
    double beta = 1.0;
    FormFactor form_factor;
    QuadSettings quad;

    ReservoirParams() = default;
    ReservoirParams(double beta_, FormFactor ff, QuadSettings q = {});
};

struct DecayCertificate {
    double prefactor = 0.0;  // fitted C in |psi_hat(t)| ~ C exp(-g_res t)
    double g_res = 0.0;      // fitted decay rate, must be > 0
    double t_max = 0.0;      // fit window [1, t_max]
    double envelope = 0.0;   // max over samples of |psi_hat(t)| exp(g_res t)
};

// Reservoir correlation function psi_hat on the strip 0 <= Im z <= beta and
// its frequency-domain density psi(E).  Immutable after construction; all
// evaluations are pure.
class SpectralDensity {
  public:
    explicit SpectralDensity(ReservoirParams params);

    const ReservoirParams& params() const { return params_; }
    double beta() const { return params_.beta; }

    // psi(E): closed form obtained by resolving the frequency deltas in the
    // Fourier transform of psi_hat.  Nonnegative, continuous, satisfies
    // psi(-E) = exp(beta E) psi(E).
    double psd(double E) const;

    // psi_hat(z), 0 <= Im z <= beta, by radial quadrature.
    complexd correlation(complexd z) const;

    // Least-squares fit of log|psi_hat| over [1, t_max]; g_res must be > 0.
    DecayCertificate decay_fit(double t_max, int n_samples) const;

    // Runs decay_fit and stores the certificate; downstream modules that
    // depend on reservoir memory loss require a stored certificate.
    const DecayCertificate& certify(double t_max = 6.0, int n_samples = 64);
    const std::optional<DecayCertificate>& certificate() const { return cert_; }

  private:
    ReservoirParams params_;
    std::vector<double> radial_nodes_;
    std::vector<double> radial_weights_;  // includes S_{d-1} r^{d-1} |phi|^2
    std::optional<DecayCertificate> cert_;
};

// Surface area of the unit m-sphere embedded in R^{m+1}.
double unit_sphere_area(int m);

// Bose occupation 1/(exp(beta E) - 1).
double bose_occupation(double beta, double E);

}  // namespace latkin::reservoir
