#include "latkin/reservoir.hpp"

#include <cmath>
#include <numbers>

#include "latkin/quadrature.hpp"

namespace latkin::reservoir {

namespace {
constexpr double kPi = std::numbers::pi;
}

ProfileKind profile_from_name(const std::string& name) {
    if (name == "gaussian") return ProfileKind::Gaussian;
    if (name == "gaussian_r") return ProfileKind::GaussianTimesR;
    if (name == "gaussian_sqrt_r") return ProfileKind::GaussianSqrtR;
    throw ConfigError("unknown form-factor profile: " + name);
}

std::string profile_name(ProfileKind kind) {
    switch (kind) {
        case ProfileKind::Gaussian: return "gaussian";
        case ProfileKind::GaussianTimesR: return "gaussian_r";
        case ProfileKind::GaussianSqrtR: return "gaussian_sqrt_r";
    }
    return "?";
}

FormFactor::FormFactor(ProfileKind p, double sigma_, int d_res_)
    : profile(p), sigma(sigma_), d_res(d_res_) {
    if (sigma <= 0.0) throw ConfigError("form factor width must be positive");
    if (d_res < 1) throw ConfigError("reservoir dimension must be >= 1");
    if (d_res == 1 && profile_at_zero() != 0.0)
        throw AssumptionViolation(
            "d_res = 1 requires profile(0) = 0: psi would be unbounded at E = 0");
}

double FormFactor::operator()(double r) const {
    const double g = std::exp(-r * r / (2.0 * sigma * sigma));
    switch (profile) {
        case ProfileKind::Gaussian: return g;
        case ProfileKind::GaussianTimesR: return r * g;
        case ProfileKind::GaussianSqrtR: return std::sqrt(r) * g;
    }
    return 0.0;
}

double FormFactor::profile_at_zero() const {
    return profile == ProfileKind::Gaussian ? 1.0 : 0.0;
}

ReservoirParams::ReservoirParams(double beta_, FormFactor ff, QuadSettings q)
    : beta(beta_), form_factor(ff), quad(q) {
    if (beta <= 0.0) throw ConfigError("beta must be positive");
    if (quad.nodes < 8) throw ConfigError("quadrature needs at least 8 nodes");
    if (quad.cutoff <= 0.0) throw ConfigError("quadrature cutoff must be positive");
    // The integrand on the strip boundary carries a factor up to exp(beta r),
    // so the tail test includes it.
    const double R = quad.cutoff;
    const double phi = form_factor(R);
    const double tail = phi * phi * std::pow(R, form_factor.d_res - 1) * std::exp(beta * R);
    if (!(tail < 1e-18))
        throw ConfigError("radial cutoff too small: integrand tail " + std::to_string(tail));
}

double unit_sphere_area(int m) {
    // S_m = 2 pi^{(m+1)/2} / Gamma((m+1)/2)
    const double half = 0.5 * (m + 1);
    return 2.0 * std::pow(kPi, half) / std::tgamma(half);
}

double bose_occupation(double beta, double E) {
    return 1.0 / std::expm1(beta * E);
}

SpectralDensity::SpectralDensity(ReservoirParams params) : params_(std::move(params)) {
    const auto [x, w] = quadrature::gauss_legendre(params_.quad.nodes, 0.0, params_.quad.cutoff);
    const int m = params_.form_factor.d_res;
    const double area = unit_sphere_area(m - 1);
    radial_nodes_ = x;
    radial_weights_.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double phi = params_.form_factor(x[i]);
        radial_weights_[i] = w[i] * area * std::pow(x[i], m - 1) * phi * phi;
    }
}

double SpectralDensity::psd(double E) const {
    const int m = params_.form_factor.d_res;
    const double beta = params_.beta;
    const double area = unit_sphere_area(m - 1);
    const double a = std::abs(E);
    if (a < 1e-300) {
        // Continuous limit at E = 0: E^{m-1} n_beta(E) ~ E^{m-2}/beta.
        if (m == 2) {
            const double phi0 = params_.form_factor.profile_at_zero();
            return area * phi0 * phi0 / beta;
        }
        return 0.0;  // m >= 3, or m == 1 with profile(0) = 0
    }
    const double phi = params_.form_factor(a);
    const double base = area * std::pow(a, m - 1) * phi * phi;
    const double n = bose_occupation(beta, a);
    return E > 0.0 ? base * n : base * (1.0 + n);
}

complexd SpectralDensity::correlation(complexd z) const {
    const double beta = params_.beta;
    if (z.imag() < -1e-12 || z.imag() > beta + 1e-12)
        throw DomainError("correlation: argument outside the strip 0 <= Im z <= beta");
    const complexd iz(-z.imag(), z.real());  // i z
    complexd acc{0.0, 0.0};
    for (std::size_t j = 0; j < radial_nodes_.size(); ++j) {
        const double r = radial_nodes_[j];
        const double n = bose_occupation(beta, r);
        acc += radial_weights_[j] * (std::exp(-iz * r) * n + std::exp(iz * r) * (1.0 + n));
    }
    return acc;
}

DecayCertificate SpectralDensity::decay_fit(double t_max, int n_samples) const {
    if (!(t_max > 1.0)) throw ConfigError("decay_fit: t_max must exceed 1");
    if (n_samples < 8) throw ConfigError("decay_fit: need at least 8 samples");
    // Least squares of log|psi_hat(t)| = log C - g t over [1, t_max].
    std::vector<double> ts, ys;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n_samples; ++i) {
        const double t = 1.0 + (t_max - 1.0) * i / (n_samples - 1.0);
        const double a = std::abs(correlation(complexd(t, 0.0)));
        if (a <= 0.0) continue;  // quadrature underflow; drop the sample
        ts.push_back(t);
        ys.push_back(std::log(a));
        sx += t; sy += ys.back(); sxx += t * t; sxy += t * ys.back();
    }
    const int used = static_cast<int>(ts.size());
    if (used < 8) throw NumericalError("decay_fit: too many underflowed samples");
    const double denom = used * sxx - sx * sx;
    const double slope = (used * sxy - sx * sy) / denom;
    const double icpt = (sy - slope * sx) / used;
    DecayCertificate cert{std::exp(icpt), -slope, t_max, 0.0};
    if (!(cert.g_res > 0.0))
        throw AssumptionViolation("decay_fit: fitted reservoir memory rate is not positive");
    for (int i = 0; i < used; ++i)
        cert.envelope = std::max(cert.envelope, std::exp(ys[i] + cert.g_res * ts[i]));
    return cert;
}

const DecayCertificate& SpectralDensity::certify(double t_max, int n_samples) {
    cert_ = decay_fit(t_max, n_samples);
    return *cert_;
}

}  // namespace latkin::reservoir
