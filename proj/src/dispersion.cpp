#include "latkin/dispersion.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <numbers>

namespace latkin::lattice {

namespace {
constexpr double kPi = std::numbers::pi;

std::vector<int> negated(const std::vector<int>& x) {
    std::vector<int> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = -x[i];
    return y;
}
}  // namespace

DispersionLaw::DispersionLaw(int d, std::vector<Term> terms, double strip)
    : d_(d), terms_(std::move(terms)), strip_(strip) {
    if (d_ < 1) throw ConfigError("dispersion: dimension must be >= 1");
    if (strip_ <= 0.0) throw ConfigError("dispersion: strip width must be positive");
    std::map<std::vector<int>, double> by_offset;
    for (const auto& t : terms_) {
        if (static_cast<int>(t.offset.size()) != d_)
            throw ConfigError("dispersion: offset dimension mismatch");
        by_offset[t.offset] += t.coeff;
    }
    for (const auto& [x, c] : by_offset) {
        const auto it = by_offset.find(negated(x));
        if (it == by_offset.end() || std::abs(it->second - c) > 1e-14)
            throw ConfigError("dispersion: coefficients must be even, ehat(x) = ehat(-x)");
    }
    if (nondegeneracy() <= 1e-10)
        throw ConfigError("dispersion: grad(eps) is orthogonal to a fixed direction");
}

DispersionLaw DispersionLaw::laplacian(int d, double strip) {
    std::vector<Term> terms;
    std::vector<int> zero(d, 0);
    terms.push_back({zero, 2.0 * d});
    for (int j = 0; j < d; ++j) {
        std::vector<int> e(d, 0);
        e[j] = 1;
        terms.push_back({e, -1.0});
        e[j] = -1;
        terms.push_back({e, -1.0});
    }
    return DispersionLaw(d, std::move(terms), strip);
}

complexd DispersionLaw::eval(const std::vector<complexd>& k) const {
    complexd acc{0.0, 0.0};
    for (const auto& t : terms_) {
        complexd phase{0.0, 0.0};
        for (int j = 0; j < d_; ++j) phase += k[j] * static_cast<double>(t.offset[j]);
        acc += t.coeff * std::exp(complexd(0.0, 1.0) * phase);
    }
    return acc;
}

double DispersionLaw::eval_real(const std::vector<double>& k) const {
    double acc = 0.0;
    for (const auto& t : terms_) {
        double phase = 0.0;
        for (int j = 0; j < d_; ++j) phase += k[j] * t.offset[j];
        acc += t.coeff * std::cos(phase);
    }
    return acc;
}

std::vector<complexd> DispersionLaw::grad(const std::vector<complexd>& k) const {
    std::vector<complexd> g(d_, complexd{0.0, 0.0});
    for (const auto& t : terms_) {
        complexd phase{0.0, 0.0};
        for (int j = 0; j < d_; ++j) phase += k[j] * static_cast<double>(t.offset[j]);
        const complexd f = t.coeff * std::exp(complexd(0.0, 1.0) * phase) * complexd(0.0, 1.0);
        for (int j = 0; j < d_; ++j) g[j] += f * static_cast<double>(t.offset[j]);
    }
    return g;
}

double DispersionLaw::grad_real(const std::vector<double>& k, int axis) const {
    if (axis < 0 || axis >= d_) throw ConfigError("dispersion: bad axis");
    double acc = 0.0;
    for (const auto& t : terms_) {
        double phase = 0.0;
        for (int j = 0; j < d_; ++j) phase += k[j] * t.offset[j];
        acc += -t.coeff * t.offset[axis] * std::sin(phase);
    }
    return acc;
}

double DispersionLaw::hopping(const std::vector<int>& dx) const {
    double acc = 0.0;
    for (const auto& t : terms_)
        if (t.offset == dx) acc += t.coeff;
    return acc;
}

double DispersionLaw::im_sup(double nu, int samples_per_axis) const {
    // |Im eps| is maximal on the distinguished boundary |Im k_j| = nu.
    double best = 0.0;
    std::vector<complexd> k(d_);
    std::vector<int> idx(d_, 0);
    std::vector<int> sgn(d_, 0);
    const int signs = 1 << d_;
    for (int s = 0; s < signs; ++s) {
        for (int j = 0; j < d_; ++j) sgn[j] = (s >> j) & 1 ? 1 : -1;
        std::fill(idx.begin(), idx.end(), 0);
        while (true) {
            for (int j = 0; j < d_; ++j)
                k[j] = complexd(-kPi + 2.0 * kPi * idx[j] / samples_per_axis, sgn[j] * nu);
            best = std::max(best, std::abs(eval(k).imag()));
            int j = 0;
            for (; j < d_; ++j) {
                if (++idx[j] < samples_per_axis) break;
                idx[j] = 0;
            }
            if (j == d_) break;
        }
    }
    return best;
}

double DispersionLaw::nondegeneracy(int samples_per_axis) const {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d_, d_);
    std::vector<double> k(d_);
    std::vector<int> idx(d_, 0);
    while (true) {
        for (int j = 0; j < d_; ++j) k[j] = -kPi + 2.0 * kPi * idx[j] / samples_per_axis;
        Eigen::VectorXd g(d_);
        for (int j = 0; j < d_; ++j) g[j] = grad_real(k, j);
        gram += g * g.transpose();
        int j = 0;
        for (; j < d_; ++j) {
            if (++idx[j] < samples_per_axis) break;
            idx[j] = 0;
        }
        if (j == d_) break;
    }
    gram /= std::pow(static_cast<double>(samples_per_axis), d_);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    return es.eigenvalues().minCoeff();
}

}  // namespace latkin::lattice
