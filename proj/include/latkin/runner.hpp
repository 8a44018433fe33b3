#pragma once

#include <string>
#include <vector>

#include "latkin/config.hpp"
#include "latkin/dispersion.hpp"
#include "latkin/reservoir.hpp"

namespace latkin::cli {

struct CriterionResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Builds the reservoir from config (certified) and the dispersion law.
reservoir::SpectralDensity make_reservoir(const RunConfig& cfg, double beta,
                                          int d_res);
reservoir::SpectralDensity make_reservoir(const RunConfig& cfg);
// Reservoir for the diagram-expansion runs: smooth frequency density
// (dyson.d_res) and a certificate window long enough for the T_cut bound.
reservoir::SpectralDensity make_dyson_reservoir(const RunConfig& cfg);
lattice::DispersionLaw make_dispersion(const RunConfig& cfg);

// Frequency-domain density through the damped Fourier transform of the
// quadrature correlation function, Richardson-extrapolated in the damping;
// independent of the closed form used by SpectralDensity::psd.  The psi_hat
// samples are tabulated once on a fine radial rule and shared across E.
class PsdOracle {
  public:
    explicit PsdOracle(const reservoir::ReservoirParams& params, double eta = 8e-4,
                       int radial_nodes = 4000);

    double operator()(double E) const;

  private:
    double damped(double E, double eta) const;

    double eta_;
    std::vector<double> t_nodes_;
    std::vector<double> t_weights_;
    std::vector<std::complex<double>> psi_hat_;
};

double psd_fourier_oracle(const reservoir::SpectralDensity& sd, double E);

// Dispatch for one subcommand; writes CSVs under outdir.  Throws on errors.
void run_subcommand(const std::string& cmd, const RunConfig& cfg,
                    const std::string& outdir);

// The acceptance suite; one result per criterion.
std::vector<CriterionResult> run_acceptance(const RunConfig& cfg,
                                            const std::string& outdir);

const std::vector<std::string>& subcommands();

}  // namespace latkin::cli
