#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "latkin/errors.hpp"
#include "latkin/runner.hpp"

namespace {

void write_error_file(const std::string& outdir, const std::string& kind,
                      const std::string& message) {
    std::ofstream out(outdir + "/error.txt");
    out << "error_type=" << kind << "\n";
    out << "message=" << message << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"latkin: kinetic limit of a driven lattice particle"};
    app.require_subcommand(1);
    app.fallthrough(true);

    std::string config_path;
    std::vector<std::string> overrides;
    std::string outdir = "out";
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "key=value configuration file");
    app.add_option("--set", overrides, "override, e.g. --set kinetic.N=128");
    app.add_option("--out", outdir, "output directory");
    app.add_option("--seed", seed, "random seed for stochastic estimators");

    for (const auto& name : latkin::cli::subcommands())
        app.add_subcommand(name)->silent(false);

    CLI11_PARSE(app, argc, argv);
    const std::string cmd = app.get_subcommands().front()->get_name();

    latkin::cli::RunConfig cfg;
    try {
        if (!config_path.empty()) cfg.load_file(config_path);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw latkin::ConfigError("--set expects key=value, got: " + kv);
            cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
        }
        cfg.set_seed(seed);
    } catch (const latkin::ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return 2;
    }

    try {
        latkin::cli::run_subcommand(cmd, cfg, outdir);
    } catch (const latkin::ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        write_error_file(outdir, "configuration", e.what());
        return 2;
    } catch (const latkin::AssumptionViolation& e) {
        std::fprintf(stderr, "assumption violation: %s\n", e.what());
        write_error_file(outdir, "assumption_violation", e.what());
        return 3;
    } catch (const latkin::DomainError& e) {
        std::fprintf(stderr, "domain error: %s\n", e.what());
        write_error_file(outdir, "domain", e.what());
        return 3;
    } catch (const latkin::NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        write_error_file(outdir, "numerical", e.what());
        return 3;
    }
    return 0;
}
