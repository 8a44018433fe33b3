#include "latkin/config.hpp"

#include <fstream>
#include <sstream>

namespace latkin::cli {

const std::map<std::string, std::string>& RunConfig::defaults() {
    static const std::map<std::string, std::string> kDefaults = {
        {"reservoir.beta", "1.0"},
        {"reservoir.profile", "gaussian"},
        {"reservoir.sigma", "1.0"},
        {"reservoir.d_res", "3"},
        {"reservoir.quad_nodes", "400"},
        {"reservoir.cutoff", "12.0"},
        {"reservoir.fit_tmax", "6.0"},
        {"reservoir.fit_samples", "64"},

        {"lattice.d", "1"},
        {"lattice.L", "201"},
        {"lattice.lambda", "1.0"},
        {"lattice.field", "0.2"},
        {"dispersion.kind", "laplacian"},
        {"dispersion.strip", "1.0"},

        {"kinetic.N", "64"},
        {"kinetic.kappa_cap", "0.2"},
        {"kinetic.field_cap", "0.2"},
        {"kinetic.fd_step_field", "1e-3"},
        {"kinetic.fd_step_kappa", "1e-2"},
        {"kinetic.field", "0.05"},
        {"kinetic.kappa_max", "0.1"},
        {"kinetic.kappa_points", "21"},

        {"psd.emax", "2.5"},
        {"psd.points", "50"},
        {"correlation.tmax", "6.0"},
        {"correlation.points", "121"},

        {"ct.nu", "0.5"},
        {"ct.t", "2.0"},
        {"bloch.tmax", "80.0"},
        {"bloch.points", "400"},
        {"bloch.packet_width", "4.0"},
        {"bloch.packet_k", "1.5707963267948966"},

        {"bounds.kernel_rate", "1.0"},
        {"bounds.kernel_scale", "1.0"},

        {"dyson.L", "32"},
        {"dyson.d_res", "4"},
        {"dyson.fit_tmax", "12.0"},
        {"dyson.fit_samples", "96"},
        {"dyson.T_cut", "42.0"},
        {"dyson.panels", "84"},
        {"dyson.nodes_per_panel", "8"},
        {"dyson.bromwich_nodes", "512"},
        {"dyson.mc_samples", "64"},
        {"dyson.seed", "auto"},
        {"dyson.truncation", "1"},
        {"dyson.pair_order", "aligned"},
        {"dyson.kappa", "0.05"},
        {"dyson.lambda", "0.1"},
        {"dyson.lambdas", "0.3,0.1,0.03"},
        {"dyson.dt", "0.15"},
        {"dyson.memory_span", "20.0"},
        {"dyson.radius_scale", "0.05"},
        {"dyson.tmax_gaps", "5.0"},
        {"dyson.fit_lo_gaps", "1.5"},
        {"dyson.fit_hi_gaps", "4.5"},
        {"dyson.n2_t", "2.0"},
    };
    return kDefaults;
}

RunConfig::RunConfig() : values_(defaults()) {}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!defaults().count(key)) throw ConfigError("unknown config key: " + key);
    values_[key] = value;
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto strip = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        line = strip(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
        set(strip(line.substr(0, eq)), strip(line.substr(eq + 1)));
    }
}

const std::string& RunConfig::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key: " + key);
    return it->second;
}

double RunConfig::get_double(const std::string& key) const {
    const std::string& s = get(key);
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config key " + key + ": not a number: " + s);
    }
    if (pos != s.size()) throw ConfigError("config key " + key + ": not a number: " + s);
    return v;
}

int RunConfig::get_int(const std::string& key) const {
    const double v = get_double(key);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
        throw ConfigError("config key " + key + ": not an integer");
    return i;
}

std::vector<double> RunConfig::get_vector(const std::string& key) const {
    const std::string& s = get(key);
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ConfigError("config key " + key + ": not a number list: " + s);
        }
    }
    if (out.empty()) throw ConfigError("config key " + key + ": empty list");
    return out;
}

std::string RunConfig::echo() const {
    std::ostringstream out;
    out << "seed = " << seed_ << "\n";
    for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
    return out.str();
}

}  // namespace latkin::cli
