#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "latkin/errors.hpp"

namespace latkin::cli {

// Flat key=value configuration with a closed key registry; unknown keys are
// rejected.  Every run writes a resolved echo of what it used.
class RunConfig {
  public:
    RunConfig();  // defaults only

    void load_file(const std::string& path);
    void set(const std::string& key, const std::string& value);
    void set_seed(std::uint64_t seed) { seed_ = seed; }

    std::uint64_t seed() const { return seed_; }

    const std::string& get(const std::string& key) const;
    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    std::vector<double> get_vector(const std::string& key) const;

    // Sorted key=value echo of the resolved configuration.
    std::string echo() const;

    static const std::map<std::string, std::string>& defaults();

  private:
    std::map<std::string, std::string> values_;
    std::uint64_t seed_ = 0;
};

}  // namespace latkin::cli
