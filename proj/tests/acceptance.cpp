// Acceptance suite: runs every shipped criterion at its stated tolerance and
// prints one pass/fail line per criterion.
#include <cstdio>

#include "latkin/config.hpp"
#include "latkin/runner.hpp"

int main() {
    latkin::cli::RunConfig cfg;
    cfg.set_seed(12345);
    const auto results = latkin::cli::run_acceptance(cfg, "acceptance_out");
    int failures = 0;
    for (const auto& r : results)
        if (!r.pass) ++failures;
    if (failures > 0) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all %zu criteria passed\n", results.size());
    return 0;
}
