#pragma once

#include <cstdint>

namespace distint {

/// Shared tunables. Field defaults are the library-wide defaults; the CLI
/// layers flags/env/config-file on top.
struct Config {
    // top-level target accuracy for engine results
    double tol = 1e-8;

    // absolute quadrature
    double quad_abs_tol = 1e-10;
    double quad_rel_tol = 1e-10;
    std::int64_t quad_budget = 10'000'000;  // integrand evaluations per call

    // Cesaro machinery
    double cesaro_tol = 1e-4;   // relative variation of the trailing mean window
    double local_limit_tol = 1e-3;  // acceptance for quadrature-backed local limits
    int k_max = 6;              // series / limit order escalation cap
    int n_max = 6;              // local-limit / point-value order cap
    double divergence_bound = 1e12;

    // geometric meshes for local limits and point values
    double mesh_ratio = 0.9;
    int mesh_points = 220;
    double mesh_start_fraction = 0.5;

    // chirp reduction
    double margin = 0.25;       // h exponents must exceed -1 + margin

    // improper / Hake endpoint engine
    double limit_x_max = 1e5;   // how far toward infinity the averaging probes
    int limit_samples = 12;      // sample count over the last decade

    bool trace = true;
};

inline const Config& default_config() {
    static const Config cfg{};
    return cfg;
}

}  // namespace distint
