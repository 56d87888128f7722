#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnetopt/costs.hpp"
#include "qnetopt/network.hpp"

namespace qnetopt {

struct ValidationCheck {
    std::string name;
    bool passed = false;
    double deviation = 0.0;  // measured discrepancy, units per check
    double tolerance = 0.0;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    bool all_passed() const;
};

enum class ValidationMode { vi, mean_ode, hjb, all };

struct ValidationOptions {
    ValidationMode mode = ValidationMode::all;
    State x0;                        // required
    int total_cap = 6;               // population cap for the truncated chain
    std::int64_t max_states = 200000;
    int vi_steps = 10000;
    double ih_tol = 1e-9;
    std::int64_t trials = 2000;      // Monte-Carlo trials
    std::uint64_t seed = 0;
    double dt = 0.0;                 // solver grid step; <=0 selects default
    int hjb_samples = 100;
    double perturb_y = 0.0;          // nonzero: shift coefficients (negative control)
};

// Cross-checks the solver against the truncated-chain, mean-ODE, and
// dynamic-programming-residual oracles. Throws ConfigError for infeasible
// setups (state space above max_states, bad x0); individual check failures
// are reported, not thrown.
ValidationReport run_validation(const QueueNetwork& net, const CostSpec& costs,
                                const ValidationOptions& options);

nlohmann::json report_to_json(const ValidationReport& report);

}  // namespace qnetopt
