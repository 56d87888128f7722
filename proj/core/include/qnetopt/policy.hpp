#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qnetopt/costate.hpp"
#include "qnetopt/costs.hpp"
#include "qnetopt/network.hpp"

namespace qnetopt {

struct ControlSchedule {
    double initial = 0.0;              // value on [0, first switch)
    std::vector<double> switch_times;  // strictly increasing, inside (0, horizon)
};

// Piecewise-constant open-loop policy. Every control value is exactly 0 or
// u_max; each switch toggles. A policy without a horizon is constant.
struct BangBangPolicy {
    double u_max = 0.0;
    std::optional<double> horizon;
    std::vector<ControlSchedule> controls;

    int control_count() const { return static_cast<int>(controls.size()); }
    bool finite_horizon() const { return horizon.has_value(); }

    // Right-continuous: at a switch time the post-switch value applies.
    // Valid for t in [0, horizon] (finite) or t >= 0 (infinite).
    Eigen::VectorXd evaluate(double t) const;

    // Switch times of all controls merged, sorted, deduplicated.
    std::vector<double> merged_switch_times() const;
};

// Throws ConfigError unless the policy is internally consistent (values in
// {0, u_max}, switch times strictly increasing and inside the horizon,
// constant when no horizon).
void validate_policy(const BangBangPolicy& policy);

BangBangPolicy extract_policy(const CostateTrajectory& traj, const CostSpec& costs,
                              const QueueNetwork& net);
BangBangPolicy extract_policy(const StationaryCostate& sol, const QueueNetwork& net);

// Constant policy from explicit control values (each exactly 0 or u_max).
BangBangPolicy constant_policy(const Eigen::VectorXd& u, double u_max,
                               std::optional<double> horizon = std::nullopt);

}  // namespace qnetopt
