#include "qnetopt/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qnetopt/errors.hpp"

namespace qnetopt {

Eigen::VectorXd BangBangPolicy::evaluate(double t) const {
    if (!std::isfinite(t) || t < 0.0)
        throw ConfigError("policy evaluated at invalid time " + std::to_string(t));
    if (horizon && t > *horizon * (1.0 + 1e-12))
        throw ConfigError("policy evaluated beyond its horizon");
    Eigen::VectorXd u(control_count());
    for (int k = 0; k < control_count(); ++k) {
        const ControlSchedule& c = controls[k];
        // right-continuous: a switch at exactly t has already been applied
        const auto flips = std::upper_bound(c.switch_times.begin(), c.switch_times.end(), t) -
                           c.switch_times.begin();
        u[k] = (flips % 2 == 0) ? c.initial : u_max - c.initial;
    }
    return u;
}

std::vector<double> BangBangPolicy::merged_switch_times() const {
    std::vector<double> all;
    for (const ControlSchedule& c : controls)
        all.insert(all.end(), c.switch_times.begin(), c.switch_times.end());
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return all;
}

void validate_policy(const BangBangPolicy& policy) {
    if (!(policy.u_max > 0.0) || !std::isfinite(policy.u_max))
        throw ConfigError("policy u_max must be finite and strictly positive");
    if (policy.horizon && (!std::isfinite(*policy.horizon) || *policy.horizon <= 0.0))
        throw ConfigError("policy horizon must be finite and strictly positive");
    for (int k = 0; k < policy.control_count(); ++k) {
        const ControlSchedule& c = policy.controls[k];
        if (c.initial != 0.0 && c.initial != policy.u_max)
            throw ConfigError("control " + std::to_string(k) +
                              ": initial value is not an endpoint (0 or u_max)");
        if (!policy.horizon && !c.switch_times.empty())
            throw ConfigError("control " + std::to_string(k) +
                              ": infinite-horizon policies must be constant");
        double prev = 0.0;
        for (double s : c.switch_times) {
            if (!std::isfinite(s) || s <= prev)
                throw ConfigError("control " + std::to_string(k) +
                                  ": switch times must be strictly increasing and > 0");
            if (policy.horizon && s >= *policy.horizon)
                throw ConfigError("control " + std::to_string(k) +
                                  ": switch time at or beyond the horizon");
            prev = s;
        }
    }
}

BangBangPolicy extract_policy(const CostateTrajectory& traj, const CostSpec& costs,
                              const QueueNetwork& net) {
    BangBangPolicy policy;
    policy.u_max = net.u_max;
    policy.horizon = traj.horizon;
    Eigen::VectorXd s0 = switching_values(net, costs, traj.coeffs.front());
    policy.controls.resize(net.route_count());
    for (int k = 0; k < net.route_count(); ++k) {
        policy.controls[k].initial = s0[k] < 0.0 ? net.u_max : 0.0;
        policy.controls[k].switch_times = traj.switch_times[k];
    }
    validate_policy(policy);
    return policy;
}

BangBangPolicy extract_policy(const StationaryCostate& sol, const QueueNetwork& net) {
    BangBangPolicy policy;
    policy.u_max = net.u_max;
    policy.controls.resize(net.route_count());
    for (int k : sol.active_set) {
        if (k < 0 || k >= net.route_count())
            throw ConfigError("active set entry " + std::to_string(k) + " out of range");
        policy.controls[k].initial = net.u_max;
    }
    validate_policy(policy);
    return policy;
}

BangBangPolicy constant_policy(const Eigen::VectorXd& u, double u_max,
                               std::optional<double> horizon) {
    BangBangPolicy policy;
    policy.u_max = u_max;
    policy.horizon = horizon;
    policy.controls.resize(u.size());
    for (int k = 0; k < u.size(); ++k) {
        if (u[k] != 0.0 && u[k] != u_max)
            throw ConfigError("control " + std::to_string(k) +
                              ": value is not an endpoint (0 or u_max)");
        policy.controls[k].initial = u[k];
    }
    validate_policy(policy);
    return policy;
}

}  // namespace qnetopt
