#include "qnetopt/costs.hpp"

#include <cmath>
#include <string>

#include "qnetopt/errors.hpp"

namespace qnetopt {

namespace {

void check_entries(const Eigen::VectorXd& v, int expected, const char* label) {
    if (v.size() != expected)
        throw ConfigError(std::string(label) + " has " + std::to_string(v.size()) +
                          " entries, expected " + std::to_string(expected));
    for (int i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i]) || v[i] < 0.0)
            throw ConfigError(std::string(label) + " entry " + std::to_string(i) +
                              " must be finite and >= 0");
}

}  // namespace

void validate_costs(const CostSpec& costs, const QueueNetwork& net, bool require_horizon) {
    check_entries(costs.state_cost, net.n, "state_cost");
    check_entries(costs.control_cost, net.route_count(), "control_cost");
    check_entries(costs.terminal_cost, net.n, "terminal_cost");
    if (require_horizon && (!std::isfinite(costs.horizon) || costs.horizon <= 0.0))
        throw ConfigError("horizon must be finite and strictly positive");
}

double stage_cost_rate(const QueueNetwork& net, const CostSpec& costs,
                       const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    double rate = costs.state_cost.dot(x);
    for (int k = 0; k < net.route_count(); ++k)
        rate += costs.control_cost[k] * u[k] * x[net.route_source[k]];
    return rate;
}

}  // namespace qnetopt
