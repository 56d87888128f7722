#pragma once

#include <Eigen/Dense>

#include "qnetopt/network.hpp"

namespace qnetopt {

// Linear cost model. state_cost: per unit held per time; control_cost: per
// unit of routed flow (rate u_k * x_source) per time; terminal_cost: per unit
// held at the horizon. All entries non-negative.
struct CostSpec {
    Eigen::VectorXd state_cost;     // length n
    Eigen::VectorXd control_cost;   // length m_u
    Eigen::VectorXd terminal_cost;  // length n
    double horizon = 0.0;           // ignored by infinite-horizon solves
};

// Throws ConfigError on dimension mismatch, negative entries, or (when
// require_horizon) a non-positive horizon.
void validate_costs(const CostSpec& costs, const QueueNetwork& net,
                    bool require_horizon);

// Instantaneous cost rate q.x + sum_k v_k u_k x_{source(k)}.
double stage_cost_rate(const QueueNetwork& net, const CostSpec& costs,
                       const Eigen::VectorXd& x, const Eigen::VectorXd& u);

}  // namespace qnetopt
