#pragma once

#include <vector>

#include <Eigen/Dense>

#include "qnetopt/costs.hpp"
#include "qnetopt/network.hpp"
#include "qnetopt/policy.hpp"

namespace qnetopt {

// Drift matrix A(u) of the first-moment equation dmu/dt = A(u) mu. Because
// all event rates are linear in the state, the first moment is closed: this
// ODE is exact for the Markov chain under any open-loop control, not an
// approximation.
Eigen::MatrixXd mean_dynamics_matrix(const QueueNetwork& net,
                                     const Eigen::VectorXd& u);

struct MeanTrajectory {
    std::vector<double> times;         // ascending, 0..t_end
    std::vector<Eigen::VectorXd> mean;

    Eigen::VectorXd mean_at(double t) const;  // linear interpolation
};

// Fixed-step RK4 on each constant-control segment between policy switches.
// Segment steps are kept even so Simpson quadrature can reuse the grid.
// dt <= 0 selects 1e-3 * t_end.
MeanTrajectory integrate_mean(const QueueNetwork& net, const BangBangPolicy& policy,
                              const Eigen::VectorXd& x0, double t_end, double dt = 0.0);

// Expected cost of the open-loop policy from mean state x0: Simpson
// quadrature of the stage cost rate along the mean trajectory plus the
// terminal cost. Exact modulo quadrature error (cost is linear in state).
double expected_cost(const QueueNetwork& net, const BangBangPolicy& policy,
                     const CostSpec& costs, const Eigen::VectorXd& x0,
                     double dt = 0.0);

}  // namespace qnetopt
