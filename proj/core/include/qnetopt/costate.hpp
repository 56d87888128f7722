#pragma once

#include <vector>

#include <Eigen/Dense>

#include "qnetopt/costs.hpp"
#include "qnetopt/network.hpp"

namespace qnetopt {

// Switching value of each routing control: s_k = y[dest_k] - y[source_k] + v_k.
// Control k is at u_max exactly where s_k < 0; s_k = 0 counts as off.
Eigen::VectorXd switching_values(const QueueNetwork& net, const CostSpec& costs,
                                 const Eigen::VectorXd& y);

// Right-hand side of the value-coefficient equation in backward time
// tau = horizon - t. Integrating dy/dtau = costate_rhs(y) forward from
// y = terminal_cost produces the backward solution.
Eigen::VectorXd costate_rhs(const QueueNetwork& net, const CostSpec& costs,
                            const Eigen::VectorXd& y);

// Time-gridded solution of the backward equation, stored forward in t.
// coeffs[i] are the value coefficients at times[i]: the optimal cost-to-go
// from state x at time t is coeff_at(t).dot(x).
struct CostateTrajectory {
    double horizon = 0.0;
    std::vector<double> times;                      // ascending, times[0]=0, back()=horizon
    std::vector<Eigen::VectorXd> coeffs;            // one per grid time
    std::vector<std::vector<double>> switch_times;  // per control, ascending, in (0,horizon)

    // Linear interpolation between grid samples; exact at grid times.
    Eigen::VectorXd coeff_at(double t) const;
};

struct CostateSolveOptions {
    double dt = 0.0;          // grid step; <=0 selects 1e-3 * horizon
    double switch_tol = 0.0;  // switch-time refinement; <=0 selects 1e-8 * horizon
};

// Fixed-step RK4 in backward time with switch-time refinement: detected
// control switches are bisected to switch_tol and inserted as grid nodes,
// then the pass repeats until the switch set is stable, so no integration
// step straddles a kink of the right-hand side.
CostateTrajectory solve_costate_fh(const QueueNetwork& net, const CostSpec& costs,
                                   const CostateSolveOptions& options = {});

struct StationaryCostate {
    Eigen::VectorXd coeffs;
    std::vector<int> active_set;  // controls held at u_max, ascending
    bool degenerate = false;      // more than one consistent active set
};

// Stationary coefficients by enumeration of candidate active sets in order of
// increasing size, then lexicographic. Requires every queue to drain
// (validate_reachability), else ConfigError; throws SolveError when no
// candidate is consistent.
StationaryCostate solve_costate_ih(const QueueNetwork& net, const CostSpec& costs);

// Optimal cost-to-go from state x (given as reals so mean states work too).
double value_at(const CostateTrajectory& traj, const Eigen::VectorXd& x, double t);
double value_at(const StationaryCostate& sol, const Eigen::VectorXd& x);

// Max-norm residual of the backward equation over interior grid points,
// using central differences of the stored samples. Stencils straddling a
// switch time are skipped (the stored derivative jumps there).
double max_ode_residual(const QueueNetwork& net, const CostSpec& costs,
                        const CostateTrajectory& traj);

}  // namespace qnetopt
