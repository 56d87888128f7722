#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "qnetopt/costate.hpp"
#include "qnetopt/costs.hpp"
#include "qnetopt/network.hpp"
#include "qnetopt/policy.hpp"

namespace qnetopt {

// All states with total population <= total_cap, graded ordering: by total
// ascending, lexicographic within a total. The cap is valid because no event
// increases the total, so the truncated chain is exact on this set.
class StateSpace {
public:
    StateSpace(int n, int total_cap);

    int size() const { return static_cast<int>(states_.size()); }
    int queue_count() const { return n_; }
    int total_cap() const { return cap_; }
    const State& state(int index) const { return states_[index]; }
    // -1 when x is outside the space
    int index_of(const State& x) const;

private:
    int n_ = 0;
    int cap_ = 0;
    std::vector<State> states_;
    std::map<std::vector<int>, int> index_;
};

// Number of states C(total_cap + n, n); throws ConfigError above max_states.
std::int64_t state_space_size(int n, int total_cap, std::int64_t max_states);

// Sparse generator rows under a fixed control vector. Each row holds the
// off-diagonal entries (target index, rate) plus the diagonal (-total rate).
struct SparseGenerator {
    std::vector<std::vector<std::pair<int, double>>> rows;
};

SparseGenerator build_generator(const QueueNetwork& net, const StateSpace& space,
                                const Eigen::VectorXd& u);

// Endpoint control combinations 0..2^m_u-1 (bit k set = control k at u_max),
// enumerated in argmin preference order: increasing active count, then
// lexicographic. Guarded for small m_u only.
std::vector<std::uint32_t> control_combo_order(int route_count);

struct FhValueResult {
    std::vector<double> values;                         // V(x, 0) per state
    std::vector<std::uint32_t> controls;                // argmin combo at t=0
    std::vector<std::vector<std::uint32_t>> per_step;   // [step][state], optional
};

// Backward-Euler value iteration over the time grid with per-step exact
// minimization over endpoint controls. Requires dt * cap * (max exit rate +
// m_u * u_max) < 1 for stability. record_per_step keeps every step's argmin.
FhValueResult vi_finite_horizon(const QueueNetwork& net, const CostSpec& costs,
                                int total_cap, double t_end, int steps,
                                bool record_per_step = false);

struct IhValueResult {
    std::vector<double> values;
    std::vector<std::uint32_t> controls;
    int iterations = 0;
};

// Uniformized value iteration for the undiscounted infinite-horizon cost,
// run to sup-norm tolerance `tol`. Finite only when every queue drains.
IhValueResult vi_infinite_horizon(const QueueNetwork& net, const CostSpec& costs,
                                  int total_cap, double tol, int max_iterations = 200000);

// RK4 on the forward equation dp/dt = Q(u(t))' p, segmented at policy
// switches. Output is clipped at tiny negatives and renormalized; mass drift
// beyond 1e-6 raises SolveError. dt <= 0 selects 1e-3 * t_end.
Eigen::VectorXd forward_kolmogorov(const QueueNetwork& net, const StateSpace& space,
                                   const BangBangPolicy& policy,
                                   const Eigen::VectorXd& p0, double t_end,
                                   double dt = 0.0);

Eigen::VectorXd distribution_mean(const StateSpace& space, const Eigen::VectorXd& p);

struct HjbResidualStats {
    double max_abs = 0.0;     // worst residual
    double max_scaled = 0.0;  // worst residual / (stage-cost scale at the sample)
};

// Dynamic-programming residual of the linear value function carried by a
// costate trajectory, checked at the given (state, time) samples. The time
// derivative of the coefficients is estimated from the *stored* samples by
// local polynomial differentiation (stencils never straddle a switch time),
// so coefficients that do not solve the backward equation produce a nonzero
// residual even though they satisfy no identity by construction.
HjbResidualStats hjb_residual(const QueueNetwork& net, const CostSpec& costs,
                              const CostateTrajectory& traj,
                              const std::vector<State>& xs,
                              const std::vector<double>& ts);

}  // namespace qnetopt
