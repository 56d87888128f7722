#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qnetopt/costs.hpp"
#include "qnetopt/network.hpp"
#include "qnetopt/policy.hpp"

namespace qnetopt {

struct SsaEvent {
    double time = 0.0;
    int event_index = -1;  // combined ordering: exits first, then routes
    State post_state;
};

struct SsaTrajectory {
    State x0;
    double t_end = 0.0;
    std::vector<SsaEvent> events;  // strictly increasing times in (0, t_end]
    std::optional<double> accumulated_cost;
};

// Exact event-driven simulation under a piecewise-constant policy. Waiting
// times are re-drawn at policy switch times (memorylessness makes that
// exact); once the network empties the remaining interval has no events.
// Requires t_end <= policy.horizon for finite-horizon policies.
SsaTrajectory simulate(const QueueNetwork& net, const BangBangPolicy& policy,
                       const State& x0, double t_end, std::uint64_t seed);

// Pathwise cost: integral of the stage cost rate (piecewise constant between
// events and policy switches) plus the terminal cost at t_end. Requires
// t_end == costs.horizon == policy.horizon (finite-horizon policies).
// Stores the result on the trajectory and returns it.
double accumulate_cost(SsaTrajectory& traj, const QueueNetwork& net,
                       const CostSpec& costs, const BangBangPolicy& policy);

struct CostEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::int64_t trials = 0;
    double ci95_low = 0.0;
    double ci95_high = 0.0;
};

// Monte-Carlo estimate of the expected pathwise cost over costs.horizon.
// Trial i uses the stream seed derive_stream_seed(master_seed, i), so the
// estimate is reproducible and independent of evaluation order. Sums are
// pairwise-reduced for deterministic rounding. Requires trials >= 2.
CostEstimate estimate_cost(const QueueNetwork& net, const BangBangPolicy& policy,
                           const CostSpec& costs, const State& x0,
                           std::int64_t trials, std::uint64_t master_seed);

}  // namespace qnetopt
