#include "qnetopt/ssa.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qnetopt/errors.hpp"
#include "qnetopt/rng.hpp"

namespace qnetopt {

namespace {

void check_policy_pairing(const QueueNetwork& net, const BangBangPolicy& policy) {
    if (policy.control_count() != net.route_count())
        throw ConfigError("policy has " + std::to_string(policy.control_count()) +
                          " controls, network has " + std::to_string(net.route_count()));
    if (policy.u_max != net.u_max)
        throw ConfigError("policy u_max differs from the network's");
}

int pick_event(const Eigen::VectorXd& rates, double total, std::mt19937_64& engine) {
    const double r = uniform_open01(engine) * total;
    double cum = 0.0;
    int last_positive = -1;
    for (int k = 0; k < rates.size(); ++k) {
        if (rates[k] <= 0.0) continue;
        last_positive = k;
        cum += rates[k];
        if (r <= cum) return k;
    }
    return last_positive;  // guards round-off fall-through
}

}  // namespace

SsaTrajectory simulate(const QueueNetwork& net, const BangBangPolicy& policy,
                       const State& x0, double t_end, std::uint64_t seed) {
    check_policy_pairing(net, policy);
    if (!(t_end > 0.0) || !std::isfinite(t_end))
        throw ConfigError("t_end must be finite and strictly positive");
    if (policy.horizon && t_end > *policy.horizon * (1.0 + 1e-12))
        throw ConfigError("t_end exceeds the policy horizon");
    if (x0.size() != net.n) throw ConfigError("x0 length mismatch");
    for (int i = 0; i < net.n; ++i)
        if (x0[i] < 0) throw ConfigError("x0 entry " + std::to_string(i) + " is negative");

    // control-refresh boundaries: every switch strictly inside, then t_end
    std::vector<double> boundaries;
    for (double s : policy.merged_switch_times())
        if (s < t_end) boundaries.push_back(s);
    boundaries.push_back(t_end);

    SsaTrajectory traj;
    traj.x0 = x0;
    traj.t_end = t_end;

    std::mt19937_64 engine(seed);
    State x = x0;
    double t = 0.0;
    std::size_t bi = 0;
    Eigen::VectorXd u = policy.evaluate(0.0);
    while (x.sum() > 0) {
        Eigen::VectorXd rates = event_rates(net, x, u);
        const double total = rates.sum();
        const double boundary = boundaries[bi];
        double next = total > 0.0 ? t + exponential_draw(engine, total) : boundary;
        if (next >= boundary) {
            // no event before the boundary: move there and re-draw (memoryless)
            t = boundary;
            if (bi + 1 >= boundaries.size()) break;  // reached t_end
            ++bi;
            u = policy.evaluate(t);
            continue;
        }
        t = next;
        const int ev = pick_event(rates, total, engine);
        x += net.event_change(ev);
        traj.events.push_back({t, ev, x});
    }
    return traj;
}

double accumulate_cost(SsaTrajectory& traj, const QueueNetwork& net,
                       const CostSpec& costs, const BangBangPolicy& policy) {
    check_policy_pairing(net, policy);
    validate_costs(costs, net, /*require_horizon=*/true);
    const double T = costs.horizon;
    if (std::abs(traj.t_end - T) > 1e-9 * std::max(T, 1.0))
        throw ConfigError("trajectory t_end differs from the cost horizon");
    if (policy.horizon && std::abs(*policy.horizon - T) > 1e-9 * std::max(T, 1.0))
        throw ConfigError("policy horizon differs from the cost horizon");

    // sweep points where either the state or the control changes
    std::vector<double> points;
    points.reserve(traj.events.size() + 8);
    for (const SsaEvent& e : traj.events) points.push_back(e.time);
    for (double s : policy.merged_switch_times())
        if (s < T) points.push_back(s);
    points.push_back(T);
    std::sort(points.begin(), points.end());

    double cost = 0.0;
    Eigen::VectorXd x = traj.x0.cast<double>();
    double t_prev = 0.0;
    std::size_t ei = 0;
    for (double tp : points) {
        if (tp > t_prev) {
            Eigen::VectorXd u = policy.evaluate(t_prev);  // constant on [t_prev, tp)
            cost += stage_cost_rate(net, costs, x, u) * (tp - t_prev);
            t_prev = tp;
        }
        while (ei < traj.events.size() && traj.events[ei].time <= tp) {
            x = traj.events[ei].post_state.cast<double>();
            ++ei;
        }
    }
    cost += costs.terminal_cost.dot(x);
    traj.accumulated_cost = cost;
    return cost;
}

namespace {

double pairwise_sum(const double* data, std::size_t count) {
    if (count <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < count; ++i) s += data[i];
        return s;
    }
    const std::size_t half = count / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, count - half);
}

}  // namespace

CostEstimate estimate_cost(const QueueNetwork& net, const BangBangPolicy& policy,
                           const CostSpec& costs, const State& x0,
                           std::int64_t trials, std::uint64_t master_seed) {
    if (trials < 2) throw ConfigError("estimate_cost needs at least 2 trials");
    validate_costs(costs, net, /*require_horizon=*/true);
    std::vector<double> samples(static_cast<std::size_t>(trials));
    for (std::int64_t i = 0; i < trials; ++i) {
        SsaTrajectory traj = simulate(net, policy, x0, costs.horizon,
                                      derive_stream_seed(master_seed, static_cast<std::uint64_t>(i)));
        samples[static_cast<std::size_t>(i)] = accumulate_cost(traj, net, costs, policy);
    }
    const double mean = pairwise_sum(samples.data(), samples.size()) / static_cast<double>(trials);
    std::vector<double> sq(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double d = samples[i] - mean;
        sq[i] = d * d;
    }
    const double var = pairwise_sum(sq.data(), sq.size()) / static_cast<double>(trials - 1);
    CostEstimate est;
    est.mean = mean;
    est.std_error = std::sqrt(var / static_cast<double>(trials));
    est.trials = trials;
    est.ci95_low = mean - 1.96 * est.std_error;
    est.ci95_high = mean + 1.96 * est.std_error;
    return est;
}

}  // namespace qnetopt
