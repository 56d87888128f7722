#include "qnetopt/meanode.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qnetopt/errors.hpp"

namespace qnetopt {

Eigen::MatrixXd mean_dynamics_matrix(const QueueNetwork& net, const Eigen::VectorXd& u) {
    if (u.size() != net.route_count()) throw ConfigError("control length mismatch");
    for (int k = 0; k < u.size(); ++k)
        if (!std::isfinite(u[k]) || u[k] < 0.0 || u[k] > net.u_max)
            throw ConfigError("control entry " + std::to_string(k) + " outside [0, u_max]");
    Eigen::MatrixXd A = Eigen::MatrixXd((-net.queue_exit_rate).asDiagonal());
    for (int k = 0; k < net.route_count(); ++k) {
        A(net.route_source[k], net.route_source[k]) -= u[k];
        A(net.route_dest[k], net.route_source[k]) += u[k];
    }
    return A;
}

Eigen::VectorXd MeanTrajectory::mean_at(double t) const {
    if (times.empty()) throw ConfigError("empty mean trajectory");
    const double t_end = times.back();
    const double slack = 1e-9 * std::max(t_end, 1.0);
    if (!(t >= -slack) || !(t <= t_end + slack))
        throw ConfigError("time " + std::to_string(t) + " outside the integrated range");
    t = std::min(std::max(t, 0.0), t_end);
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return mean.front();
    if (it == times.end()) return mean.back();
    const std::size_t hi = static_cast<std::size_t>(it - times.begin());
    const std::size_t lo = hi - 1;
    const double span = times[hi] - times[lo];
    if (span <= 0.0) return mean[lo];
    const double w = (t - times[lo]) / span;
    return (1.0 - w) * mean[lo] + w * mean[hi];
}

namespace {

struct MeanRun {
    MeanTrajectory traj;
    double cost = 0.0;  // running-cost integral plus terminal (when requested)
};

// Shared integration for the trajectory and the cost quadrature: RK4 with an
// even number of steps per constant-control segment, Simpson on the same grid.
MeanRun integrate(const QueueNetwork& net, const BangBangPolicy& policy,
                  const CostSpec* costs, const Eigen::VectorXd& x0, double t_end,
                  double dt) {
    if (policy.control_count() != net.route_count())
        throw ConfigError("policy has " + std::to_string(policy.control_count()) +
                          " controls, network has " + std::to_string(net.route_count()));
    if (x0.size() != net.n) throw ConfigError("x0 length mismatch");
    if (!x0.allFinite()) throw ConfigError("x0 has non-finite entries");
    if (x0.size() > 0 && x0.minCoeff() < 0.0)
        throw ConfigError("x0 entries must be >= 0");
    if (!(t_end > 0.0) || !std::isfinite(t_end))
        throw ConfigError("t_end must be finite and strictly positive");
    if (policy.horizon && t_end > *policy.horizon * (1.0 + 1e-12))
        throw ConfigError("t_end exceeds the policy horizon");
    const double h_target = dt > 0.0 ? dt : 1e-3 * t_end;

    std::vector<double> seg_ends;
    for (double s : policy.merged_switch_times())
        if (s > 0.0 && s < t_end) seg_ends.push_back(s);
    seg_ends.push_back(t_end);

    MeanRun run;
    run.traj.times.push_back(0.0);
    run.traj.mean.push_back(x0);
    double seg_start = 0.0;
    for (double seg_end : seg_ends) {
        const double len = seg_end - seg_start;
        int m = std::max(2, static_cast<int>(std::ceil(len / h_target - 1e-9)));
        if (m % 2 != 0) ++m;
        const double h = len / m;
        const Eigen::VectorXd u = policy.evaluate(seg_start);
        const Eigen::MatrixXd A = mean_dynamics_matrix(net, u);

        double simpson = 0.0;
        Eigen::VectorXd mu = run.traj.mean.back();
        if (costs) simpson += stage_cost_rate(net, *costs, mu, u);
        for (int j = 1; j <= m; ++j) {
            Eigen::VectorXd k1 = A * mu;
            Eigen::VectorXd k2 = A * (mu + (0.5 * h) * k1);
            Eigen::VectorXd k3 = A * (mu + (0.5 * h) * k2);
            Eigen::VectorXd k4 = A * (mu + h * k3);
            mu += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (!mu.allFinite())
                throw SolveError("mean integration produced non-finite values at t = " +
                                 std::to_string(seg_start + h * j) + "; reduce dt");
            run.traj.times.push_back(j == m ? seg_end : seg_start + h * j);
            run.traj.mean.push_back(mu);
            if (costs) {
                const double f = stage_cost_rate(net, *costs, mu, u);
                simpson += (j == m) ? f : (j % 2 == 1 ? 4.0 : 2.0) * f;
            }
        }
        run.cost += simpson * h / 3.0;
        seg_start = seg_end;
    }
    return run;
}

}  // namespace

MeanTrajectory integrate_mean(const QueueNetwork& net, const BangBangPolicy& policy,
                              const Eigen::VectorXd& x0, double t_end, double dt) {
    return integrate(net, policy, nullptr, x0, t_end, dt).traj;
}

double expected_cost(const QueueNetwork& net, const BangBangPolicy& policy,
                     const CostSpec& costs, const Eigen::VectorXd& x0, double dt) {
    validate_costs(costs, net, /*require_horizon=*/true);
    if (policy.horizon &&
        std::abs(*policy.horizon - costs.horizon) > 1e-9 * std::max(costs.horizon, 1.0))
        throw ConfigError("policy horizon differs from the cost horizon");
    MeanRun run = integrate(net, policy, &costs, x0, costs.horizon, dt);
    return run.cost + costs.terminal_cost.dot(run.traj.mean.back());
}

}  // namespace qnetopt
