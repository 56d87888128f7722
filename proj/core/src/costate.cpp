#include "qnetopt/costate.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>

#include "qnetopt/errors.hpp"

namespace qnetopt {

Eigen::VectorXd switching_values(const QueueNetwork& net, const CostSpec& costs,
                                 const Eigen::VectorXd& y) {
    if (y.size() != net.n) throw ConfigError("coefficient vector length mismatch");
    Eigen::VectorXd s(net.route_count());
    for (int k = 0; k < net.route_count(); ++k)
        s[k] = y[net.route_dest[k]] - y[net.route_source[k]] + costs.control_cost[k];
    return s;
}

Eigen::VectorXd costate_rhs(const QueueNetwork& net, const CostSpec& costs,
                            const Eigen::VectorXd& y) {
    // dy/dtau = q - diag(queue exit rate) y + sum over active routes of
    // u_max * min(s_k, 0) at the source queue; active means s_k < 0.
    Eigen::VectorXd d = costs.state_cost - net.queue_exit_rate.cwiseProduct(y);
    for (int k = 0; k < net.route_count(); ++k) {
        double s = y[net.route_dest[k]] - y[net.route_source[k]] + costs.control_cost[k];
        if (s < 0.0) d[net.route_source[k]] += net.u_max * s;
    }
    return d;
}

namespace {

Eigen::VectorXd rk4_step(const QueueNetwork& net, const CostSpec& costs,
                         const Eigen::VectorXd& y, double h) {
    Eigen::VectorXd k1 = costate_rhs(net, costs, y);
    Eigen::VectorXd k2 = costate_rhs(net, costs, y + (0.5 * h) * k1);
    Eigen::VectorXd k3 = costate_rhs(net, costs, y + (0.5 * h) * k2);
    Eigen::VectorXd k4 = costate_rhs(net, costs, y + h * k3);
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct BackwardGrid {
    std::vector<double> tau;         // ascending, tau[0]=0 (terminal time), back()=T
    std::vector<Eigen::VectorXd> y;
};

std::vector<double> make_tau_nodes(double T, int steps,
                                   const std::vector<std::vector<double>>& switch_taus) {
    std::vector<double> nodes;
    nodes.reserve(static_cast<std::size_t>(steps) + 1);
    for (int j = 0; j <= steps; ++j) nodes.push_back(T * j / steps);
    const double margin = 2e-13 * T;
    for (const auto& per_control : switch_taus)
        for (double tau : per_control)
            if (tau > margin && tau < T - margin) nodes.push_back(tau);
    std::sort(nodes.begin(), nodes.end());
    std::vector<double> out;
    out.reserve(nodes.size());
    for (double tau : nodes)
        if (out.empty() || tau - out.back() > 1e-13 * T) out.push_back(tau);
    out.back() = T;
    return out;
}

BackwardGrid integrate_backward(const QueueNetwork& net, const CostSpec& costs,
                                const std::vector<double>& nodes) {
    BackwardGrid g;
    g.tau = nodes;
    g.y.resize(nodes.size());
    g.y[0] = costs.terminal_cost;
    const double T = nodes.back();
    for (std::size_t j = 0; j + 1 < nodes.size(); ++j) {
        g.y[j + 1] = rk4_step(net, costs, g.y[j], nodes[j + 1] - nodes[j]);
        if (!g.y[j + 1].allFinite())
            throw SolveError("costate integration produced non-finite values at t = " +
                             std::to_string(T - nodes[j + 1]) + "; reduce dt");
    }
    return g;
}

// Bisect the activity flip of control k inside (tau[j], tau[j+1]), stepping
// from the stored left node, until the bracket is narrower than tol.
double refine_switch(const QueueNetwork& net, const CostSpec& costs,
                     const BackwardGrid& g, std::size_t j, int k, bool on_left,
                     double tol) {
    auto active_at = [&](double tau) {
        Eigen::VectorXd y = rk4_step(net, costs, g.y[j], tau - g.tau[j]);
        double s = y[net.route_dest[k]] - y[net.route_source[k]] + costs.control_cost[k];
        return s < 0.0;
    };
    double lo = g.tau[j], hi = g.tau[j + 1];
    while (hi - lo > tol) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (active_at(mid) == on_left)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<std::vector<double>> detect_switch_taus(const QueueNetwork& net,
                                                    const CostSpec& costs,
                                                    const BackwardGrid& g, double tol) {
    const int m_u = net.route_count();
    std::vector<std::vector<double>> out(m_u);
    const double merge_gap = 4.0 * tol;
    for (int k = 0; k < m_u; ++k) {
        auto s_at = [&](std::size_t j) {
            return g.y[j][net.route_dest[k]] - g.y[j][net.route_source[k]] +
                   costs.control_cost[k];
        };
        bool prev_on = s_at(0) < 0.0;
        for (std::size_t j = 0; j + 1 < g.tau.size(); ++j) {
            bool next_on = s_at(j + 1) < 0.0;
            if (next_on != prev_on) {
                double tau = refine_switch(net, costs, g, j, k, prev_on, tol);
                if (out[k].empty() || tau - out[k].back() > merge_gap) out[k].push_back(tau);
            }
            prev_on = next_on;
        }
    }
    return out;
}

bool same_switch_sets(const std::vector<std::vector<double>>& a,
                      const std::vector<std::vector<double>>& b, double tol) {
    if (a.size() != b.size()) return false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k].size() != b[k].size()) return false;
        for (std::size_t i = 0; i < a[k].size(); ++i)
            if (std::abs(a[k][i] - b[k][i]) > tol) return false;
    }
    return true;
}

}  // namespace

CostateTrajectory solve_costate_fh(const QueueNetwork& net, const CostSpec& costs,
                                   const CostateSolveOptions& options) {
    validate_costs(costs, net, /*require_horizon=*/true);
    const double T = costs.horizon;
    const double dt = options.dt > 0.0 ? options.dt : 1e-3 * T;
    const double switch_tol = options.switch_tol > 0.0 ? options.switch_tol : 1e-8 * T;
    if (!(dt > 0.0) || !(switch_tol > 0.0))
        throw ConfigError("dt and switch_tol must be positive");
    const int steps = std::max(2, static_cast<int>(std::ceil(T / dt - 1e-9)));

    // Integrate, localize the control switches, then re-integrate with the
    // refined switch times inserted as grid nodes so no step straddles a kink
    // of the right-hand side; repeat until the switch set is stable.
    std::vector<std::vector<double>> grid_switches;  // embedded in the current grid
    BackwardGrid data = integrate_backward(net, costs, make_tau_nodes(T, steps, {}));
    bool stable = false;
    for (int pass = 0; pass < 5; ++pass) {
        auto detected = detect_switch_taus(net, costs, data, switch_tol);
        if (same_switch_sets(detected, grid_switches, 100.0 * switch_tol)) {
            stable = true;
            break;
        }
        grid_switches = std::move(detected);
        data = integrate_backward(net, costs, make_tau_nodes(T, steps, grid_switches));
    }
    if (!stable)
        throw SolveError("switch-time refinement did not stabilize; reduce dt");

    double max_abs = 0.0;
    for (const auto& y : data.y) max_abs = std::max(max_abs, y.cwiseAbs().maxCoeff());
    const double neg_tol = 1e-9 * (1.0 + max_abs);
    for (std::size_t j = 0; j < data.y.size(); ++j)
        if (data.y[j].minCoeff() < -neg_tol)
            throw SolveError("negative value coefficient at t = " +
                             std::to_string(T - data.tau[j]) +
                             "; integration is inaccurate, reduce dt");

    CostateTrajectory traj;
    traj.horizon = T;
    const std::size_t m = data.tau.size();
    traj.times.resize(m);
    traj.coeffs.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        traj.times[i] = T - data.tau[m - 1 - i];
        traj.coeffs[i] = std::move(data.y[m - 1 - i]);
    }
    traj.times.front() = 0.0;
    traj.times.back() = T;
    traj.switch_times.resize(net.route_count());
    for (int k = 0; k < net.route_count(); ++k) {
        for (auto it = grid_switches[k].rbegin(); it != grid_switches[k].rend(); ++it)
            traj.switch_times[k].push_back(T - *it);
    }
    return traj;
}

Eigen::VectorXd CostateTrajectory::coeff_at(double t) const {
    const double slack = 1e-9 * (horizon > 0.0 ? horizon : 1.0);
    if (!(t >= -slack) || !(t <= horizon + slack))
        throw ConfigError("time " + std::to_string(t) + " outside [0, horizon]");
    t = std::min(std::max(t, 0.0), horizon);
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return coeffs.front();
    if (it == times.end()) return coeffs.back();
    const std::size_t hi = static_cast<std::size_t>(it - times.begin());
    const std::size_t lo = hi - 1;
    const double span = times[hi] - times[lo];
    if (span <= 0.0) return coeffs[lo];
    const double w = (t - times[lo]) / span;
    return (1.0 - w) * coeffs[lo] + w * coeffs[hi];
}

namespace {

std::vector<std::vector<int>> active_set_candidates(int m_u) {
    // all subsets ordered by size, lexicographic within a size
    std::vector<std::vector<int>> out;
    out.push_back({});
    for (int size = 1; size <= m_u; ++size) {
        std::vector<int> pick(size);
        for (int i = 0; i < size; ++i) pick[i] = i;
        while (true) {
            out.push_back(pick);
            int i = size - 1;
            while (i >= 0 && pick[i] == m_u - size + i) --i;
            if (i < 0) break;
            ++pick[i];
            for (int j = i + 1; j < size; ++j) pick[j] = pick[j - 1] + 1;
        }
    }
    return out;
}

// Stationary coefficients for a fixed active set: rows of the transposed
// stationarity system, diag(-queue exit rate) plus u_max * e_source r_k' for
// each active k, right side -q - u_max v_k at active sources.
bool try_active_set(const QueueNetwork& net, const CostSpec& costs,
                    const std::vector<int>& set, Eigen::VectorXd& y_out) {
    Eigen::MatrixXd M = Eigen::MatrixXd((-net.queue_exit_rate).asDiagonal());
    Eigen::VectorXd b = -costs.state_cost;
    for (int k : set) {
        const int src = net.route_source[k];
        M.row(src) += net.u_max * net.route_change.col(k).cast<double>().transpose();
        b[src] -= net.u_max * costs.control_cost[k];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
    if (!lu.isInvertible()) return false;
    y_out = lu.solve(b);
    return true;
}

}  // namespace

StationaryCostate solve_costate_ih(const QueueNetwork& net, const CostSpec& costs) {
    validate_costs(costs, net, /*require_horizon=*/false);
    auto reach = validate_reachability(net);
    if (!reach.ok) {
        std::string msg = "infinite-horizon problem ill posed; no exit path from:";
        for (int q : reach.unreachable_queues) msg += " \"" + net.names[q] + "\"";
        throw ConfigError(msg);
    }
    const int m_u = net.route_count();
    if (m_u > 12)
        throw ConfigError("active-set enumeration supports at most 12 routing controls");

    StationaryCostate best;
    bool found = false;
    bool any_solvable = false;
    int consistent = 0;
    for (const auto& candidate : active_set_candidates(m_u)) {
        Eigen::VectorXd y;
        if (!try_active_set(net, costs, candidate, y)) continue;
        any_solvable = true;
        Eigen::VectorXd s = switching_values(net, costs, y);
        bool ok = true;
        std::size_t pos = 0;
        for (int k = 0; k < m_u && ok; ++k) {
            const bool in_set = pos < candidate.size() && candidate[pos] == k;
            if (in_set) ++pos;
            if (in_set ? !(s[k] < 0.0) : (s[k] < 0.0)) ok = false;
        }
        if (!ok) continue;
        ++consistent;
        if (!found) {
            best.coeffs = y;
            best.active_set = candidate;
            found = true;
        }
    }
    if (found) {
        best.degenerate = consistent > 1;
        return best;
    }

    // Fallback: run the horizon to a length where the backward solution has
    // flattened out and read the stationary coefficients off its start.
    try {
        double gamma_min = net.exit_rate.size() > 0 ? net.exit_rate.minCoeff() : 1.0;
        CostSpec long_costs = costs;
        long_costs.terminal_cost = Eigen::VectorXd::Zero(net.n);
        long_costs.horizon = 100.0 / gamma_min;
        CostateTrajectory traj = solve_costate_fh(net, long_costs, {});
        Eigen::VectorXd y = traj.coeffs.front();
        double residual = costate_rhs(net, costs, y).cwiseAbs().maxCoeff();
        if (residual <= 1e-8 * (1.0 + y.cwiseAbs().maxCoeff())) {
            Eigen::VectorXd s = switching_values(net, costs, y);
            StationaryCostate sol;
            sol.coeffs = y;
            for (int k = 0; k < m_u; ++k)
                if (s[k] < 0.0) sol.active_set.push_back(k);
            sol.degenerate = false;
            return sol;
        }
    } catch (const SolveError&) {
        // report the enumeration's diagnosis instead
    }
    if (!any_solvable)
        throw SolveError("every stationary candidate system is singular; dynamics are "
                         "non-absorbing");
    throw SolveError("no active set is consistent with its stationary solution; "
                     "model inconsistency");
}

double value_at(const CostateTrajectory& traj, const Eigen::VectorXd& x, double t) {
    if (x.size() != traj.coeffs.front().size())
        throw ConfigError("state length mismatch");
    return traj.coeff_at(t).dot(x);
}

double value_at(const StationaryCostate& sol, const Eigen::VectorXd& x) {
    if (x.size() != sol.coeffs.size()) throw ConfigError("state length mismatch");
    return sol.coeffs.dot(x);
}

double max_ode_residual(const QueueNetwork& net, const CostSpec& costs,
                        const CostateTrajectory& traj) {
    std::vector<double> switches;
    for (const auto& per_control : traj.switch_times)
        switches.insert(switches.end(), per_control.begin(), per_control.end());
    std::sort(switches.begin(), switches.end());
    const double pad = 1e-12 * std::max(traj.horizon, 1.0);

    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < traj.times.size(); ++i) {
        const double t0 = traj.times[i - 1], t2 = traj.times[i + 1];
        auto it = std::lower_bound(switches.begin(), switches.end(), t0 - pad);
        if (it != switches.end() && *it <= t2 + pad) continue;  // kink inside stencil
        const double hl = traj.times[i] - t0, hr = t2 - traj.times[i];
        // nonuniform central difference in t
        Eigen::VectorXd dy = (hl * hl * traj.coeffs[i + 1] +
                              (hr * hr - hl * hl) * traj.coeffs[i] -
                              hr * hr * traj.coeffs[i - 1]) /
                             (hl * hr * (hl + hr));
        // backward equation in t: dy/dt = -costate_rhs(y)
        double r = (dy + costate_rhs(net, costs, traj.coeffs[i])).cwiseAbs().maxCoeff();
        worst = std::max(worst, r);
    }
    return worst;
}

}  // namespace qnetopt
