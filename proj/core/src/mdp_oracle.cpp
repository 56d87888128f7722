#include "qnetopt/mdp_oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "qnetopt/errors.hpp"

namespace qnetopt {

std::int64_t state_space_size(int n, int total_cap, std::int64_t max_states) {
    if (n < 1) throw ConfigError("state space needs at least one queue");
    if (total_cap < 0) throw ConfigError("population cap must be >= 0");
    unsigned __int128 size = 1;  // C(total_cap + n, n), monotone in each factor
    for (int i = 1; i <= n; ++i) {
        size = size * static_cast<unsigned __int128>(total_cap + i) /
               static_cast<unsigned __int128>(i);
        if (size > static_cast<unsigned __int128>(std::numeric_limits<std::int64_t>::max()))
            throw ConfigError("state space size overflows; reduce the population cap");
    }
    const auto states = static_cast<std::int64_t>(size);
    if (states > max_states)
        throw ConfigError("state space needs " + std::to_string(states) +
                          " states but the cap is " + std::to_string(max_states) +
                          "; reduce the population cap or raise the state cap");
    return states;
}

StateSpace::StateSpace(int n, int total_cap) : n_(n), cap_(total_cap) {
    const std::int64_t size = state_space_size(n, total_cap, 2000000);
    states_.reserve(static_cast<std::size_t>(size));
    State x = State::Zero(n);
    // graded lexicographic: total ascending, lexicographic within each total
    auto emit = [&](auto&& self, int pos, int remaining) -> void {
        if (pos == n_ - 1) {
            x[pos] = remaining;
            index_.emplace(std::vector<int>(x.data(), x.data() + n_),
                           static_cast<int>(states_.size()));
            states_.push_back(x);
            return;
        }
        for (int v = 0; v <= remaining; ++v) {
            x[pos] = v;
            self(self, pos + 1, remaining - v);
        }
    };
    for (int total = 0; total <= total_cap; ++total) emit(emit, 0, total);
}

int StateSpace::index_of(const State& x) const {
    if (x.size() != n_) return -1;
    int total = 0;
    for (int i = 0; i < n_; ++i) {
        if (x[i] < 0) return -1;
        total += x[i];
    }
    if (total > cap_) return -1;
    auto it = index_.find(std::vector<int>(x.data(), x.data() + n_));
    return it == index_.end() ? -1 : it->second;
}

SparseGenerator build_generator(const QueueNetwork& net, const StateSpace& space,
                                const Eigen::VectorXd& u) {
    if (u.size() != net.route_count()) throw ConfigError("control length mismatch");
    for (int k = 0; k < u.size(); ++k)
        if (!std::isfinite(u[k]) || u[k] < 0.0 || u[k] > net.u_max)
            throw ConfigError("control entry " + std::to_string(k) + " outside [0, u_max]");
    SparseGenerator gen;
    gen.rows.resize(static_cast<std::size_t>(space.size()));
    for (int idx = 0; idx < space.size(); ++idx) {
        const State& x = space.state(idx);
        auto& row = gen.rows[static_cast<std::size_t>(idx)];
        double total = 0.0;
        for (int k = 0; k < net.exit_count(); ++k) {
            const int q = net.exit_queue[k];
            if (x[q] <= 0) continue;
            const double rate = net.exit_rate[k] * x[q];
            const int target = space.index_of(x + net.exit_change.col(k));
            if (target < 0) throw std::logic_error("exit event left the state space");
            row.emplace_back(target, rate);
            total += rate;
        }
        for (int k = 0; k < net.route_count(); ++k) {
            const int src = net.route_source[k];
            if (u[k] <= 0.0 || x[src] <= 0) continue;
            const double rate = u[k] * x[src];
            const int target = space.index_of(x + net.route_change.col(k));
            if (target < 0) throw std::logic_error("routing event left the state space");
            row.emplace_back(target, rate);
            total += rate;
        }
        row.emplace_back(idx, -total);
    }
    return gen;
}

std::vector<std::uint32_t> control_combo_order(int route_count) {
    if (route_count < 0 || route_count > 12)
        throw ConfigError("endpoint-control enumeration supports at most 12 controls");
    std::vector<std::uint32_t> order(std::size_t{1} << route_count);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [](std::uint32_t a, std::uint32_t b) {
        const int pa = std::popcount(a), pb = std::popcount(b);
        return pa != pb ? pa < pb : a < b;
    });
    return order;
}

namespace {

Eigen::VectorXd combo_to_control(std::uint32_t combo, int m_u, double u_max) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(m_u);
    for (int k = 0; k < m_u; ++k)
        if (combo & (1u << k)) u[k] = u_max;
    return u;
}

struct ComboTables {
    std::vector<std::uint32_t> order;
    std::vector<SparseGenerator> generators;        // per combo, in order
    std::vector<std::vector<double>> stage;         // [combo position][state]
};

ComboTables build_combo_tables(const QueueNetwork& net, const CostSpec& costs,
                               const StateSpace& space) {
    ComboTables t;
    t.order = control_combo_order(net.route_count());
    if (static_cast<std::int64_t>(t.order.size()) * space.size() > 50000000)
        throw ConfigError("endpoint-control enumeration over this state space is too large");
    t.generators.reserve(t.order.size());
    t.stage.assign(t.order.size(), std::vector<double>(static_cast<std::size_t>(space.size())));
    for (std::size_t ci = 0; ci < t.order.size(); ++ci) {
        Eigen::VectorXd u = combo_to_control(t.order[ci], net.route_count(), net.u_max);
        t.generators.push_back(build_generator(net, space, u));
        for (int idx = 0; idx < space.size(); ++idx)
            t.stage[ci][static_cast<std::size_t>(idx)] =
                stage_cost_rate(net, costs, space.state(idx).cast<double>(), u);
    }
    return t;
}

double max_exit_rate(const QueueNetwork& net) {
    return net.exit_count() > 0 ? net.exit_rate.maxCoeff() : 0.0;
}

}  // namespace

FhValueResult vi_finite_horizon(const QueueNetwork& net, const CostSpec& costs,
                                int total_cap, double t_end, int steps,
                                bool record_per_step) {
    validate_costs(costs, net, /*require_horizon=*/false);
    if (!(t_end > 0.0) || !std::isfinite(t_end))
        throw ConfigError("t_end must be finite and strictly positive");
    if (steps < 1) throw ConfigError("steps must be >= 1");
    const double dt = t_end / steps;
    const double rate_bound = total_cap * (max_exit_rate(net) +
                                           net.route_count() * net.u_max);
    if (dt * rate_bound >= 1.0)
        throw ConfigError("time step " + std::to_string(dt) +
                          " violates the stability bound; increase steps");
    StateSpace space(net.n, total_cap);
    if (record_per_step &&
        static_cast<std::int64_t>(steps) * space.size() > 200000000)
        throw ConfigError("per-step control recording over this grid is too large");
    ComboTables tables = build_combo_tables(net, costs, space);

    const std::size_t count = static_cast<std::size_t>(space.size());
    std::vector<double> V(count), V_next(count);
    for (std::size_t idx = 0; idx < count; ++idx)
        V[idx] = costs.terminal_cost.dot(space.state(static_cast<int>(idx)).cast<double>());

    FhValueResult result;
    if (record_per_step) result.per_step.resize(static_cast<std::size_t>(steps));
    std::vector<std::uint32_t> argmin(count, 0);
    for (int step = steps - 1; step >= 0; --step) {
        for (std::size_t idx = 0; idx < count; ++idx) {
            double best = std::numeric_limits<double>::infinity();
            std::uint32_t best_combo = 0;
            for (std::size_t ci = 0; ci < tables.order.size(); ++ci) {
                double flow = 0.0;
                for (const auto& [j, rate] : tables.generators[ci].rows[idx])
                    flow += rate * V[static_cast<std::size_t>(j)];
                const double val = V[idx] + dt * (tables.stage[ci][idx] + flow);
                if (val < best) {  // strict: ties keep the fewer-controls combo
                    best = val;
                    best_combo = tables.order[ci];
                }
            }
            V_next[idx] = best;
            argmin[idx] = best_combo;
        }
        V.swap(V_next);
        if (record_per_step) result.per_step[static_cast<std::size_t>(step)] = argmin;
    }
    result.values = std::move(V);
    result.controls = std::move(argmin);
    return result;
}

IhValueResult vi_infinite_horizon(const QueueNetwork& net, const CostSpec& costs,
                                  int total_cap, double tol, int max_iterations) {
    validate_costs(costs, net, /*require_horizon=*/false);
    if (!(tol > 0.0)) throw ConfigError("tolerance must be strictly positive");
    auto reach = validate_reachability(net);
    if (!reach.ok) {
        std::string msg = "infinite-horizon cost is infinite; no exit path from:";
        for (int q : reach.unreachable_queues) msg += " \"" + net.names[q] + "\"";
        throw ConfigError(msg);
    }
    StateSpace space(net.n, total_cap);
    ComboTables tables = build_combo_tables(net, costs, space);
    const double uniform_rate = total_cap * (max_exit_rate(net) +
                                             net.route_count() * net.u_max) + 1.0;

    const std::size_t count = static_cast<std::size_t>(space.size());
    std::vector<double> V(count, 0.0), V_next(count);
    IhValueResult result;
    result.controls.assign(count, 0);
    bool converged = false;
    for (int iter = 1; iter <= max_iterations; ++iter) {
        double delta = 0.0;
        for (std::size_t idx = 0; idx < count; ++idx) {
            double best = std::numeric_limits<double>::infinity();
            std::uint32_t best_combo = 0;
            for (std::size_t ci = 0; ci < tables.order.size(); ++ci) {
                double flow = 0.0;
                for (const auto& [j, rate] : tables.generators[ci].rows[idx])
                    flow += rate * V[static_cast<std::size_t>(j)];
                const double val = V[idx] + (tables.stage[ci][idx] + flow) / uniform_rate;
                if (val < best) {
                    best = val;
                    best_combo = tables.order[ci];
                }
            }
            V_next[idx] = best;
            result.controls[idx] = best_combo;
            delta = std::max(delta, std::abs(best - V[idx]));
        }
        V.swap(V_next);
        result.iterations = iter;
        if (delta < tol) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw SolveError("value iteration did not converge in " +
                         std::to_string(max_iterations) +
                         " sweeps; check that every queue drains");
    result.values = std::move(V);
    return result;
}

Eigen::VectorXd forward_kolmogorov(const QueueNetwork& net, const StateSpace& space,
                                   const BangBangPolicy& policy,
                                   const Eigen::VectorXd& p0, double t_end, double dt) {
    if (policy.control_count() != net.route_count())
        throw ConfigError("policy control count mismatch");
    if (p0.size() != space.size()) throw ConfigError("p0 length mismatch");
    if (p0.minCoeff() < 0.0) throw ConfigError("p0 has negative entries");
    if (std::abs(p0.sum() - 1.0) > 1e-9) throw ConfigError("p0 must sum to 1");
    if (!(t_end > 0.0) || !std::isfinite(t_end))
        throw ConfigError("t_end must be finite and strictly positive");
    if (policy.horizon && t_end > *policy.horizon * (1.0 + 1e-12))
        throw ConfigError("t_end exceeds the policy horizon");
    const double h_target = dt > 0.0 ? dt : 1e-3 * t_end;

    std::vector<double> seg_ends;
    for (double s : policy.merged_switch_times())
        if (s > 0.0 && s < t_end) seg_ends.push_back(s);
    seg_ends.push_back(t_end);

    Eigen::VectorXd p = p0;
    double seg_start = 0.0;
    for (double seg_end : seg_ends) {
        const SparseGenerator gen = build_generator(net, space, policy.evaluate(seg_start));
        auto flow = [&](const Eigen::VectorXd& q) {
            Eigen::VectorXd dq = Eigen::VectorXd::Zero(q.size());
            for (std::size_t i = 0; i < gen.rows.size(); ++i)
                for (const auto& [j, rate] : gen.rows[i]) dq[j] += q[static_cast<int>(i)] * rate;
            return dq;
        };
        const double len = seg_end - seg_start;
        const int m = std::max(1, static_cast<int>(std::ceil(len / h_target - 1e-9)));
        const double h = len / m;
        for (int j = 0; j < m; ++j) {
            Eigen::VectorXd k1 = flow(p);
            Eigen::VectorXd k2 = flow(p + (0.5 * h) * k1);
            Eigen::VectorXd k3 = flow(p + (0.5 * h) * k2);
            Eigen::VectorXd k4 = flow(p + h * k3);
            p += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            if (!p.allFinite())
                throw SolveError("forward equation produced non-finite values; reduce dt");
        }
        seg_start = seg_end;
    }
    for (int i = 0; i < p.size(); ++i) {
        if (p[i] < -1e-12)
            throw SolveError("probability went negative (" + std::to_string(p[i]) +
                             "); reduce dt");
        if (p[i] < 0.0) p[i] = 0.0;
    }
    const double mass = p.sum();
    if (std::abs(mass - 1.0) > 1e-6)
        throw SolveError("probability mass drifted to " + std::to_string(mass) +
                         "; reduce dt");
    return p / mass;
}

Eigen::VectorXd distribution_mean(const StateSpace& space, const Eigen::VectorXd& p) {
    if (p.size() != space.size()) throw ConfigError("distribution length mismatch");
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(space.queue_count());
    for (int i = 0; i < space.size(); ++i) mu += p[i] * space.state(i).cast<double>();
    return mu;
}

namespace {

// Interpolation nodes: a window of stored grid samples inside one smooth
// segment (no switch time strictly between the window's ends).
struct Window {
    std::size_t lo = 0;
    std::size_t count = 0;
};

Window pick_window(const std::vector<double>& times, const std::vector<double>& bounds,
                   double t, double pad) {
    // segment [a, b] containing t, right-continuous at interior boundaries
    auto it = std::upper_bound(bounds.begin(), bounds.end(), t);
    if (it == bounds.end()) --it;  // t at the final boundary
    const double b = *it;
    const double a = *(it - 1);
    const auto first = std::lower_bound(times.begin(), times.end(), a - pad);
    auto last = std::upper_bound(times.begin(), times.end(), b + pad);
    const std::size_t lo_i = static_cast<std::size_t>(first - times.begin());
    const std::size_t hi_i = static_cast<std::size_t>(last - times.begin()) - 1;
    // center a 5-node window on the node nearest t
    auto near = std::lower_bound(times.begin() + static_cast<std::ptrdiff_t>(lo_i),
                                 times.begin() + static_cast<std::ptrdiff_t>(hi_i) + 1, t);
    std::size_t j = static_cast<std::size_t>(near - times.begin());
    if (j > lo_i && (j > hi_i || times[j] - t > t - times[j - 1])) --j;
    Window w;
    const std::size_t want = 5;
    const std::size_t avail = hi_i - lo_i + 1;
    w.count = std::min(want, avail);
    std::size_t start = j > lo_i + 2 ? j - 2 : lo_i;
    if (start + w.count > hi_i + 1) start = hi_i + 1 - w.count;
    w.lo = start;
    return w;
}

}  // namespace

HjbResidualStats hjb_residual(const QueueNetwork& net, const CostSpec& costs,
                              const CostateTrajectory& traj,
                              const std::vector<State>& xs,
                              const std::vector<double>& ts) {
    if (xs.size() != ts.size()) throw ConfigError("sample state/time count mismatch");
    const double T = traj.horizon;
    const double pad = 1e-12 * std::max(T, 1.0);
    std::vector<double> bounds{0.0};
    for (const auto& per_control : traj.switch_times)
        bounds.insert(bounds.end(), per_control.begin(), per_control.end());
    bounds.push_back(T);
    std::sort(bounds.begin(), bounds.end());
    bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());

    const auto combos = control_combo_order(net.route_count());
    HjbResidualStats stats;
    for (std::size_t s = 0; s < xs.size(); ++s) {
        const State& x = xs[s];
        const double t = ts[s];
        if (x.size() != net.n) throw ConfigError("sample state length mismatch");
        if (x.minCoeff() < 0) throw ConfigError("sample state has negative entries");
        if (!(t >= -pad) || !(t <= T + pad))
            throw ConfigError("sample time outside [0, horizon]");

        const Window w = pick_window(traj.times, bounds, std::min(std::max(t, 0.0), T), pad);
        // Lagrange value and derivative of the stored samples at t
        Eigen::VectorXd y = Eigen::VectorXd::Zero(net.n);
        Eigen::VectorXd ydot = Eigen::VectorXd::Zero(net.n);
        for (std::size_t jj = 0; jj < w.count; ++jj) {
            const double tj = traj.times[w.lo + jj];
            double weight = 1.0;
            double dweight = 0.0;
            for (std::size_t ii = 0; ii < w.count; ++ii) {
                if (ii == jj) continue;
                const double ti = traj.times[w.lo + ii];
                double partial = 1.0 / (tj - ti);
                for (std::size_t kk = 0; kk < w.count; ++kk) {
                    if (kk == jj || kk == ii) continue;
                    const double tk = traj.times[w.lo + kk];
                    partial *= (t - tk) / (tj - tk);
                }
                dweight += partial;
                weight *= (t - ti) / (tj - ti);
            }
            y += weight * traj.coeffs[w.lo + jj];
            ydot += dweight * traj.coeffs[w.lo + jj];
        }

        const Eigen::VectorXd xd = x.cast<double>();
        const double value_here = y.dot(xd);
        double residual = ydot.dot(xd) + costs.state_cost.dot(xd);
        for (int k = 0; k < net.exit_count(); ++k) {
            const int q = net.exit_queue[k];
            if (x[q] <= 0) continue;
            const Eigen::VectorXd z = xd + net.exit_change.col(k).cast<double>();
            residual += net.exit_rate[k] * x[q] * (y.dot(z) - value_here);
        }
        double best = std::numeric_limits<double>::infinity();
        for (std::uint32_t combo : combos) {
            double term = 0.0;
            for (int k = 0; k < net.route_count(); ++k) {
                if (!(combo & (1u << k))) continue;
                const int src = net.route_source[k];
                if (x[src] <= 0) continue;
                const Eigen::VectorXd z = xd + net.route_change.col(k).cast<double>();
                term += net.u_max * (costs.control_cost[k] * x[src] +
                                     x[src] * (y.dot(z) - value_here));
            }
            best = std::min(best, term);
        }
        residual += best;

        double scale = costs.state_cost.dot(xd);
        for (int k = 0; k < net.route_count(); ++k)
            scale += net.u_max * costs.control_cost[k] * x[net.route_source[k]];
        stats.max_abs = std::max(stats.max_abs, std::abs(residual));
        stats.max_scaled = std::max(stats.max_scaled,
                                    std::abs(residual) / std::max(scale, 1e-12));
    }
    return stats;
}

}  // namespace qnetopt
