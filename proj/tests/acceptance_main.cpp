// Acceptance gate. Each criterion prints one [PASS]/[FAIL] line with its
// wall time; the process exits nonzero if any criterion fails or overruns
// its budget. Tolerances are pinned here on purpose.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnetopt/costate.hpp"
#include "qnetopt/costs.hpp"
#include "qnetopt/mdp_oracle.hpp"
#include "qnetopt/meanode.hpp"
#include "qnetopt/network.hpp"
#include "qnetopt/policy.hpp"
#include "qnetopt/rng.hpp"
#include "qnetopt/ssa.hpp"

#include "test_support.hpp"

using namespace qnetopt;
namespace qt = qnetopt::testing;

namespace {

constexpr double kSwitchTimeTol = 1e-3;    // |switch - (10 - ln 3)|
constexpr double kValueRelTol = 0.01;      // VI table vs linear value
constexpr double kIhCoeffTol = 1e-10;      // stationary coefficients, abs
constexpr double kOdeRelTol = 1e-6;        // mean-ODE cost vs linear value
constexpr double kHjbScaledTol = 1e-6;     // scale-relative HJB residual
constexpr double kReplayTol = 1e-10;       // SSA cost vs independent replay
constexpr double kForkRelTol = 0.015;      // three-queue VI agreement

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
    if (!ok) throw Failure(what);
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// worst relative deviation of a VI table from the linear value y.x
double table_deviation(const StateSpace& space, const std::vector<double>& table,
                       const Eigen::VectorXd& y) {
    double max_exact = 0.0;
    for (int i = 0; i < space.size(); ++i)
        max_exact = std::max(max_exact, std::abs(y.dot(space.state(i).cast<double>())));
    const double floor = 1e-9 * (1.0 + max_exact);
    double worst = 0.0;
    for (int i = 0; i < space.size(); ++i) {
        const double exact = y.dot(space.state(i).cast<double>());
        const double denom = std::max(std::abs(exact), floor);
        worst = std::max(worst, std::abs(table[i] - exact) / denom);
    }
    return worst;
}

std::string configs_dir() { return QNETOPT_CONFIG_DIR; }

// ---- C1 / C2: two-queue example through the CLI ----

void criterion_fh_low_cost() {
    const auto out = qt::fresh_dir("acc_c1");
    const auto result = qt::run_cli("solve-fh --network " + configs_dir() +
                                    "/two_queue_network.json --costs " + configs_dir() +
                                    "/two_queue_costs_low.json --x0 50,0 --out-dir " +
                                    out.string());
    require(result.exit_code == 0, "solver exit code " + std::to_string(result.exit_code));
    const auto policy = nlohmann::json::parse(qt::slurp(out / "policy.json"));
    const auto& control = policy.at("controls").at(0);
    require(control.at("switches").size() == 1,
            "expected exactly one switch, got " +
                std::to_string(control.at("switches").size()));
    require(control.at("initial").get<double>() == 1.0, "control must start on");
    const double sw = control.at("switches").at(0).get<double>();
    const double expected = 10.0 - std::log(3.0);
    require(std::abs(sw - expected) <= kSwitchTimeTol,
            "switch at " + num(sw) + ", expected " + num(expected));
}

void criterion_fh_high_cost() {
    const auto out = qt::fresh_dir("acc_c2");
    const auto result = qt::run_cli("solve-fh --network " + configs_dir() +
                                    "/two_queue_network.json --costs " + configs_dir() +
                                    "/two_queue_costs_high.json --x0 50,0 --out-dir " +
                                    out.string());
    require(result.exit_code == 0, "solver exit code " + std::to_string(result.exit_code));
    const auto policy = nlohmann::json::parse(qt::slurp(out / "policy.json"));
    const auto& control = policy.at("controls").at(0);
    require(control.at("switches").empty(), "policy must never switch");
    require(control.at("initial").get<double>() == 0.0, "policy must be identically zero");
}

// ---- C3: finite-horizon VI table matches the linear value ----

void criterion_fh_linearity() {
    const QueueNetwork net = qt::two_queue_network();
    const CostSpec costs = qt::two_queue_costs(1.0);
    const CostateTrajectory traj = solve_costate_fh(net, costs);
    const StateSpace space(net.n, 6);
    require(space.size() == 28, "state space size " + std::to_string(space.size()));
    const auto vi = vi_finite_horizon(net, costs, 6, costs.horizon, 10000);
    const double worst = table_deviation(space, vi.values, traj.coeffs.front());
    require(worst <= kValueRelTol, "worst relative deviation " + num(worst));
}

// ---- C4: argmin controls carry no state feedback ----

void criterion_no_state_feedback() {
    const QueueNetwork net = qt::two_queue_network();
    const CostSpec costs = qt::two_queue_costs(1.0);
    const StateSpace space(net.n, 6);
    const auto fh = vi_finite_horizon(net, costs, 6, costs.horizon, 10000, true);
    for (std::size_t step = 0; step < fh.per_step.size(); ++step) {
        for (int k = 0; k < net.route_count(); ++k) {
            int seen = -1;
            for (int i = 0; i < space.size(); ++i) {
                if (space.state(i)[net.route_source[k]] <= 0) continue;
                const int bit = (fh.per_step[step][i] >> k) & 1u;
                if (seen < 0) seen = bit;
                require(bit == seen, "control depends on the state at step " +
                                         std::to_string(step));
            }
        }
    }
    const StationaryCostate stationary = solve_costate_ih(net, costs);
    const auto ih = vi_infinite_horizon(net, costs, 6, 1e-9);
    const double worst = table_deviation(space, ih.values, stationary.coeffs);
    require(worst <= kValueRelTol, "IH deviation " + num(worst));
}

// ---- C5: stationary closed form ----

void criterion_ih_closed_form() {
    const QueueNetwork net = qt::two_queue_network();
    const CostSpec costs = qt::two_queue_costs(1.0);
    const StationaryCostate sol = solve_costate_ih(net, costs);
    Eigen::Vector2d expected(2.25, 1.0);
    const double coeff_err = (sol.coeffs - expected).cwiseAbs().maxCoeff();
    require(coeff_err <= kIhCoeffTol, "coefficient error " + num(coeff_err));
    require(sol.active_set == std::vector<int>{0}, "active set must hold the route");
    require(!sol.degenerate, "active set must be unique");
    const StateSpace space(net.n, 6);
    const auto ih = vi_infinite_horizon(net, costs, 6, 1e-8);
    const double worst = table_deviation(space, ih.values, sol.coeffs);
    require(worst <= kValueRelTol, "VI deviation " + num(worst));
}

// ---- C6: Monte Carlo, mean ODE, and costate value agree ----

void criterion_triple_agreement() {
    const QueueNetwork net = qt::two_queue_network();
    const CostSpec costs = qt::two_queue_costs(1.0);
    const CostateTrajectory traj = solve_costate_fh(net, costs);
    const BangBangPolicy policy = extract_policy(traj, costs, net);
    const Eigen::Vector2d x0(50.0, 0.0);
    const double value = value_at(traj, x0, 0.0);

    const State x0i = (State(2) << 50, 0).finished();
    const CostEstimate estimate = estimate_cost(net, policy, costs, x0i, 1000, 20260818);
    const double gap = std::abs(estimate.mean - value);
    require(gap <= 3.0 * estimate.std_error,
            "MC mean " + num(estimate.mean) + " vs " + num(value) + " (3se " +
                num(3.0 * estimate.std_error) + ")");

    const double ode = expected_cost(net, policy, costs, x0);
    const double rel = std::abs(ode - value) / std::abs(value);
    require(rel <= kOdeRelTol, "mean-ODE relative deviation " + num(rel));
}

// ---- C7: HJB residual at the linear value, plus the negative control ----

void criterion_hjb_residual() {
    const QueueNetwork net = qt::two_queue_network();
    const CostSpec costs = qt::two_queue_costs(1.0);
    const CostateTrajectory traj = solve_costate_fh(net, costs);

    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> count(0, 10);  // per queue, so totals stay <= 20
    std::uniform_real_distribution<double> when(0.0, costs.horizon);
    std::vector<State> xs;
    std::vector<double> ts;
    for (int i = 0; i < 100; ++i) {
        State x(net.n);
        for (int q = 0; q < net.n; ++q) x[q] = count(rng);
        xs.push_back(x);
        ts.push_back(when(rng));
    }
    const HjbResidualStats clean = hjb_residual(net, costs, traj, xs, ts);
    require(clean.max_scaled <= kHjbScaledTol,
            "scaled residual " + num(clean.max_scaled));

    CostateTrajectory shifted = traj;
    for (auto& y : shifted.coeffs) y[0] += 0.01;
    const HjbResidualStats bad = hjb_residual(net, costs, shifted, xs, ts);
    require(bad.max_scaled > kHjbScaledTol,
            "perturbed coefficients slipped through (" + num(bad.max_scaled) + ")");
}

// ---- C8: fuzzed SSA paths keep every invariant ----

struct FuzzCase {
    QueueNetwork net;
    CostSpec costs;
    BangBangPolicy policy;
    State x0;
};

FuzzCase random_case(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> queue_count(1, 4);
    std::uniform_real_distribution<double> rate(0.3, 3.0);
    std::uniform_real_distribution<double> cost(0.0, 2.0);
    std::uniform_real_distribution<double> horizon(0.5, 2.0);
    std::uniform_int_distribution<int> start(0, 5);

    NetworkDescription desc;
    const int n = queue_count(rng);
    for (int i = 0; i < n; ++i)
        desc.queues.push_back({"Q" + std::to_string(i + 1), rate(rng)});
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) pairs.emplace_back(i, j);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    const int want = std::uniform_int_distribution<int>(
        0, std::min<int>(6, static_cast<int>(pairs.size())))(rng);
    for (int k = 0; k < want; ++k) desc.routes.push_back({pairs[k].first, pairs[k].second});
    const double u_choices[] = {0.5, 1.0, 2.0};
    desc.u_max = u_choices[std::uniform_int_distribution<int>(0, 2)(rng)];

    FuzzCase out;
    out.net = build_network(desc);
    out.costs.horizon = horizon(rng);
    out.costs.state_cost.resize(n);
    out.costs.terminal_cost.resize(n);
    for (int i = 0; i < n; ++i) {
        out.costs.state_cost[i] = cost(rng);
        out.costs.terminal_cost[i] = cost(rng);
    }
    out.costs.control_cost.resize(out.net.route_count());
    for (int k = 0; k < out.net.route_count(); ++k) out.costs.control_cost[k] = cost(rng);

    out.policy.u_max = desc.u_max;
    out.policy.horizon = out.costs.horizon;
    std::uniform_real_distribution<double> inside(1e-3 * out.costs.horizon,
                                                  (1.0 - 1e-3) * out.costs.horizon);
    for (int k = 0; k < out.net.route_count(); ++k) {
        ControlSchedule schedule;
        schedule.initial = (rng() & 1u) ? desc.u_max : 0.0;
        const int flips = std::uniform_int_distribution<int>(0, 3)(rng);
        std::vector<double> times;
        for (int f = 0; f < flips; ++f) times.push_back(inside(rng));
        std::sort(times.begin(), times.end());
        times.erase(std::unique(times.begin(), times.end()), times.end());
        schedule.switch_times = times;
        out.policy.controls.push_back(schedule);
    }
    validate_policy(out.policy);

    out.x0.resize(n);
    for (int i = 0; i < n; ++i) out.x0[i] = start(rng);
    return out;
}

// independent piecewise-constant quadrature of the stage cost
double replay_cost(const SsaTrajectory& traj, const QueueNetwork& net,
                   const CostSpec& costs, const BangBangPolicy& policy) {
    std::vector<double> cuts{0.0, traj.t_end};
    for (const auto& event : traj.events) cuts.push_back(event.time);
    for (double s : policy.merged_switch_times())
        if (s > 0.0 && s < traj.t_end) cuts.push_back(s);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    double total = 0.0;
    State x = traj.x0;
    std::size_t next_event = 0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        while (next_event < traj.events.size() &&
               traj.events[next_event].time <= cuts[i])
            x = traj.events[next_event++].post_state;
        const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
        const Eigen::VectorXd u = policy.evaluate(mid);
        double rate = costs.state_cost.dot(x.cast<double>());
        for (int k = 0; k < net.route_count(); ++k)
            rate += costs.control_cost[k] * u[k] * x[net.route_source[k]];
        total += rate * (cuts[i + 1] - cuts[i]);
    }
    while (next_event < traj.events.size()) x = traj.events[next_event++].post_state;
    total += costs.terminal_cost.dot(x.cast<double>());
    return total;
}

void criterion_ssa_fuzz() {
    std::mt19937_64 rng(99);
    const int cases = 500;
    const int paths_per_case = 20;
    for (int c = 0; c < cases; ++c) {
        const FuzzCase fuzz = random_case(rng);
        for (int p = 0; p < paths_per_case; ++p) {
            SsaTrajectory traj = simulate(fuzz.net, fuzz.policy, fuzz.x0,
                                          fuzz.costs.horizon,
                                          derive_stream_seed(1000 + c, p));
            double prev_time = 0.0;
            long prev_total = fuzz.x0.sum();
            for (const auto& event : traj.events) {
                require(event.time > prev_time, "jump times must strictly increase");
                require(event.time <= traj.t_end, "jump past the horizon");
                require(event.post_state.minCoeff() >= 0, "negative queue content");
                const long total = event.post_state.sum();
                require(total <= prev_total, "total count increased");
                prev_time = event.time;
                prev_total = total;
            }
            const double cost = accumulate_cost(traj, fuzz.net, fuzz.costs, fuzz.policy);
            const double replay = replay_cost(traj, fuzz.net, fuzz.costs, fuzz.policy);
            require(std::abs(cost - replay) <= kReplayTol * std::max(1.0, std::abs(replay)),
                    "pathwise cost " + num(cost) + " vs replay " + num(replay));
        }
    }
}

// ---- C9: three-queue fork, solver vs VI across random parameters ----

void criterion_fork_agreement() {
    std::mt19937_64 rng(2026);
    std::uniform_real_distribution<double> gamma(0.3, 3.0);
    std::uniform_real_distribution<double> vcost(0.5, 3.0);
    std::uniform_real_distribution<double> qcost(0.5, 3.0);
    const double t_end = 5.0;
    const int steps = 20000;

    for (int draw = 0; draw < 20; ++draw) {
        const QueueNetwork net = qt::fork3_network(gamma(rng), gamma(rng), gamma(rng));
        CostSpec costs;
        costs.horizon = t_end;
        costs.state_cost = Eigen::Vector3d(qcost(rng), qcost(rng), qcost(rng));
        costs.control_cost = Eigen::Vector2d(vcost(rng), vcost(rng));
        costs.terminal_cost = Eigen::Vector3d::Zero();

        const CostateTrajectory traj = solve_costate_fh(net, costs);
        const Eigen::VectorXd y0 = traj.coeffs.front();
        const StateSpace space(net.n, 4);
        const auto vi = vi_finite_horizon(net, costs, 4, t_end, steps);
        const double worst = table_deviation(space, vi.values, y0);
        require(worst <= kForkRelTol,
                "draw " + std::to_string(draw) + " deviation " + num(worst));

        for (int k = 0; k < net.route_count(); ++k) {
            const double gain = y0[net.route_dest[k]] - y0[net.route_source[k]] +
                                costs.control_cost[k];
            const int expected = gain < 0.0 ? 1 : 0;
            for (int i = 0; i < space.size(); ++i) {
                if (space.state(i)[net.route_source[k]] <= 0) continue;
                const int bit = (vi.controls[i] >> k) & 1u;
                require(bit == expected, "draw " + std::to_string(draw) +
                                             " initial control mismatch at state " +
                                             std::to_string(i));
            }
        }
    }
}

struct Criterion {
    const char* name;
    double budget_seconds;
    std::function<void()> body;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria = {
        {"C1 two-queue low control cost: one switch at 10 - ln 3", 1.0,
         criterion_fh_low_cost},
        {"C2 two-queue high control cost: policy identically zero", 1.0,
         criterion_fh_high_cost},
        {"C3 finite-horizon VI matches the linear value (28 states)", 30.0,
         criterion_fh_linearity},
        {"C4 argmin controls carry no state feedback; IH VI matches", 60.0,
         criterion_no_state_feedback},
        {"C5 stationary coefficients [2.25, 1], active route, VI agreement", 30.0,
         criterion_ih_closed_form},
        {"C6 Monte Carlo and mean ODE bracket the solved value", 60.0,
         criterion_triple_agreement},
        {"C7 HJB residual at the solution; perturbed coefficients fail", 5.0,
         criterion_hjb_residual},
        {"C8 10000 fuzzed SSA paths keep every invariant", 60.0, criterion_ssa_fuzz},
        {"C9 three-queue fork: solver vs VI over 20 parameter draws", 120.0,
         criterion_fork_agreement},
    };

    int failures = 0;
    for (const auto& criterion : criteria) {
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool passed = true;
        try {
            criterion.body();
        } catch (const std::exception& error) {
            passed = false;
            detail = error.what();
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                .count();
        if (passed && elapsed > criterion.budget_seconds) {
            passed = false;
            detail = "overran the " + num(criterion.budget_seconds) + " s budget";
        }
        std::ostringstream line;
        line << (passed ? "[PASS] " : "[FAIL] ") << criterion.name << " ("
             << num(elapsed) << " s)";
        if (!passed) line << ": " << detail;
        std::puts(line.str().c_str());
        if (!passed) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
