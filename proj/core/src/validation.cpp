#include "qnetopt/validation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "qnetopt/costate.hpp"
#include "qnetopt/errors.hpp"
#include "qnetopt/mdp_oracle.hpp"
#include "qnetopt/meanode.hpp"
#include "qnetopt/policy.hpp"
#include "qnetopt/rng.hpp"
#include "qnetopt/ssa.hpp"

namespace qnetopt {

bool ValidationReport::all_passed() const {
    for (const auto& check : checks)
        if (!check.passed) return false;
    return true;
}

namespace {

ValidationCheck make_check(std::string name, double deviation, double tolerance,
                           std::string detail) {
    ValidationCheck check;
    check.name = std::move(name);
    check.deviation = deviation;
    check.tolerance = tolerance;
    check.passed = deviation <= tolerance;
    check.detail = std::move(detail);
    return check;
}

// max over states of |got - expected| / per-state scale; both tables indexed
// by the same space
double table_relative_deviation(const StateSpace& space, const std::vector<double>& got,
                                const Eigen::VectorXd& coeffs) {
    double max_exact = 0.0;
    for (int idx = 0; idx < space.size(); ++idx)
        max_exact = std::max(max_exact,
                             std::abs(coeffs.dot(space.state(idx).cast<double>())));
    double dev = 0.0;
    for (int idx = 0; idx < space.size(); ++idx) {
        const double exact = coeffs.dot(space.state(idx).cast<double>());
        const double denom = std::max(std::abs(exact), 1e-9 * (1.0 + max_exact));
        dev = std::max(dev, std::abs(got[static_cast<std::size_t>(idx)] - exact) / denom);
    }
    return dev;
}

// violations of "argmin bit k agrees across all states with units in the
// source queue" for one per-state control table
int state_dependence_violations(const QueueNetwork& net, const StateSpace& space,
                                const std::vector<std::uint32_t>& controls) {
    int violations = 0;
    for (int k = 0; k < net.route_count(); ++k) {
        const int src = net.route_source[k];
        int seen = -1;
        for (int idx = 0; idx < space.size(); ++idx) {
            if (space.state(idx)[src] <= 0) continue;
            const int bit = (controls[static_cast<std::size_t>(idx)] >> k) & 1u;
            if (seen < 0)
                seen = bit;
            else if (bit != seen)
                ++violations;
        }
    }
    return violations;
}

State clip_into_cap(const State& x0, int cap) {
    State x = x0;
    int total = x.sum();
    while (total > cap) {
        int arg = 0;
        for (int i = 1; i < x.size(); ++i)
            if (x[i] > x[arg]) arg = i;
        --x[arg];
        --total;
    }
    return x;
}

}  // namespace

ValidationReport run_validation(const QueueNetwork& net, const CostSpec& costs,
                                const ValidationOptions& options) {
    validate_costs(costs, net, /*require_horizon=*/true);
    if (options.x0.size() != net.n) throw ConfigError("x0 length mismatch");
    if (net.n > 0 && options.x0.minCoeff() < 0)
        throw ConfigError("x0 entries must be >= 0");
    state_space_size(net.n, options.total_cap, options.max_states);

    const bool do_vi = options.mode == ValidationMode::vi ||
                       options.mode == ValidationMode::all;
    const bool do_mean = options.mode == ValidationMode::mean_ode ||
                         options.mode == ValidationMode::all;
    const bool do_hjb = options.mode == ValidationMode::hjb ||
                        options.mode == ValidationMode::all;

    CostateSolveOptions solve_options;
    solve_options.dt = options.dt;
    const CostateTrajectory traj = solve_costate_fh(net, costs, solve_options);
    const BangBangPolicy policy = extract_policy(traj, costs, net);
    const Eigen::VectorXd x0d = options.x0.cast<double>();
    const double linear_value = value_at(traj, x0d, 0.0);

    ValidationReport report;

    if (do_vi) {
        const StateSpace space(net.n, options.total_cap);
        const auto fh = vi_finite_horizon(net, costs, options.total_cap, costs.horizon,
                                          options.vi_steps, /*record_per_step=*/true);
        report.checks.push_back(make_check(
            "fh_vi_linear_match",
            table_relative_deviation(space, fh.values, traj.coeff_at(0.0)), 0.01,
            "backward recursion over " + std::to_string(space.size()) +
                " states vs linear value at t=0"));

        int violations = 0;
        for (const auto& step_controls : fh.per_step)
            violations += state_dependence_violations(net, space, step_controls);
        report.checks.push_back(make_check(
            "fh_vi_controls_state_independent", static_cast<double>(violations), 0.0,
            "per-step argmin differs across occupied-source states this many times"));

        const auto ih = vi_infinite_horizon(net, costs, options.total_cap,
                                            options.ih_tol);
        const StationaryCostate stationary = solve_costate_ih(net, costs);
        report.checks.push_back(make_check(
            "ih_vi_linear_match",
            table_relative_deviation(space, ih.values, stationary.coeffs), 0.01,
            "uniformized value iteration (" + std::to_string(ih.iterations) +
                " sweeps) vs stationary coefficients"));

        int ih_mismatches = 0;
        for (int k = 0; k < net.route_count(); ++k) {
            const int src = net.route_source[k];
            const bool active = std::binary_search(stationary.active_set.begin(),
                                                   stationary.active_set.end(), k);
            for (int idx = 0; idx < space.size(); ++idx) {
                if (space.state(idx)[src] <= 0) continue;
                const bool bit = (ih.controls[static_cast<std::size_t>(idx)] >> k) & 1u;
                if (bit != active) ++ih_mismatches;
            }
        }
        report.checks.push_back(make_check(
            "ih_vi_controls_match_active_set", static_cast<double>(ih_mismatches), 0.0,
            "per-state argmin vs stationary active set over occupied-source states"));
    }

    if (do_mean) {
        const double ode_cost = expected_cost(net, policy, costs, x0d, options.dt);
        const double denom = std::max(std::abs(linear_value), 1e-9);
        report.checks.push_back(make_check(
            "meanode_matches_costate_value",
            std::abs(ode_cost - linear_value) / denom, 1e-6,
            "first-moment quadrature vs linear value at x0"));

        // cost is linear in the start state, so splitting x0 must be exact
        Eigen::VectorXd half = Eigen::VectorXd::Zero(net.n);
        if (net.n > 0) half[0] = x0d[0];
        const Eigen::VectorXd rest = x0d - half;
        const double split_cost = expected_cost(net, policy, costs, half, options.dt) +
                                  expected_cost(net, policy, costs, rest, options.dt);
        report.checks.push_back(make_check(
            "meanode_superposition",
            std::abs(split_cost - ode_cost) / std::max(std::abs(ode_cost), 1.0), 1e-10,
            "expected cost of x0 vs sum over a split of x0"));

        const StateSpace space(net.n, options.total_cap);
        const State x0_capped = clip_into_cap(options.x0, options.total_cap);
        Eigen::VectorXd p0 = Eigen::VectorXd::Zero(space.size());
        p0[space.index_of(x0_capped)] = 1.0;
        const Eigen::VectorXd p_end = forward_kolmogorov(net, space, policy, p0,
                                                         costs.horizon, options.dt);
        const Eigen::VectorXd chain_mean = distribution_mean(space, p_end);
        const MeanTrajectory mean_traj = integrate_mean(net, policy,
                                                        x0_capped.cast<double>(),
                                                        costs.horizon, options.dt);
        const Eigen::VectorXd ode_mean = mean_traj.mean.back();
        const double mean_scale = std::max(1.0, ode_mean.cwiseAbs().maxCoeff());
        report.checks.push_back(make_check(
            "kolmogorov_matches_meanode",
            (chain_mean - ode_mean).cwiseAbs().maxCoeff() / mean_scale, 1e-6,
            "forward-equation mean vs first-moment mean at the horizon (capped x0)"));

        const CostEstimate estimate = estimate_cost(net, policy, costs, options.x0,
                                                    options.trials, options.seed);
        report.checks.push_back(make_check(
            "mc_mean_within_3se", std::abs(estimate.mean - ode_cost),
            3.0 * estimate.std_error + 1e-12,
            "Monte-Carlo mean over " + std::to_string(options.trials) +
                " trials vs first-moment cost"));
    }

    if (do_hjb) {
        CostateTrajectory probe = traj;
        if (options.perturb_y != 0.0)
            for (auto& y : probe.coeffs)
                y.array() += options.perturb_y;
        std::uint64_t stream = derive_stream_seed(options.seed, 0x76616c6964ULL);
        const int per_queue = std::max(1, 20 / std::max(1, net.n));
        std::vector<State> xs;
        std::vector<double> ts;
        xs.reserve(static_cast<std::size_t>(options.hjb_samples));
        ts.reserve(static_cast<std::size_t>(options.hjb_samples));
        for (int s = 0; s < options.hjb_samples; ++s) {
            State x(net.n);
            for (int i = 0; i < net.n; ++i)
                x[i] = static_cast<int>(splitmix64(stream) %
                                        static_cast<std::uint64_t>(per_queue + 1));
            xs.push_back(std::move(x));
            ts.push_back(costs.horizon * (static_cast<double>(splitmix64(stream) >> 11) *
                                          0x1.0p-53));
        }
        const HjbResidualStats stats = hjb_residual(net, costs, probe, xs, ts);
        report.checks.push_back(make_check(
            "hjb_residual_scaled", stats.max_scaled, 1e-6,
            "dynamic-programming residual over " + std::to_string(options.hjb_samples) +
                " sampled (state, time) pairs" +
                (options.perturb_y != 0.0 ? " with perturbed coefficients" : "")));
    }

    return report;
}

nlohmann::json report_to_json(const ValidationReport& report) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& check : report.checks)
        checks.push_back({{"name", check.name},
                          {"passed", check.passed},
                          {"deviation", check.deviation},
                          {"tolerance", check.tolerance},
                          {"detail", check.detail}});
    return nlohmann::json{{"checks", std::move(checks)},
                          {"all_passed", report.all_passed()}};
}

}  // namespace qnetopt
