#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qnetopt/costate.hpp"
#include "qnetopt/errors.hpp"
#include "qnetopt/mdp_oracle.hpp"
#include "qnetopt/meanode.hpp"
#include "qnetopt/network.hpp"
#include "qnetopt/policy.hpp"
#include "qnetopt/rng.hpp"
#include "qnetopt/serialization.hpp"
#include "qnetopt/ssa.hpp"
#include "qnetopt/validation.hpp"

namespace {

using namespace qnetopt;
namespace fs = std::filesystem;

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

State parse_x0(const std::string& text, int n) {
    std::vector<int> entries;
    std::stringstream stream(text);
    std::string part;
    while (std::getline(stream, part, ',')) {
        try {
            std::size_t used = 0;
            const int value = std::stoi(part, &used);
            while (used < part.size() && std::isspace(static_cast<unsigned char>(part[used])))
                ++used;
            if (used != part.size()) throw std::invalid_argument(part);
            entries.push_back(value);
        } catch (const std::exception&) {
            throw ConfigError("cannot parse x0 entry \"" + part + "\"");
        }
    }
    if (static_cast<int>(entries.size()) != n)
        throw ConfigError("x0 needs " + std::to_string(n) + " entries, got " +
                          std::to_string(entries.size()));
    State x0(n);
    for (int i = 0; i < n; ++i) {
        if (entries[i] < 0) throw ConfigError("x0 entries must be >= 0");
        x0[i] = entries[i];
    }
    return x0;
}

std::uint64_t default_seed() {
    if (const char* env = std::getenv("QNETOPT_SEED"))
        return std::strtoull(env, nullptr, 10);
    return 0;
}

std::string out_path(const std::string& out_dir, const std::string& name) {
    fs::create_directories(out_dir);
    return (fs::path(out_dir) / name).string();
}

void warn_if_undrained(const QueueNetwork& net) {
    const auto reach = validate_reachability(net);
    if (reach.ok) return;
    std::cerr << "warning: no exit path from:";
    for (int q : reach.unreachable_queues) std::cerr << " \"" << net.names[q] << "\"";
    std::cerr << "; the infinite-horizon cost diverges\n";
}

struct SolveArgs {
    std::string network, costs, x0_text;
    std::string out_dir = ".";
    double dt = 0.0;
    double switch_tol = 0.0;
};

int run_solve_fh(const SolveArgs& args) {
    const QueueNetwork net = network_from_json(load_json_file(args.network));
    const CostSpec costs = costs_from_json(load_json_file(args.costs), net, true);
    const State x0 = parse_x0(args.x0_text, net.n);
    warn_if_undrained(net);

    CostateSolveOptions options;
    options.dt = args.dt;
    options.switch_tol = args.switch_tol;
    const CostateTrajectory traj = solve_costate_fh(net, costs, options);
    const BangBangPolicy policy = extract_policy(traj, costs, net);

    write_json_file(out_path(args.out_dir, "costate.json"), costate_to_json(traj));
    write_json_file(out_path(args.out_dir, "policy.json"), policy_to_json(policy));
    std::cout << "value= " << fmt(value_at(traj, x0.cast<double>(), 0.0)) << "\n";
    return 0;
}

int run_solve_ih(const SolveArgs& args) {
    const QueueNetwork net = network_from_json(load_json_file(args.network));
    const CostSpec costs = costs_from_json(load_json_file(args.costs), net, false);
    const State x0 = parse_x0(args.x0_text, net.n);

    const StationaryCostate sol = solve_costate_ih(net, costs);
    if (sol.degenerate)
        std::cerr << "warning: more than one consistent active set; keeping the "
                     "smallest\n";
    const BangBangPolicy policy = extract_policy(sol, net);

    write_json_file(out_path(args.out_dir, "costate.json"),
                    costate_to_json(sol, net.route_count()));
    write_json_file(out_path(args.out_dir, "policy.json"), policy_to_json(policy));
    std::cout << "active_set=";
    if (sol.active_set.empty()) std::cout << " (empty)";
    for (std::size_t i = 0; i < sol.active_set.size(); ++i)
        std::cout << (i == 0 ? " " : ",") << sol.active_set[i];
    std::cout << "\n";
    std::cout << "value= " << fmt(value_at(sol, x0.cast<double>())) << "\n";
    return 0;
}

struct SimulateArgs {
    std::string network, costs, policy, x0_text;
    std::string out_dir = ".";
    std::string format = "json";
    std::int64_t trials = 1000;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

int run_simulate(const SimulateArgs& args) {
    const QueueNetwork net = network_from_json(load_json_file(args.network));
    const CostSpec costs = costs_from_json(load_json_file(args.costs), net, true);
    const BangBangPolicy policy = policy_from_json(load_json_file(args.policy));
    const State x0 = parse_x0(args.x0_text, net.n);
    const std::uint64_t seed = args.seed_given ? args.seed : default_seed();
    if (args.trials < 1) throw ConfigError("--trials must be >= 1");

    SsaTrajectory first = simulate(net, policy, x0, costs.horizon,
                                   derive_stream_seed(seed, 0));
    accumulate_cost(first, net, costs, policy);
    write_text_file(out_path(args.out_dir, "trajectory.csv"), trajectory_to_csv(first));

    CostEstimate estimate;
    if (args.trials >= 2) {
        estimate = estimate_cost(net, policy, costs, x0, args.trials, seed);
    } else {
        estimate.mean = *first.accumulated_cost;
        estimate.trials = 1;
        estimate.ci95_low = estimate.ci95_high = estimate.mean;
    }
    if (args.format == "csv") {
        std::ostringstream csv;
        csv << "mean,std_error,trials,ci95_low,ci95_high\n"
            << fmt(estimate.mean) << ',' << fmt(estimate.std_error) << ','
            << estimate.trials << ',' << fmt(estimate.ci95_low) << ','
            << fmt(estimate.ci95_high) << "\n";
        write_text_file(out_path(args.out_dir, "estimate.csv"), csv.str());
    } else {
        write_json_file(out_path(args.out_dir, "estimate.json"),
                        estimate_to_json(estimate));
    }
    std::cout << "mean= " << fmt(estimate.mean) << "\n";
    std::cout << "std_error= " << fmt(estimate.std_error) << "\n";
    return 0;
}

struct ValidateArgs {
    std::string network, costs, x0_text;
    std::string out_dir = ".";
    std::string format = "json";
    std::string mode = "all";
    int oracle_n = 6;
    std::int64_t state_cap = 200000;
    int vi_steps = 10000;
    double ih_tol = 1e-9;
    std::int64_t trials = 2000;
    std::uint64_t seed = 0;
    bool seed_given = false;
    double dt = 0.0;
    int hjb_samples = 100;
    double perturb_y = 0.0;
};

int run_validate(const ValidateArgs& args) {
    const QueueNetwork net = network_from_json(load_json_file(args.network));
    const CostSpec costs = costs_from_json(load_json_file(args.costs), net, true);

    ValidationOptions options;
    if (args.mode == "vi") options.mode = ValidationMode::vi;
    else if (args.mode == "mean-ode") options.mode = ValidationMode::mean_ode;
    else if (args.mode == "hjb") options.mode = ValidationMode::hjb;
    else if (args.mode == "all") options.mode = ValidationMode::all;
    else throw ConfigError("--mode must be one of vi, mean-ode, hjb, all");
    options.x0 = parse_x0(args.x0_text, net.n);
    options.total_cap = args.oracle_n;
    options.max_states = args.state_cap;
    options.vi_steps = args.vi_steps;
    options.ih_tol = args.ih_tol;
    options.trials = args.trials;
    options.seed = args.seed_given ? args.seed : default_seed();
    options.dt = args.dt;
    options.hjb_samples = args.hjb_samples;
    options.perturb_y = args.perturb_y;

    const ValidationReport report = run_validation(net, costs, options);
    if (args.format == "csv") {
        std::ostringstream csv;
        csv << "name,passed,deviation,tolerance,detail\n";
        for (const auto& check : report.checks)
            csv << check.name << ',' << (check.passed ? 1 : 0) << ','
                << fmt(check.deviation) << ',' << fmt(check.tolerance) << ",\""
                << check.detail << "\"\n";
        write_text_file(out_path(args.out_dir, "report.csv"), csv.str());
    } else {
        write_json_file(out_path(args.out_dir, "report.json"), report_to_json(report));
    }
    for (const auto& check : report.checks)
        std::cout << (check.passed ? "[PASS] " : "[FAIL] ") << check.name
                  << " deviation=" << fmt(check.deviation)
                  << " tolerance=" << fmt(check.tolerance) << "\n";
    return report.all_passed() ? 0 : 1;
}

struct EmitPlotArgs {
    std::string policy, costate, trajectory;
    std::string network, costs, x0_text;
    std::string out_dir = ".";
    int grid_max = 20;
};

void emit_policy_steps(const BangBangPolicy& policy, double t_end,
                       const std::string& path) {
    std::ostringstream out;
    out << "time";
    for (int k = 0; k < policy.control_count(); ++k) out << ",u_" << (k + 1);
    out << "\n";
    auto row = [&](double t, const Eigen::VectorXd& u) {
        out << fmt(t);
        for (int k = 0; k < u.size(); ++k) out << ',' << fmt(u[k]);
        out << "\n";
    };
    row(0.0, policy.evaluate(0.0));
    for (double s : policy.merged_switch_times()) {
        if (s <= 0.0 || s >= t_end) continue;
        Eigen::VectorXd before = policy.evaluate(s);
        for (int k = 0; k < policy.control_count(); ++k) {
            const auto& sw = policy.controls[k].switch_times;
            // undo this switch to get the left limit
            if (std::find(sw.begin(), sw.end(), s) != sw.end())
                before[k] = policy.u_max - before[k];
        }
        row(s, before);
        row(s, policy.evaluate(s));
    }
    row(t_end, policy.evaluate(t_end));
    write_text_file(path, out.str());
}

int run_emit_plot(const EmitPlotArgs& args) {
    bool emitted = false;

    std::optional<BangBangPolicy> policy;
    if (!args.policy.empty())
        policy = policy_from_json(load_json_file(args.policy));

    std::optional<QueueNetwork> net;
    if (!args.network.empty()) net = network_from_json(load_json_file(args.network));

    if (policy) {
        double t_end = 0.0;
        if (policy->horizon) {
            t_end = *policy->horizon;
        } else if (!args.costs.empty() && net) {
            t_end = costs_from_json(load_json_file(args.costs), *net, true).horizon;
        } else {
            throw ConfigError("constant policy needs --network and --costs to pick "
                              "a plot horizon");
        }
        emit_policy_steps(*policy, t_end, out_path(args.out_dir, "policy_steps.csv"));
        emitted = true;
    }

    if (!args.costate.empty()) {
        const nlohmann::json j = load_json_file(args.costate);
        Eigen::VectorXd coeffs;
        if (j.value("kind", "") == "infinite_horizon") {
            const auto& c = j.at("coeffs");
            coeffs.resize(static_cast<int>(c.size()));
            for (int i = 0; i < coeffs.size(); ++i) coeffs[i] = c[i].get<double>();
        } else if (j.value("kind", "") == "finite_horizon") {
            const auto& c = j.at("coeffs").front();  // coefficients at t = 0
            coeffs.resize(static_cast<int>(c.size()));
            for (int i = 0; i < coeffs.size(); ++i) coeffs[i] = c[i].get<double>();
        } else {
            throw ConfigError("costate artifact has unknown \"kind\"");
        }
        const int n = static_cast<int>(coeffs.size());
        if (n > 3)
            throw ConfigError("value grid supports up to 3 queues, got " +
                              std::to_string(n));
        std::ostringstream out;
        for (int i = 0; i < n; ++i) out << "x_" << (i + 1) << ',';
        out << "value\n";
        State x = State::Zero(n);
        const int g = args.grid_max;
        auto emit = [&](auto&& self, int pos) -> void {
            if (pos == n) {
                for (int i = 0; i < n; ++i) out << x[i] << ',';
                out << fmt(coeffs.dot(x.cast<double>().eval())) << "\n";
                return;
            }
            for (int v = 0; v <= g; ++v) {
                x[pos] = v;
                self(self, pos + 1);
            }
        };
        emit(emit, 0);
        write_text_file(out_path(args.out_dir, "value_grid.csv"), out.str());
        emitted = true;
    }

    if (!args.trajectory.empty()) {
        std::ifstream in(args.trajectory);
        if (!in) throw ConfigError("cannot open \"" + args.trajectory + "\"");
        std::string header;
        std::getline(in, header);
        std::ostringstream out;
        // steps: duplicate each event time with the pre and post states
        std::string prev_state_part;
        std::string line;
        std::vector<std::string> rows;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto first_comma = line.find(',');
            const auto second_comma = line.find(',', first_comma + 1);
            const std::string time_part = line.substr(0, first_comma);
            const std::string state_part = line.substr(second_comma + 1);
            if (prev_state_part.empty()) {
                rows.push_back(time_part + ',' + state_part);
            } else {
                rows.push_back(time_part + ',' + prev_state_part);
                rows.push_back(time_part + ',' + state_part);
            }
            prev_state_part = state_part;
        }
        std::string cols = header.substr(header.find(',', header.find(',') + 1) + 1);
        out << "time," << cols << "\n";
        if (rows.size() > 1)  // events beyond the initial row
            for (const auto& r : rows) out << r << "\n";
        write_text_file(out_path(args.out_dir, "states_steps.csv"), out.str());
        emitted = true;
    }

    if (net && policy && !args.x0_text.empty()) {
        const State x0 = parse_x0(args.x0_text, net->n);
        double t_end = 0.0;
        if (policy->horizon) t_end = *policy->horizon;
        else if (!args.costs.empty())
            t_end = costs_from_json(load_json_file(args.costs), *net, true).horizon;
        else throw ConfigError("mean trajectory needs a horizon (--costs)");
        const MeanTrajectory mean = integrate_mean(*net, *policy, x0.cast<double>(),
                                                   t_end);
        write_text_file(out_path(args.out_dir, "mean.csv"), mean_to_csv(mean));
        emitted = true;
    }

    if (!emitted)
        throw ConfigError("nothing to emit; pass --policy, --costate, --trajectory, "
                          "or --network/--policy/--x0");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimal routing for networks of infinite-server queues"};
    app.require_subcommand(1);

    SolveArgs solve_args;
    auto* fh = app.add_subcommand("solve-fh", "Solve the finite-horizon problem");
    fh->add_option("--network", solve_args.network, "Network JSON file")->required();
    fh->add_option("--costs", solve_args.costs, "Costs JSON file")->required();
    fh->add_option("--x0", solve_args.x0_text, "Initial state, comma-separated")
        ->required();
    fh->add_option("--dt", solve_args.dt, "Integrator step (default horizon/1000)");
    fh->add_option("--switch-tol", solve_args.switch_tol,
                   "Switch-time refinement tolerance");
    fh->add_option("--out-dir", solve_args.out_dir, "Output directory");

    auto* ih = app.add_subcommand("solve-ih", "Solve the infinite-horizon problem");
    ih->add_option("--network", solve_args.network, "Network JSON file")->required();
    ih->add_option("--costs", solve_args.costs, "Costs JSON file")->required();
    ih->add_option("--x0", solve_args.x0_text, "Initial state, comma-separated")
        ->required();
    ih->add_option("--out-dir", solve_args.out_dir, "Output directory");

    SimulateArgs sim_args;
    auto* sim = app.add_subcommand("simulate", "Simulate a saved policy");
    sim->add_option("--network", sim_args.network, "Network JSON file")->required();
    sim->add_option("--costs", sim_args.costs, "Costs JSON file")->required();
    sim->add_option("--policy", sim_args.policy, "Policy JSON file")->required();
    sim->add_option("--x0", sim_args.x0_text, "Initial state, comma-separated")
        ->required();
    sim->add_option("--trials", sim_args.trials, "Monte-Carlo trials");
    auto* sim_seed = sim->add_option("--seed", sim_args.seed,
                                     "Master seed (default $QNETOPT_SEED or 0)");
    sim->add_option("--out-dir", sim_args.out_dir, "Output directory");
    sim->add_option("--format", sim_args.format, "Estimate format: json or csv")
        ->check(CLI::IsMember({"json", "csv"}));

    ValidateArgs val_args;
    auto* val = app.add_subcommand("validate", "Cross-check the solver against oracles");
    val->add_option("--network", val_args.network, "Network JSON file")->required();
    val->add_option("--costs", val_args.costs, "Costs JSON file")->required();
    val->add_option("--x0", val_args.x0_text, "Initial state, comma-separated")
        ->required();
    val->add_option("--mode", val_args.mode, "vi, mean-ode, hjb, or all");
    val->add_option("--oracle-n", val_args.oracle_n, "Population cap for the oracle");
    val->add_option("--state-cap", val_args.state_cap, "Max truncated-chain states");
    val->add_option("--vi-steps", val_args.vi_steps, "Backward-recursion steps");
    val->add_option("--ih-tol", val_args.ih_tol, "Value-iteration tolerance");
    val->add_option("--trials", val_args.trials, "Monte-Carlo trials");
    auto* val_seed = val->add_option("--seed", val_args.seed,
                                     "Master seed (default $QNETOPT_SEED or 0)");
    val->add_option("--dt", val_args.dt, "Integrator step");
    val->add_option("--hjb-samples", val_args.hjb_samples, "Residual sample count");
    val->add_option("--perturb-y", val_args.perturb_y,
                    "Shift value coefficients (negative control)");
    val->add_option("--out-dir", val_args.out_dir, "Output directory");
    val->add_option("--format", val_args.format, "Report format: json or csv")
        ->check(CLI::IsMember({"json", "csv"}));

    EmitPlotArgs plot_args;
    auto* plot = app.add_subcommand("emit-plot", "Emit plot-ready CSV data");
    plot->add_option("--policy", plot_args.policy, "Policy JSON artifact");
    plot->add_option("--costate", plot_args.costate, "Costate JSON artifact");
    plot->add_option("--trajectory", plot_args.trajectory, "Trajectory CSV artifact");
    plot->add_option("--network", plot_args.network, "Network JSON file");
    plot->add_option("--costs", plot_args.costs, "Costs JSON file");
    plot->add_option("--x0", plot_args.x0_text, "Initial state for the mean trajectory");
    plot->add_option("--grid-max", plot_args.grid_max, "Value-grid per-queue max");
    plot->add_option("--out-dir", plot_args.out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (fh->parsed()) return run_solve_fh(solve_args);
        if (ih->parsed()) return run_solve_ih(solve_args);
        if (sim->parsed()) {
            sim_args.seed_given = sim_seed->count() > 0;
            return run_simulate(sim_args);
        }
        if (val->parsed()) {
            val_args.seed_given = val_seed->count() > 0;
            return run_validate(val_args);
        }
        if (plot->parsed()) return run_emit_plot(plot_args);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const SolveError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
