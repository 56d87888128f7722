#include <benchmark/benchmark.h>

#include "qnetopt/costate.hpp"
#include "qnetopt/costs.hpp"
#include "qnetopt/mdp_oracle.hpp"
#include "qnetopt/meanode.hpp"
#include "qnetopt/network.hpp"
#include "qnetopt/policy.hpp"
#include "qnetopt/rng.hpp"
#include "qnetopt/ssa.hpp"

using namespace qnetopt;

namespace {

QueueNetwork two_queue_network() {
    NetworkDescription desc;
    desc.queues = {{"X1", 1.0}, {"X2", 1.0}};
    desc.routes = {{0, 1}};
    desc.u_max = 1.0;
    return build_network(desc);
}

CostSpec two_queue_costs() {
    CostSpec costs;
    costs.state_cost = Eigen::Vector2d(2.5, 1.0);
    costs.control_cost = Eigen::VectorXd::Constant(1, 1.0);
    costs.terminal_cost = Eigen::Vector2d::Zero();
    costs.horizon = 10.0;
    return costs;
}

void bm_costate_solve(benchmark::State& state) {
    const QueueNetwork net = two_queue_network();
    const CostSpec costs = two_queue_costs();
    for (auto _ : state) {
        const CostateTrajectory traj = solve_costate_fh(net, costs);
        benchmark::DoNotOptimize(traj.coeffs.front());
    }
}
BENCHMARK(bm_costate_solve)->Unit(benchmark::kMillisecond);

void bm_ssa_path(benchmark::State& state) {
    const QueueNetwork net = two_queue_network();
    const CostSpec costs = two_queue_costs();
    const CostateTrajectory traj = solve_costate_fh(net, costs);
    const BangBangPolicy policy = extract_policy(traj, costs, net);
    const State x0 = (State(2) << 50, 0).finished();
    std::uint64_t trial = 0;
    for (auto _ : state) {
        SsaTrajectory path = simulate(net, policy, x0, costs.horizon,
                                      derive_stream_seed(17, trial++));
        benchmark::DoNotOptimize(accumulate_cost(path, net, costs, policy));
    }
}
BENCHMARK(bm_ssa_path)->Unit(benchmark::kMicrosecond);

void bm_mean_ode(benchmark::State& state) {
    const QueueNetwork net = two_queue_network();
    const CostSpec costs = two_queue_costs();
    const CostateTrajectory traj = solve_costate_fh(net, costs);
    const BangBangPolicy policy = extract_policy(traj, costs, net);
    const Eigen::Vector2d x0(50.0, 0.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(expected_cost(net, policy, costs, x0));
}
BENCHMARK(bm_mean_ode)->Unit(benchmark::kMillisecond);

void bm_generator_build(benchmark::State& state) {
    const QueueNetwork net = two_queue_network();
    const StateSpace space(net.n, static_cast<int>(state.range(0)));
    const Eigen::VectorXd u = Eigen::VectorXd::Constant(1, 1.0);
    for (auto _ : state) {
        const SparseGenerator gen = build_generator(net, space, u);
        benchmark::DoNotOptimize(gen.rows.size());
    }
}
BENCHMARK(bm_generator_build)->Arg(6)->Arg(20)->Arg(60)->Unit(benchmark::kMicrosecond);

void bm_vi_finite_horizon(benchmark::State& state) {
    const QueueNetwork net = two_queue_network();
    const CostSpec costs = two_queue_costs();
    const int cap = static_cast<int>(state.range(0));
    for (auto _ : state) {
        const auto result = vi_finite_horizon(net, costs, cap, costs.horizon, 10000);
        benchmark::DoNotOptimize(result.values.back());
    }
}
BENCHMARK(bm_vi_finite_horizon)->Arg(6)->Arg(12)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
