#include <doctest.h>

#include <cmath>

#include "qnetopt/costate.hpp"
#include "qnetopt/errors.hpp"
#include "qnetopt/meanode.hpp"
#include "qnetopt/policy.hpp"
#include "test_support.hpp"

using namespace qnetopt;
namespace qt = qnetopt::testing;

TEST_SUITE("meanode") {

TEST_CASE("drift matrix combines exits and routing") {
    const QueueNetwork net = qt::two_queue_network();
    const Eigen::MatrixXd on = mean_dynamics_matrix(net, Eigen::VectorXd::Constant(1, 1.0));
    CHECK(on(0, 0) == doctest::Approx(-2.0));
    CHECK(on(0, 1) == doctest::Approx(0.0));
    CHECK(on(1, 0) == doctest::Approx(1.0));
    CHECK(on(1, 1) == doctest::Approx(-1.0));

    const Eigen::MatrixXd off = mean_dynamics_matrix(net, Eigen::VectorXd::Zero(1));
    CHECK(off(0, 0) == doctest::Approx(-1.0));
    CHECK(off(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("single queue decays exponentially") {
    const QueueNetwork net = qt::single_queue(2.0);
    BangBangPolicy policy;
    policy.u_max = 1.0;
    policy.horizon = 3.0;
    const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, 5.0);
    const MeanTrajectory traj = integrate_mean(net, policy, x0, 3.0);
    CHECK(traj.times.front() == 0.0);
    CHECK(traj.times.back() == 3.0);
    for (std::size_t i = 0; i < traj.times.size(); i += 123)
        CHECK(traj.mean[i][0] ==
              doctest::Approx(5.0 * std::exp(-2.0 * traj.times[i])).epsilon(1e-9));
    CHECK(traj.mean_at(1.5)[0] == doctest::Approx(5.0 * std::exp(-3.0)).epsilon(1e-8));
}

TEST_CASE("single-queue expected cost matches the closed form") {
    const QueueNetwork net = qt::single_queue(1.0);
    BangBangPolicy policy;
    policy.u_max = 1.0;
    policy.horizon = 1.0;
    CostSpec costs;
    costs.state_cost = Eigen::VectorXd::Constant(1, 2.0);
    costs.control_cost = Eigen::VectorXd::Zero(0);
    costs.terminal_cost = Eigen::VectorXd::Constant(1, 0.5);
    costs.horizon = 1.0;
    const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(1, 3.0);
    const double expected =
        (2.0 * (1.0 - std::exp(-1.0)) + 0.5 * std::exp(-1.0)) * 3.0;
    CHECK(expected_cost(net, policy, costs, x0) ==
          doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("mean cost under the solved policy equals the optimal value") {
    const QueueNetwork net = qt::two_queue_network();
    const CostSpec costs = qt::two_queue_costs(1.0);
    const CostateTrajectory traj = solve_costate_fh(net, costs);
    const BangBangPolicy policy = extract_policy(traj, costs, net);
    const Eigen::Vector2d x0(50.0, 0.0);
    const double cost = expected_cost(net, policy, costs, x0);
    CHECK(cost == doctest::Approx(value_at(traj, x0, 0.0)).epsilon(1e-7));
    CHECK(cost == doctest::Approx(112.49772977169807).epsilon(1e-7));
}

TEST_CASE("expected cost is linear in the start state") {
    const QueueNetwork net = qt::two_queue_network();
    const CostSpec costs = qt::two_queue_costs(1.0, 6.0);
    BangBangPolicy policy;
    policy.u_max = 1.0;
    policy.horizon = 6.0;
    policy.controls = {{1.0, {2.5}}};
    const double whole = expected_cost(net, policy, costs, Eigen::Vector2d(7.0, 4.0));
    const double parts = expected_cost(net, policy, costs, Eigen::Vector2d(7.0, 0.0)) +
                         expected_cost(net, policy, costs, Eigen::Vector2d(0.0, 4.0));
    CHECK(whole == doctest::Approx(parts).epsilon(1e-12));
}

TEST_CASE("refining the step does not move the quadrature") {
    const QueueNetwork net = qt::two_queue_network();
    const CostSpec costs = qt::two_queue_costs(1.0, 5.0);
    BangBangPolicy policy;
    policy.u_max = 1.0;
    policy.horizon = 5.0;
    policy.controls = {{1.0, {3.3}}};
    const Eigen::Vector2d x0(10.0, 2.0);
    const double coarse = expected_cost(net, policy, costs, x0, 0.01);
    const double fine = expected_cost(net, policy, costs, x0, 0.002);
    // fourth order quadrature: the coarse grid is already within ~1e-9 relative
    CHECK(coarse == doctest::Approx(fine).epsilon(1e-8));
}

TEST_CASE("horizon mismatch and bad starts are rejected") {
    const QueueNetwork net = qt::two_queue_network();
    CostSpec costs = qt::two_queue_costs(1.0, 4.0);
    BangBangPolicy policy;
    policy.u_max = 1.0;
    policy.horizon = 5.0;
    policy.controls = {{1.0, {}}};
    CHECK_THROWS_AS(expected_cost(net, policy, costs, Eigen::Vector2d(1.0, 0.0)),
                    ConfigError);
    policy.horizon = 4.0;
    CHECK_THROWS_AS(expected_cost(net, policy, costs, Eigen::Vector2d(-1.0, 0.0)),
                    ConfigError);
    CHECK_THROWS_AS(integrate_mean(net, policy, Eigen::Vector2d(1.0, 0.0), 0.0),
                    ConfigError);
}

}  // TEST_SUITE
