#include <doctest.h>

#include <sstream>

#include "qnetopt/errors.hpp"
#include "qnetopt/serialization.hpp"
#include "test_support.hpp"

using namespace qnetopt;
namespace qt = qnetopt::testing;

namespace {

nlohmann::json two_queue_json() {
    return nlohmann::json::parse(R"({
        "queues": [ {"name": "X1", "exit_rate": 1.0}, {"name": "X2", "exit_rate": 1.0} ],
        "routes": [ {"from": "X1", "to": "X2"} ],
        "u_max": 1.0
    })");
}

}  // namespace

TEST_SUITE("serialization") {

TEST_CASE("network parses from the documented schema") {
    const QueueNetwork net = network_from_json(two_queue_json());
    CHECK(net.n == 2);
    CHECK(net.route_count() == 1);
    CHECK(net.route_source[0] == 0);
    CHECK(net.route_dest[0] == 1);
    CHECK(net.u_max == 1.0);

    const nlohmann::json round = network_to_json(net);
    const QueueNetwork again = network_from_json(round);
    CHECK(again.names == net.names);
    CHECK(again.route_source == net.route_source);
    CHECK(again.queue_exit_rate == net.queue_exit_rate);
}

TEST_CASE("network schema errors name the offending entry") {
    nlohmann::json j = two_queue_json();
    j["routes"][0]["to"] = "X9";
    CHECK_THROWS_WITH_AS(network_from_json(j), doctest::Contains("X9"), ConfigError);

    j = two_queue_json();
    j.erase("u_max");
    CHECK_THROWS_AS(network_from_json(j), ConfigError);

    j = two_queue_json();
    j["queues"][1]["name"] = "X1";
    CHECK_THROWS_AS(network_from_json(j), ConfigError);

    j = two_queue_json();
    j["queues"] = nlohmann::json::array();
    CHECK_THROWS_AS(network_from_json(j), ConfigError);
}

TEST_CASE("queues without exit_rate get no exit event") {
    nlohmann::json j = two_queue_json();
    j["queues"][0].erase("exit_rate");
    const QueueNetwork net = network_from_json(j);
    CHECK(net.exit_count() == 1);
    CHECK(net.exit_queue[0] == 1);
}

TEST_CASE("routes may reference queues by index") {
    nlohmann::json j = two_queue_json();
    j["routes"][0] = {{"from", 0}, {"to", 1}};
    const QueueNetwork net = network_from_json(j);
    CHECK(net.route_source[0] == 0);
    CHECK(net.route_dest[0] == 1);
}

TEST_CASE("costs parse with short keys, long keys, and scalar broadcast") {
    const QueueNetwork net = network_from_json(two_queue_json());
    const nlohmann::json shorthand = {{"q", {2.5, 1.0}}, {"v", 1.0}, {"c", 0.0}, {"T", 10.0}};
    const CostSpec a = costs_from_json(shorthand, net, true);
    CHECK(a.state_cost[0] == 2.5);
    CHECK(a.control_cost[0] == 1.0);
    CHECK(a.terminal_cost[1] == 0.0);
    CHECK(a.horizon == 10.0);

    const nlohmann::json longhand = {{"state_cost", {2.5, 1.0}},
                                     {"control_cost", {1.0}},
                                     {"terminal_cost", {0.0, 0.0}},
                                     {"horizon", 10.0}};
    const CostSpec b = costs_from_json(longhand, net, true);
    CHECK(b.state_cost == a.state_cost);
    CHECK(b.horizon == a.horizon);

    const nlohmann::json missing_T = {{"q", {2.5, 1.0}}, {"v", 1.0}};
    CHECK_THROWS_AS(costs_from_json(missing_T, net, true), ConfigError);
    CHECK_NOTHROW(costs_from_json(missing_T, net, false));

    const nlohmann::json bad_len = {{"q", {2.5, 1.0, 3.0}}, {"v", 1.0}, {"T", 10.0}};
    CHECK_THROWS_AS(costs_from_json(bad_len, net, true), ConfigError);
}

TEST_CASE("policy JSON round trips switch times exactly") {
    BangBangPolicy policy;
    policy.u_max = 1.0;
    policy.horizon = 10.0;
    policy.controls = {{1.0, {8.901387711331890, 9.5}}};
    const nlohmann::json j = policy_to_json(policy);
    const BangBangPolicy back = policy_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.u_max == policy.u_max);
    CHECK(*back.horizon == *policy.horizon);
    REQUIRE(back.controls[0].switch_times.size() == 2);
    CHECK(back.controls[0].switch_times[0] == 8.901387711331890);
    CHECK(back.controls[0].switch_times[1] == 9.5);

    policy.horizon.reset();
    policy.controls = {{1.0, {}}};
    const nlohmann::json ih = policy_to_json(policy);
    CHECK(ih.at("horizon").is_null());
    CHECK(!policy_from_json(ih).horizon.has_value());
}

TEST_CASE("policy JSON validates on load") {
    nlohmann::json j = {{"u_max", 1.0},
                        {"horizon", 10.0},
                        {"controls", {{{"initial", 0.25}, {"switches", {1.0}}}}}};
    CHECK_THROWS_AS(policy_from_json(j), ConfigError);
    j["controls"][0]["initial"] = 1.0;
    j["controls"][0]["switches"] = {5.0, 2.0};
    CHECK_THROWS_AS(policy_from_json(j), ConfigError);
}

TEST_CASE("trajectory CSV starts with the initial row") {
    SsaTrajectory traj;
    traj.x0 = State(2);
    traj.x0 << 2, 0;
    traj.t_end = 1.0;
    SsaEvent ev;
    ev.time = 0.25;
    ev.event_index = 2;
    ev.post_state = State(2);
    ev.post_state << 1, 1;
    traj.events.push_back(ev);
    const std::string csv = trajectory_to_csv(traj);
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "time,event,x_1,x_2");
    std::getline(lines, line);
    CHECK(line == "0,-1,2,0");
    std::getline(lines, line);
    CHECK(line == "0.25,2,1,1");
    CHECK(!std::getline(lines, line));
}

TEST_CASE("mean CSV lists one row per sample") {
    MeanTrajectory traj;
    traj.times = {0.0, 0.5};
    traj.mean = {Eigen::Vector2d(2.0, 0.0), Eigen::Vector2d(1.5, 0.25)};
    const std::string csv = mean_to_csv(traj);
    CHECK(csv == "time,mu_1,mu_2\n0,2,0\n0.5,1.5,0.25\n");
}

TEST_CASE("value table CSV prints states, values, and endpoint controls") {
    const StateSpace space(2, 1);
    const std::vector<double> values = {0.0, 1.0, 2.25};
    const std::vector<std::uint32_t> controls = {0, 0, 1};
    const std::string csv = value_table_to_csv(space, values, controls, 1.0, 1);
    CHECK(csv == "x_1,x_2,value,u_1\n0,0,0,0\n0,1,1,0\n1,0,2.25,1\n");
    CHECK_THROWS_AS(value_table_to_csv(space, {0.0}, controls, 1.0, 1), ConfigError);
}

TEST_CASE("estimates serialize with their confidence interval") {
    CostEstimate estimate;
    estimate.mean = 2.0;
    estimate.std_error = 0.5;
    estimate.trials = 100;
    estimate.ci95_low = 1.02;
    estimate.ci95_high = 2.98;
    const nlohmann::json j = estimate_to_json(estimate);
    CHECK(j.at("mean") == 2.0);
    CHECK(j.at("trials") == 100);
    CHECK(j.at("ci95")[0] == 1.02);
}

TEST_CASE("file helpers raise ConfigError with the path") {
    CHECK_THROWS_WITH_AS(load_json_file("/nonexistent/nowhere.json"),
                         doctest::Contains("nowhere.json"), ConfigError);
    const auto dir = qt::fresh_dir("serialization");
    const std::string path = (dir / "x.json").string();
    write_json_file(path, nlohmann::json{{"a", 1}});
    CHECK(load_json_file(path).at("a") == 1);
    const std::string bad = (dir / "bad.json").string();
    write_text_file(bad, "{ not json");
    CHECK_THROWS_AS(load_json_file(bad), ConfigError);
}

}  // TEST_SUITE
