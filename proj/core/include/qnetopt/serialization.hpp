#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qnetopt/costate.hpp"
#include "qnetopt/costs.hpp"
#include "qnetopt/mdp_oracle.hpp"
#include "qnetopt/meanode.hpp"
#include "qnetopt/network.hpp"
#include "qnetopt/policy.hpp"
#include "qnetopt/ssa.hpp"

namespace qnetopt {

// JSON schemas. Network: {"queues":[{"name":..,"exit_rate":..},..],
// "routes":[{"from":..,"to":..},..],"u_max":..}; route order fixes control
// indices; exit_rate omitted or 0 means no exit. Costs: {"state_cost":[..],
// "control_cost":[..],"terminal_cost":[..],"horizon":..}. Policy:
// {"u_max":..,"horizon":..|null,"controls":[{"initial":..,"switches":[..]}]}.
// All loaders throw ConfigError naming the offending entry.

QueueNetwork network_from_json(const nlohmann::json& j);
nlohmann::json network_to_json(const QueueNetwork& net);

CostSpec costs_from_json(const nlohmann::json& j, const QueueNetwork& net,
                         bool require_horizon);

BangBangPolicy policy_from_json(const nlohmann::json& j);
nlohmann::json policy_to_json(const BangBangPolicy& policy);

nlohmann::json costate_to_json(const CostateTrajectory& traj);
nlohmann::json costate_to_json(const StationaryCostate& sol, int route_count);

nlohmann::json estimate_to_json(const CostEstimate& estimate);

// CSV writers. Floating-point fields use max-precision round-trip format.
// Event trajectory: header time,event,x_1..x_n; an initial row at time 0
// with event -1, then one row per event.
std::string trajectory_to_csv(const SsaTrajectory& traj);
// Mean trajectory: header time,mu_1..mu_n.
std::string mean_to_csv(const MeanTrajectory& traj);
// Value table: header x_1..x_n,value,u_1..u_m; one row per state in graded
// order; control columns hold the minimizing endpoint values (0 or u_max).
std::string value_table_to_csv(const StateSpace& space, const std::vector<double>& values,
                               const std::vector<std::uint32_t>& controls, double u_max,
                               int route_count);

// File helpers (ConfigError on I/O failure, with the path in the message).
nlohmann::json load_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace qnetopt
