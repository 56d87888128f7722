#include "qnetopt/serialization.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "qnetopt/errors.hpp"

namespace qnetopt {

namespace {

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
}

double require_number(const nlohmann::json& j, const std::string& what) {
    if (!j.is_number()) throw ConfigError(what + " must be a number");
    return j.get<double>();
}

const nlohmann::json* find_field(const nlohmann::json& parent, const std::string& key,
                                 const std::string& alias) {
    if (parent.contains(key)) return &parent.at(key);
    if (!alias.empty() && parent.contains(alias)) return &parent.at(alias);
    return nullptr;
}

// Accepts an array of the expected length or a scalar to broadcast.
Eigen::VectorXd vector_field(const nlohmann::json& field, const std::string& key,
                             int expected) {
    if (field.is_number())
        return Eigen::VectorXd::Constant(expected, field.get<double>());
    if (!field.is_array())
        throw ConfigError("\"" + key + "\" must be a number or an array");
    if (static_cast<int>(field.size()) != expected)
        throw ConfigError("\"" + key + "\" needs " + std::to_string(expected) +
                          " entries, got " + std::to_string(field.size()));
    Eigen::VectorXd out(expected);
    int i = 0;
    for (const auto& entry : field) {
        if (!entry.is_number())
            throw ConfigError("\"" + key + "\" entry " + std::to_string(i) +
                              " must be a number");
        out[i++] = entry.get<double>();
    }
    return out;
}

}  // namespace

QueueNetwork network_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("network file must hold a JSON object");
    const auto* queues = find_field(j, "queues", "");
    if (!queues || !queues->is_array() || queues->empty())
        throw ConfigError("network needs a non-empty \"queues\" array");

    NetworkDescription desc;
    std::map<std::string, int> by_name;
    int qi = 0;
    for (const auto& jq : *queues) {
        if (!jq.is_object())
            throw ConfigError("queue " + std::to_string(qi) + " must be an object");
        QueueSpec spec;
        spec.name = jq.value("name", "X" + std::to_string(qi + 1));
        if (jq.contains("exit_rate"))
            spec.exit_rate = require_number(jq.at("exit_rate"),
                                            "queue \"" + spec.name + "\" exit_rate");
        if (!by_name.emplace(spec.name, qi).second)
            throw ConfigError("duplicate queue name \"" + spec.name + "\"");
        desc.queues.push_back(std::move(spec));
        ++qi;
    }

    auto queue_index = [&](const nlohmann::json& ref, const std::string& what) {
        if (ref.is_string()) {
            auto it = by_name.find(ref.get<std::string>());
            if (it == by_name.end())
                throw ConfigError(what + " names unknown queue \"" +
                                  ref.get<std::string>() + "\"");
            return it->second;
        }
        if (ref.is_number_integer()) {
            const int idx = ref.get<int>();
            if (idx < 0 || idx >= qi)
                throw ConfigError(what + " index " + std::to_string(idx) +
                                  " is out of range");
            return idx;
        }
        throw ConfigError(what + " must be a queue name or index");
    };

    if (const auto* routes = find_field(j, "routes", "")) {
        if (!routes->is_array()) throw ConfigError("\"routes\" must be an array");
        int ri = 0;
        for (const auto& jr : *routes) {
            if (!jr.is_object() || !jr.contains("from") || !jr.contains("to"))
                throw ConfigError("route " + std::to_string(ri) +
                                  " needs \"from\" and \"to\"");
            RouteSpec route;
            route.source = queue_index(jr.at("from"),
                                       "route " + std::to_string(ri) + " \"from\"");
            route.dest = queue_index(jr.at("to"),
                                     "route " + std::to_string(ri) + " \"to\"");
            desc.routes.push_back(route);
            ++ri;
        }
    }

    const auto* u_max = find_field(j, "u_max", "");
    if (!u_max) throw ConfigError("network needs \"u_max\"");
    desc.u_max = require_number(*u_max, "\"u_max\"");
    return build_network(desc);
}

nlohmann::json network_to_json(const QueueNetwork& net) {
    nlohmann::json j;
    j["queues"] = nlohmann::json::array();
    for (int i = 0; i < net.n; ++i) {
        nlohmann::json jq{{"name", net.names[i]}};
        if (net.queue_exit_rate[i] > 0.0) jq["exit_rate"] = net.queue_exit_rate[i];
        j["queues"].push_back(std::move(jq));
    }
    j["routes"] = nlohmann::json::array();
    for (int k = 0; k < net.route_count(); ++k)
        j["routes"].push_back({{"from", net.names[net.route_source[k]]},
                               {"to", net.names[net.route_dest[k]]}});
    j["u_max"] = net.u_max;
    return j;
}

CostSpec costs_from_json(const nlohmann::json& j, const QueueNetwork& net,
                         bool require_horizon) {
    if (!j.is_object()) throw ConfigError("costs must be a JSON object");
    CostSpec costs;
    const auto* q = find_field(j, "q", "state_cost");
    if (!q) throw ConfigError("costs are missing \"q\" (state cost)");
    costs.state_cost = vector_field(*q, "q", net.n);

    const auto* v = find_field(j, "v", "control_cost");
    if (net.route_count() == 0) {
        costs.control_cost = Eigen::VectorXd::Zero(0);
    } else {
        if (!v) throw ConfigError("costs are missing \"v\" (control cost)");
        costs.control_cost = vector_field(*v, "v", net.route_count());
    }

    if (const auto* c = find_field(j, "c", "terminal_cost"))
        costs.terminal_cost = vector_field(*c, "c", net.n);
    else
        costs.terminal_cost = Eigen::VectorXd::Zero(net.n);

    if (const auto* T = find_field(j, "T", "horizon"); T && !T->is_null())
        costs.horizon = require_number(*T, "horizon");
    validate_costs(costs, net, require_horizon);
    return costs;
}

BangBangPolicy policy_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("policy file must hold a JSON object");
    BangBangPolicy policy;
    const auto* u_max = find_field(j, "u_max", "");
    if (!u_max) throw ConfigError("policy needs \"u_max\"");
    policy.u_max = require_number(*u_max, "policy \"u_max\"");
    if (const auto* horizon = find_field(j, "horizon", ""); horizon && !horizon->is_null())
        policy.horizon = require_number(*horizon, "policy \"horizon\"");
    const auto* controls = find_field(j, "controls", "");
    if (!controls || !controls->is_array())
        throw ConfigError("policy needs a \"controls\" array");
    int k = 0;
    for (const auto& jc : *controls) {
        if (!jc.is_object())
            throw ConfigError("control " + std::to_string(k) + " must be an object");
        ControlSchedule schedule;
        if (!jc.contains("initial"))
            throw ConfigError("control " + std::to_string(k) + " needs \"initial\"");
        schedule.initial = require_number(jc.at("initial"),
                                          "control " + std::to_string(k) + " \"initial\"");
        if (jc.contains("switches")) {
            const auto& sw = jc.at("switches");
            if (!sw.is_array())
                throw ConfigError("control " + std::to_string(k) +
                                  " \"switches\" must be an array");
            for (const auto& s : sw)
                schedule.switch_times.push_back(
                    require_number(s, "control " + std::to_string(k) + " switch"));
        }
        policy.controls.push_back(std::move(schedule));
        ++k;
    }
    validate_policy(policy);
    return policy;
}

nlohmann::json policy_to_json(const BangBangPolicy& policy) {
    nlohmann::json j;
    j["u_max"] = policy.u_max;
    j["horizon"] = policy.horizon ? nlohmann::json(*policy.horizon) : nlohmann::json();
    j["controls"] = nlohmann::json::array();
    for (const auto& schedule : policy.controls)
        j["controls"].push_back({{"initial", schedule.initial},
                                 {"switches", schedule.switch_times}});
    return j;
}

nlohmann::json costate_to_json(const CostateTrajectory& traj) {
    nlohmann::json j;
    j["kind"] = "finite_horizon";
    j["horizon"] = traj.horizon;
    j["times"] = traj.times;
    j["coeffs"] = nlohmann::json::array();
    for (const auto& y : traj.coeffs)
        j["coeffs"].push_back(std::vector<double>(y.data(), y.data() + y.size()));
    j["switch_times"] = traj.switch_times;
    return j;
}

nlohmann::json costate_to_json(const StationaryCostate& sol, int route_count) {
    nlohmann::json j;
    j["kind"] = "infinite_horizon";
    j["coeffs"] = std::vector<double>(sol.coeffs.data(),
                                      sol.coeffs.data() + sol.coeffs.size());
    j["active_set"] = sol.active_set;
    j["degenerate"] = sol.degenerate;
    j["route_count"] = route_count;
    return j;
}

nlohmann::json estimate_to_json(const CostEstimate& estimate) {
    return nlohmann::json{{"mean", estimate.mean},
                          {"std_error", estimate.std_error},
                          {"trials", estimate.trials},
                          {"ci95", {estimate.ci95_low, estimate.ci95_high}}};
}

std::string trajectory_to_csv(const SsaTrajectory& traj) {
    std::ostringstream out;
    out << "time,event";
    for (int i = 0; i < traj.x0.size(); ++i) out << ",x_" << (i + 1);
    out << "\n";
    auto row = [&](double t, int event, const State& x) {
        out << fmt(t) << ',' << event;
        for (int i = 0; i < x.size(); ++i) out << ',' << x[i];
        out << "\n";
    };
    row(0.0, -1, traj.x0);
    for (const auto& ev : traj.events) row(ev.time, ev.event_index, ev.post_state);
    return out.str();
}

std::string mean_to_csv(const MeanTrajectory& traj) {
    std::ostringstream out;
    const int n = traj.mean.empty() ? 0 : static_cast<int>(traj.mean.front().size());
    out << "time";
    for (int i = 0; i < n; ++i) out << ",mu_" << (i + 1);
    out << "\n";
    for (std::size_t row = 0; row < traj.times.size(); ++row) {
        out << fmt(traj.times[row]);
        for (int i = 0; i < n; ++i) out << ',' << fmt(traj.mean[row][i]);
        out << "\n";
    }
    return out.str();
}

std::string value_table_to_csv(const StateSpace& space, const std::vector<double>& values,
                               const std::vector<std::uint32_t>& controls, double u_max,
                               int route_count) {
    if (static_cast<int>(values.size()) != space.size() ||
        static_cast<int>(controls.size()) != space.size())
        throw ConfigError("value table length mismatch");
    std::ostringstream out;
    for (int i = 0; i < space.queue_count(); ++i) out << "x_" << (i + 1) << ',';
    out << "value";
    for (int k = 0; k < route_count; ++k) out << ",u_" << (k + 1);
    out << "\n";
    for (int idx = 0; idx < space.size(); ++idx) {
        const State& x = space.state(idx);
        for (int i = 0; i < x.size(); ++i) out << x[i] << ',';
        out << fmt(values[static_cast<std::size_t>(idx)]);
        for (int k = 0; k < route_count; ++k)
            out << ',' << fmt((controls[static_cast<std::size_t>(idx)] & (1u << k))
                                  ? u_max : 0.0);
        out << "\n";
    }
    return out.str();
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open \"" + path + "\"");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse \"" + path + "\": " + e.what());
    }
    return j;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write \"" + path + "\"");
    out << text;
    if (!out) throw ConfigError("write to \"" + path + "\" failed");
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

}  // namespace qnetopt
