#include "qnetopt/network.hpp"

#include <cmath>
#include <deque>
#include <set>
#include <utility>

#include "qnetopt/errors.hpp"

namespace qnetopt {

Eigen::MatrixXd QueueNetwork::exit_rate_matrix() const {
    return Eigen::MatrixXd(exit_rate.asDiagonal());
}

Eigen::VectorXi QueueNetwork::event_change(int event_index) const {
    const int m_e = exit_count();
    if (event_index < 0 || event_index >= event_count())
        throw ConfigError("event index " + std::to_string(event_index) + " out of range");
    if (event_index < m_e) return exit_change.col(event_index);
    return route_change.col(event_index - m_e);
}

QueueNetwork build_network(const NetworkDescription& description) {
    const int n = static_cast<int>(description.queues.size());
    if (n < 1) throw ConfigError("network needs at least one queue");
    if (!(description.u_max > 0.0) || !std::isfinite(description.u_max))
        throw ConfigError("u_max must be finite and strictly positive");

    QueueNetwork net;
    net.n = n;
    net.u_max = description.u_max;
    net.names.reserve(n);

    std::set<std::string> seen_names;
    std::vector<int> exit_queue;
    std::vector<double> exit_rate;
    for (int i = 0; i < n; ++i) {
        const QueueSpec& q = description.queues[i];
        std::string name = q.name.empty() ? "X" + std::to_string(i + 1) : q.name;
        if (!seen_names.insert(name).second)
            throw ConfigError("duplicate queue name \"" + name + "\"");
        net.names.push_back(std::move(name));
        if (!std::isfinite(q.exit_rate) || q.exit_rate < 0.0)
            throw ConfigError("queue \"" + net.names.back() +
                              "\": exit_rate must be finite and >= 0");
        if (q.exit_rate > 0.0) {
            exit_queue.push_back(i);
            exit_rate.push_back(q.exit_rate);
        }
    }

    std::set<std::pair<int, int>> seen_routes;
    for (std::size_t k = 0; k < description.routes.size(); ++k) {
        const RouteSpec& r = description.routes[k];
        if (r.source < 0 || r.source >= n || r.dest < 0 || r.dest >= n)
            throw ConfigError("route " + std::to_string(k) + ": endpoint out of range");
        if (r.source == r.dest)
            throw ConfigError("route " + std::to_string(k) + " (\"" + net.names[r.source] +
                              "\"): source and destination coincide");
        if (!seen_routes.insert({r.source, r.dest}).second)
            throw ConfigError("route " + std::to_string(k) + ": duplicate route \"" +
                              net.names[r.source] + "\" -> \"" + net.names[r.dest] + "\"");
        net.route_source.push_back(r.source);
        net.route_dest.push_back(r.dest);
    }

    net.exit_queue = std::move(exit_queue);
    net.exit_rate = Eigen::Map<const Eigen::VectorXd>(exit_rate.data(),
                                                      static_cast<int>(exit_rate.size()));

    const int m_e = net.exit_count();
    const int m_u = net.route_count();
    net.exit_change = Eigen::MatrixXi::Zero(n, m_e);
    net.exit_site_mask = Eigen::MatrixXi::Zero(m_e, n);
    net.queue_exit_rate = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < m_e; ++k) {
        net.exit_change(net.exit_queue[k], k) = -1;
        net.exit_site_mask(k, net.exit_queue[k]) = 1;
        net.queue_exit_rate[net.exit_queue[k]] += net.exit_rate[k];
    }
    net.route_change = Eigen::MatrixXi::Zero(n, m_u);
    net.route_source_mask = Eigen::MatrixXi::Zero(m_u, n);
    for (int k = 0; k < m_u; ++k) {
        net.route_change(net.route_source[k], k) = -1;
        net.route_change(net.route_dest[k], k) = 1;
        net.route_source_mask(k, net.route_source[k]) = 1;
    }
    return net;
}

ReachabilityReport validate_reachability(const QueueNetwork& net) {
    // BFS backwards from exit-bearing queues along reversed routing edges.
    std::vector<char> drains(net.n, 0);
    std::deque<int> frontier;
    for (int q : net.exit_queue)
        if (!drains[q]) {
            drains[q] = 1;
            frontier.push_back(q);
        }
    std::vector<std::vector<int>> feeds_into(net.n);  // dest -> sources
    for (int k = 0; k < net.route_count(); ++k)
        feeds_into[net.route_dest[k]].push_back(net.route_source[k]);
    while (!frontier.empty()) {
        int q = frontier.front();
        frontier.pop_front();
        for (int src : feeds_into[q])
            if (!drains[src]) {
                drains[src] = 1;
                frontier.push_back(src);
            }
    }
    ReachabilityReport report;
    for (int i = 0; i < net.n; ++i)
        if (!drains[i]) report.unreachable_queues.push_back(i);
    report.ok = report.unreachable_queues.empty();
    return report;
}

Eigen::VectorXd event_rates(const QueueNetwork& net, const State& x,
                            const Eigen::VectorXd& u) {
    if (x.size() != net.n)
        throw ConfigError("state has " + std::to_string(x.size()) + " entries, expected " +
                          std::to_string(net.n));
    if (u.size() != net.route_count())
        throw ConfigError("control has " + std::to_string(u.size()) + " entries, expected " +
                          std::to_string(net.route_count()));
    for (int i = 0; i < net.n; ++i)
        if (x[i] < 0)
            throw ConfigError("state entry " + std::to_string(i) + " is negative");
    for (int k = 0; k < net.route_count(); ++k)
        if (!std::isfinite(u[k]) || u[k] < 0.0 || u[k] > net.u_max)
            throw ConfigError("control entry " + std::to_string(k) + " outside [0, u_max]");

    Eigen::VectorXd rates(net.event_count());
    const int m_e = net.exit_count();
    for (int k = 0; k < m_e; ++k)
        rates[k] = net.exit_rate[k] * x[net.exit_queue[k]];
    for (int k = 0; k < net.route_count(); ++k)
        rates[m_e + k] = u[k] * x[net.route_source[k]];
    return rates;
}

}  // namespace qnetopt
