#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qnetopt {

// Queue contents: one non-negative count per queue.
using State = Eigen::VectorXi;

struct QueueSpec {
    std::string name;
    double exit_rate = 0.0;  // 0 = no exit event at this queue
};

struct RouteSpec {
    int source = -1;
    int dest = -1;
};

struct NetworkDescription {
    std::vector<QueueSpec> queues;
    std::vector<RouteSpec> routes;  // order fixes the control index order
    double u_max = 0.0;
};

// Network model plus the structural matrices derived from it. Construct via
// build_network and treat as immutable afterwards (safe to share across
// threads). Event indexing everywhere: exit events first (in queue order),
// then routing events (in route order).
struct QueueNetwork {
    int n = 0;
    std::vector<std::string> names;
    double u_max = 0.0;

    // exit event k drains queue exit_queue[k] at per-unit rate exit_rate[k]
    std::vector<int> exit_queue;
    Eigen::VectorXd exit_rate;

    // routing event k moves one unit route_source[k] -> route_dest[k]
    std::vector<int> route_source;
    std::vector<int> route_dest;

    // state change per event, one column each
    Eigen::MatrixXi exit_change;   // n x m_e, column k = -e_{exit_queue[k]}
    Eigen::MatrixXi route_change;  // n x m_u, column k = e_dest - e_source

    // event -> queue selectors, exactly one 1 per row
    Eigen::MatrixXi route_source_mask;  // m_u x n, row k picks route_source[k]
    Eigen::MatrixXi exit_site_mask;     // m_e x n, row k picks exit_queue[k]

    // combined per-unit exit rate of each queue (0 if no exit there)
    Eigen::VectorXd queue_exit_rate;

    int exit_count() const { return static_cast<int>(exit_queue.size()); }
    int route_count() const { return static_cast<int>(route_source.size()); }
    int event_count() const { return exit_count() + route_count(); }

    // diag(exit_rate), m_e x m_e
    Eigen::MatrixXd exit_rate_matrix() const;

    // state change of the event at `event_index` in the combined ordering
    Eigen::VectorXi event_change(int event_index) const;
};

QueueNetwork build_network(const NetworkDescription& description);

struct ReachabilityReport {
    bool ok = false;
    std::vector<int> unreachable_queues;  // no route path to any exit
};

// A queue drains if some directed routing path leads from it to a queue with
// an exit event. Every queue must drain for the infinite-horizon problem to
// be well posed.
ReachabilityReport validate_reachability(const QueueNetwork& net);

// Per-event rates at state x under control u (entries in [0, u_max]):
// exit event k fires at exit_rate[k]*x[exit_queue[k]], routing event k at
// u[k]*x[route_source[k]]. Ordering matches event_change.
Eigen::VectorXd event_rates(const QueueNetwork& net, const State& x,
                            const Eigen::VectorXd& u);

}  // namespace qnetopt
