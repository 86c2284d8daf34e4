#pragma once

#include "emv/net/network.h"
#include "emv/sim/simulator.h"

#include <limits>
#include <vector>

namespace emv::routing {

using net::LinkId;
using net::Network;
using net::NodeId;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Per-link EMV travel time, indexed by link id.
using TravelTimes = std::vector<double>;

/// ETA to the destination and next hop, per intersection.
struct EtaTable {
    NodeId destination = net::kNone;
    std::vector<double> eta;   // kInfinity when the destination cannot be reached
    std::vector<NodeId> next;  // kNone at the destination and at unreachable nodes
};

/// length / emv_speed on the simulator's current state, clamped to the configured maximum.
double intra_link_travel_time(const sim::Simulator &sim, LinkId link);

/// Exact shortest-time table by Dijkstra on the reversed graph (binary heap).
EtaTable prepopulate(const Network &net, const TravelTimes &T, NodeId destination);

/// One synchronous round: ETA_i <- min_j (ETA_j + T_ij) reading only the previous
/// table; Next_i is the argmin, ties to the lowest id. The destination stays at 0.
EtaTable relax_step(const Network &net, const EtaTable &previous, const TravelTimes &T);

/// Table with ETA 0 at the destination and infinity elsewhere.
EtaTable unsettled_table(const Network &net, NodeId destination);

/// Next_i; throws std::invalid_argument at the destination or where no next hop exists.
NodeId next_hop(const EtaTable &table, NodeId node);

/// Next hop that never sends the EMV straight back to `came_from`: when Next_i
/// equals it, the best remaining out-neighbor by ETA_j + T_ij is used.
NodeId next_hop_no_uturn(const Network &net, const EtaTable &table, const TravelTimes &T, NodeId node,
                         NodeId came_from);

/// Time-optimal route (intersection list, origin first). Heuristic: Manhattan hop
/// distance times the smallest link time on grid maps, zero elsewhere. Among
/// optimal routes the lexicographically smallest node sequence is returned.
/// `forbidden_next` excludes one first hop. Throws if unreachable.
std::vector<NodeId> a_star_route(const Network &net, const TravelTimes &T, NodeId origin, NodeId destination,
                                 NodeId forbidden_next = net::kNone);

/// Route time under T.
double route_time(const Network &net, const TravelTimes &T, const std::vector<NodeId> &route);

/// Follows a fixed intersection list; replace() swaps in a new plan.
class RouteGuide : public sim::EmvGuide {
public:
    RouteGuide() = default;
    explicit RouteGuide(std::vector<NodeId> route) : route_(std::move(route)) {}
    NodeId next_node(NodeId at, NodeId came_from) override;
    /// Successor of `at` on the plan (last occurrence), kNone if absent or at the end.
    NodeId peek(NodeId at) const;
    void replace(std::vector<NodeId> route) { route_ = std::move(route); }
    const std::vector<NodeId> &route() const { return route_; }

private:
    std::vector<NodeId> route_;
};

/// Follows Next from an ETA table snapshot.
class EtaGuide : public sim::EmvGuide {
public:
    EtaGuide(const Network &net) : net_(&net) {}
    void set(const EtaTable &table, const TravelTimes &T) {
        table_ = table;
        T_ = T;
    }
    NodeId next_node(NodeId at, NodeId came_from) override;
    const EtaTable &table() const { return table_; }

private:
    const Network *net_;
    EtaTable table_;
    TravelTimes T_;
};

} // namespace emv::routing
