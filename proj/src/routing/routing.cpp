#include "emv/routing/routing.h"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>

namespace emv::routing {

namespace {

void check_times(const Network &net, const TravelTimes &T) {
    if (static_cast<int>(T.size()) != net.link_count())
        throw std::invalid_argument("travel time vector has " + std::to_string(T.size()) + " entries, network has " +
                                    std::to_string(net.link_count()) + " links");
}

// argmin_j (eta_j + T_ij) over out-neighbors of i, ties to the lowest j
std::pair<double, NodeId> best_out(const Network &net, const std::vector<double> &eta, const TravelTimes &T,
                                   NodeId i, NodeId skip = net::kNone) {
    double best = kInfinity;
    NodeId arg = net::kNone;
    for (LinkId l : net.node(i).out_links) {
        NodeId j = net.link(l).to;
        if (j == skip)
            continue;
        double cand = eta[j] + T[l];
        if (cand < best || (cand == best && arg != net::kNone && j < arg)) {
            best = cand;
            arg = j;
        }
    }
    if (best == kInfinity)
        arg = net::kNone;
    return {best, arg};
}

} // namespace

double intra_link_travel_time(const sim::Simulator &sim, LinkId link) { return sim.link_travel_time(link); }

EtaTable unsettled_table(const Network &net, NodeId destination) {
    EtaTable t;
    t.destination = destination;
    t.eta.assign(net.node_count(), kInfinity);
    t.next.assign(net.node_count(), net::kNone);
    t.eta[destination] = 0.0;
    return t;
}

EtaTable prepopulate(const Network &net, const TravelTimes &T, NodeId destination) {
    check_times(net, T);
    EtaTable t = unsettled_table(net, destination);
    using Item = std::pair<double, NodeId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    heap.push({0.0, destination});
    std::vector<bool> done(net.node_count(), false);
    while (!heap.empty()) {
        auto [d, v] = heap.top();
        heap.pop();
        if (done[v])
            continue;
        done[v] = true;
        for (LinkId l : net.node(v).in_links) {
            NodeId u = net.link(l).from;
            double nd = d + T[l];
            if (nd < t.eta[u]) {
                t.eta[u] = nd;
                heap.push({nd, u});
            }
        }
    }
    for (NodeId i = 0; i < net.node_count(); ++i)
        if (i != destination)
            t.next[i] = best_out(net, t.eta, T, i).second;
    return t;
}

EtaTable relax_step(const Network &net, const EtaTable &previous, const TravelTimes &T) {
    check_times(net, T);
    EtaTable t;
    t.destination = previous.destination;
    t.eta.resize(net.node_count());
    t.next.resize(net.node_count());
    for (NodeId i = 0; i < net.node_count(); ++i) {
        if (i == previous.destination) {
            t.eta[i] = 0.0;
            t.next[i] = net::kNone;
            continue;
        }
        auto [eta, next] = best_out(net, previous.eta, T, i);
        t.eta[i] = eta;
        t.next[i] = next;
    }
    return t;
}

NodeId next_hop(const EtaTable &table, NodeId node) {
    if (node == table.destination)
        throw std::invalid_argument("next_hop asked at the destination " + std::to_string(node));
    NodeId n = table.next.at(node);
    if (n == net::kNone)
        throw std::invalid_argument("intersection " + std::to_string(node) + " has no route to the destination");
    return n;
}

NodeId next_hop_no_uturn(const Network &net, const EtaTable &table, const TravelTimes &T, NodeId node,
                         NodeId came_from) {
    NodeId n = table.next.at(node);
    if (n != net::kNone && n != came_from)
        return n;
    auto [eta, alt] = best_out(net, table.eta, T, node, came_from);
    if (alt != net::kNone)
        return alt;
    return next_hop(table, node); // dead end: turning back is the only option
}

std::vector<NodeId> a_star_route(const Network &net, const TravelTimes &T, NodeId origin, NodeId destination,
                                 NodeId forbidden_next) {
    check_times(net, T);
    if (origin == destination)
        return {origin};

    std::vector<double> h(net.node_count(), 0.0);
    if (net.has_grid_coordinates()) {
        double tmin = *std::min_element(T.begin(), T.end());
        const auto &o = net.node(origin);
        for (NodeId v = 0; v < net.node_count(); ++v) {
            const auto &n = net.node(v);
            h[v] = (std::abs(n.row - o.row) + std::abs(n.col - o.col)) * tmin;
        }
    }

    // Search backwards from the destination so g(v) is the exact time from v to
    // the destination for every node that can lie on an optimal route.
    std::vector<double> g(net.node_count(), kInfinity);
    std::vector<bool> closed(net.node_count(), false);
    using Item = std::pair<double, NodeId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    g[destination] = 0.0;
    open.push({h[destination], destination});
    double best = kInfinity;
    while (!open.empty()) {
        auto [f, v] = open.top();
        if (f > best * (1.0 + 1e-12) + 1e-9)
            break;
        open.pop();
        if (closed[v])
            continue;
        closed[v] = true;
        if (v == origin)
            best = g[v];
        for (LinkId l : net.node(v).in_links) {
            NodeId u = net.link(l).from;
            if (u == origin && v == forbidden_next)
                continue;
            double ng = g[v] + T[l];
            if (ng < g[u]) {
                g[u] = ng;
                closed[u] = false;
                open.push({ng + h[u], u});
            }
        }
    }
    if (best == kInfinity)
        throw std::runtime_error("no route from intersection " + std::to_string(origin) + " to " +
                                 std::to_string(destination));

    std::vector<NodeId> route{origin};
    NodeId at = origin;
    while (at != destination) {
        NodeId pick = net::kNone;
        for (LinkId l : net.node(at).out_links) {
            NodeId j = net.link(l).to;
            if (at == origin && j == forbidden_next)
                continue;
            if (!closed[j] || g[j] == kInfinity)
                continue;
            double slack = T[l] + g[j] - g[at];
            if (std::abs(slack) <= 1e-9 * std::max(1.0, g[at]) && (pick == net::kNone || j < pick))
                pick = j;
        }
        if (pick == net::kNone)
            throw std::logic_error("A* route reconstruction failed");
        route.push_back(pick);
        at = pick;
    }
    return route;
}

double route_time(const Network &net, const TravelTimes &T, const std::vector<NodeId> &route) {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < route.size(); ++i) {
        LinkId l = net.link_between(route[i], route[i + 1]);
        if (l == net::kNone)
            throw std::invalid_argument("route uses a missing link");
        total += T[l];
    }
    return total;
}

NodeId RouteGuide::peek(NodeId at) const {
    for (std::size_t i = route_.size(); i-- > 1;)
        if (route_[i - 1] == at)
            return route_[i];
    return net::kNone;
}

NodeId RouteGuide::next_node(NodeId at, NodeId) {
    NodeId next = peek(at);
    if (next != net::kNone)
        return next;
    throw std::logic_error("EMV is off its planned route at intersection " + std::to_string(at));
}

NodeId EtaGuide::next_node(NodeId at, NodeId came_from) {
    return next_hop_no_uturn(*net_, table_, T_, at, came_from);
}

} // namespace emv::routing
