#include "emv/net/network.h"

#include <algorithm>
#include <functional>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

namespace emv::net {

unsigned lane_turns(int lane_index, int lane_count, unsigned available);
void build_movements_and_phases(IntersectionSpec &node, const std::vector<LinkSpec> &links,
                                std::vector<Lane> &lanes);
void validate_phases(const IntersectionSpec &node);

Heading opposite(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 2) % 4); }
Heading clockwise(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 1) % 4); }
Heading counter_clockwise(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 3) % 4); }

char heading_char(Heading h) {
    static constexpr char names[] = {'N', 'E', 'S', 'W'};
    return names[static_cast<int>(h)];
}

Heading parse_heading(std::string_view s) {
    if (s == "N" || s == "north")
        return Heading::North;
    if (s == "E" || s == "east")
        return Heading::East;
    if (s == "S" || s == "south")
        return Heading::South;
    if (s == "W" || s == "west")
        return Heading::West;
    throw ConfigError("unknown heading '" + std::string(s) + "' (expected N, E, S or W)");
}

bool classify_turn(Heading in, Heading out, Turn &turn) {
    if (out == in) {
        turn = Turn::Straight;
        return true;
    }
    if (out == clockwise(in)) {
        turn = Turn::Right;
        return true;
    }
    if (out == counter_clockwise(in)) {
        turn = Turn::Left;
        return true;
    }
    return false;
}

int IntersectionSpec::arm_count() const {
    int arms = 0;
    for (int a = 0; a < 4; ++a)
        if (in_by_arm[a] != kNone || out_by_arm[a] != kNone)
            ++arms;
    return arms;
}

int default_lane_capacity(double length_m) {
    return std::max(1, static_cast<int>(std::floor(length_m / 7.5)));
}

Network Network::build(std::vector<NodeDef> nodes, std::vector<LinkSpec> links) {
    Network net;
    if (nodes.empty())
        throw ConfigError("network has no intersections");
    std::sort(nodes.begin(), nodes.end(), [](const NodeDef &a, const NodeDef &b) { return a.id < b.id; });
    for (std::size_t i = 0; i < nodes.size(); ++i)
        if (nodes[i].id != static_cast<NodeId>(i))
            throw ConfigError("intersection ids must be 0.." + std::to_string(nodes.size() - 1) +
                              " without gaps");

    net.grid_coords_ = true;
    for (const NodeDef &def : nodes) {
        IntersectionSpec spec;
        spec.id = def.id;
        spec.row = def.row;
        spec.col = def.col;
        if (def.row < 0 || def.col < 0)
            net.grid_coords_ = false;
        net.nodes_.push_back(spec);
    }

    const int n = static_cast<int>(nodes.size());
    for (std::size_t i = 0; i < links.size(); ++i) {
        LinkSpec &link = links[i];
        link.id = static_cast<LinkId>(i);
        std::string where = "link " + std::to_string(i) + " (" + std::to_string(link.from) + "->" +
                            std::to_string(link.to) + ")";
        if (link.from < 0 || link.from >= n || link.to < 0 || link.to >= n)
            throw ConfigError(where + ": endpoint is not a valid intersection id");
        if (link.from == link.to)
            throw ConfigError(where + ": self-loop links are not allowed");
        if (!(link.length_m > 0.0))
            throw ConfigError(where + ": length must be positive");
        if (link.lane_count < 1)
            throw ConfigError(where + ": lane count must be at least 1");
        if (link.lane_capacity < 1)
            throw ConfigError(where + ": lane capacity must be at least 1");
        if (link.ec_coefficient < 0.0)
            throw ConfigError(where + ": emergency capacity coefficient must be non-negative");
        if (!(link.free_flow_speed > 0.0))
            throw ConfigError(where + ": free-flow speed must be positive");
        if (link.emv_max_speed < link.free_flow_speed)
            throw ConfigError(where + ": EMV max speed must be at least the free-flow speed");
        if (!net.link_index_.emplace(std::make_pair(link.from, link.to), link.id).second)
            throw ConfigError(where + ": duplicate link between the same intersections");

        IntersectionSpec &tail = net.nodes_[link.from];
        IntersectionSpec &head = net.nodes_[link.to];
        int out_arm = static_cast<int>(link.heading);
        int in_arm = static_cast<int>(opposite(link.heading));
        if (tail.out_by_arm[out_arm] != kNone)
            throw ConfigError(where + ": intersection " + std::to_string(link.from) +
                              " already has an outgoing link heading " + heading_char(link.heading));
        if (head.in_by_arm[in_arm] != kNone)
            throw ConfigError(where + ": intersection " + std::to_string(link.to) +
                              " already has an incoming link on arm " + heading_char(opposite(link.heading)));
        tail.out_by_arm[out_arm] = link.id;
        head.in_by_arm[in_arm] = link.id;

        link.first_lane = static_cast<LaneId>(net.lanes_.size());
        for (int li = 0; li < link.lane_count; ++li)
            net.lanes_.push_back(Lane{static_cast<LaneId>(net.lanes_.size()), link.id, li, 0});
    }
    net.links_ = std::move(links);
    net.derive();
    return net;
}

void Network::derive() {
    const int n = node_count();
    for (IntersectionSpec &node : nodes_) {
        std::set<NodeId> nbrs;
        node.in_links.clear();
        node.out_links.clear();
        node.incoming_lanes.clear();
        node.outgoing_lanes.clear();
        for (int a = 0; a < 4; ++a) {
            if (LinkId in = node.in_by_arm[a]; in != kNone) {
                node.in_links.push_back(in);
                nbrs.insert(links_[in].from);
                for (int li = 0; li < links_[in].lane_count; ++li)
                    node.incoming_lanes.push_back(links_[in].lane(li));
            }
        }
        for (int a = 0; a < 4; ++a) {
            if (LinkId out = node.out_by_arm[a]; out != kNone) {
                node.out_links.push_back(out);
                nbrs.insert(links_[out].to);
                for (int li = 0; li < links_[out].lane_count; ++li)
                    node.outgoing_lanes.push_back(links_[out].lane(li));
            }
        }
        node.neighbors.assign(nbrs.begin(), nbrs.end());
        build_movements_and_phases(node, links_, lanes_);
        validate_phases(node);
        if (node.phases.empty())
            node.phases.push_back(Phase{0, {}});
    }

    local_in_lane_.assign(lanes_.size(), kNone);
    local_out_link_.assign(links_.size(), kNone);
    for (const IntersectionSpec &node : nodes_) {
        for (std::size_t i = 0; i < node.incoming_lanes.size(); ++i)
            local_in_lane_[node.incoming_lanes[i]] = static_cast<int>(i);
        for (std::size_t i = 0; i < node.out_links.size(); ++i)
            local_out_link_[node.out_links[i]] = static_cast<int>(i);
    }

    lane_permits_.assign(n, {});
    for (const IntersectionSpec &node : nodes_) {
        const std::size_t width = node.out_links.size();
        for (const Phase &phase : node.phases) {
            std::vector<bool> bits(node.incoming_lanes.size() * width, false);
            for (int mi : phase.movements) {
                const Movement &m = node.movements[mi];
                bits[local_in_lane_[m.from_lane] * width + local_out_link_[m.to_link]] = true;
            }
            lane_permits_[node.id].push_back(std::move(bits));
        }
    }

    distance_.assign(static_cast<std::size_t>(n) * n, kUnreachable);
    for (NodeId s = 0; s < n; ++s) {
        std::queue<NodeId> q;
        distance_[s * n + s] = 0;
        q.push(s);
        while (!q.empty()) {
            NodeId u = q.front();
            q.pop();
            for (NodeId v : nodes_[u].neighbors) {
                if (distance_[s * n + v] == kUnreachable) {
                    distance_[s * n + v] = distance_[s * n + u] + 1;
                    q.push(v);
                }
            }
        }
    }
}

LinkId Network::link_between(NodeId u, NodeId v) const {
    auto it = link_index_.find({u, v});
    return it == link_index_.end() ? kNone : it->second;
}

int Network::graph_distance(NodeId i, NodeId j) const {
    const int n = node_count();
    if (i < 0 || i >= n || j < 0 || j >= n)
        throw std::out_of_range("graph_distance: invalid intersection id");
    return distance_[static_cast<std::size_t>(i) * n + j];
}

int Network::max_distance_from(NodeId i) const {
    int best = 0;
    for (NodeId j = 0; j < node_count(); ++j)
        best = std::max(best, graph_distance(i, j));
    return best;
}

bool Network::reachable(NodeId from, NodeId to) const {
    std::vector<bool> seen(nodes_.size(), false);
    std::queue<NodeId> q;
    q.push(from);
    seen[from] = true;
    while (!q.empty()) {
        NodeId u = q.front();
        q.pop();
        if (u == to)
            return true;
        for (LinkId l : nodes_[u].out_links) {
            NodeId v = links_[l].to;
            if (!seen[v]) {
                seen[v] = true;
                q.push(v);
            }
        }
    }
    return false;
}

std::vector<NodeId> Network::border_nodes() const {
    std::vector<NodeId> out;
    for (const IntersectionSpec &node : nodes_)
        if (node.arm_count() < 4)
            out.push_back(node.id);
    return out;
}

bool Network::phase_permits(NodeId node, int phase, LinkId in_link, LinkId out_link) const {
    const LinkSpec &in = links_[in_link];
    for (int li = 0; li < in.lane_count; ++li)
        if (phase_permits_lane(node, phase, in.lane(li), out_link))
            return true;
    return false;
}

bool Network::phase_permits_lane(NodeId node, int phase, LaneId lane, LinkId out_link) const {
    const IntersectionSpec &spec = nodes_[node];
    int li = local_in_lane_[lane];
    int lo = local_out_link_[out_link];
    if (li == kNone || lo == kNone || links_[lanes_[lane].link].to != node || links_[out_link].from != node)
        return false;
    return lane_permits_[node][phase][li * spec.out_links.size() + lo];
}

std::vector<double> Network::distances_to(NodeId destination) const {
    std::vector<double> dist(node_count(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, NodeId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[destination] = 0.0;
    pq.push({0.0, destination});
    while (!pq.empty()) {
        auto [d, v] = pq.top();
        pq.pop();
        if (d > dist[v])
            continue;
        for (LinkId l : nodes_[v].in_links) {
            NodeId u = links_[l].from;
            double nd = d + links_[l].length_m;
            if (nd < dist[u]) {
                dist[u] = nd;
                pq.push({nd, u});
            }
        }
    }
    return dist;
}

std::vector<std::vector<LinkId>> Network::shortest_distance_paths(NodeId origin, NodeId destination,
                                                                  int limit) const {
    std::vector<double> dist = distances_to(destination);
    if (dist[origin] == std::numeric_limits<double>::infinity())
        throw ConfigError("no path from intersection " + std::to_string(origin) + " to " +
                          std::to_string(destination));
    // out links on some shortest path, by ascending head id
    auto tight = [&](NodeId at) {
        std::vector<LinkId> out;
        for (LinkId l : nodes_[at].out_links) {
            double slack = std::abs(dist[links_[l].to] + links_[l].length_m - dist[at]);
            if (slack <= 1e-9 * std::max(1.0, dist[at]))
                out.push_back(l);
        }
        std::sort(out.begin(), out.end(), [&](LinkId a, LinkId b) { return links_[a].to < links_[b].to; });
        return out;
    };
    std::vector<std::vector<LinkId>> paths;
    std::vector<LinkId> path;
    std::function<void(NodeId)> walk = [&](NodeId at) {
        if (static_cast<int>(paths.size()) >= limit)
            return;
        if (at == destination) {
            paths.push_back(path);
            return;
        }
        for (LinkId l : tight(at)) {
            path.push_back(l);
            walk(links_[l].to);
            path.pop_back();
        }
    };
    walk(origin);
    return paths;
}

std::vector<LinkId> Network::shortest_distance_path(NodeId origin, NodeId destination) const {
    return shortest_distance_paths(origin, destination, 1).front();
}

int graph_distance(const Network &network, NodeId i, NodeId j) { return network.graph_distance(i, j); }

Network build_grid(const GridOptions &o) {
    if (o.rows < 2 || o.cols < 2)
        throw ConfigError("grid dimensions must be at least 2x2 (got " + std::to_string(o.rows) + "x" +
                          std::to_string(o.cols) + ")");
    if (!(o.link_length_m > 0.0) || o.lanes_per_link < 1 || o.capacity_per_lane < 0)
        throw ConfigError("grid link length, lanes and capacity must be positive");
    int capacity = o.capacity_per_lane > 0 ? o.capacity_per_lane : default_lane_capacity(o.link_length_m);

    std::vector<NodeDef> nodes;
    for (int r = 0; r < o.rows; ++r)
        for (int c = 0; c < o.cols; ++c)
            nodes.push_back(NodeDef{r * o.cols + c, r, c});

    std::vector<LinkSpec> links;
    std::set<std::pair<NodeId, NodeId>> used_ec;
    for (int r = 0; r < o.rows; ++r) {
        for (int c = 0; c < o.cols; ++c) {
            NodeId u = r * o.cols + c;
            for (Heading h : kHeadings) {
                int nr = r + (h == Heading::South) - (h == Heading::North);
                int nc = c + (h == Heading::East) - (h == Heading::West);
                if (nr < 0 || nr >= o.rows || nc < 0 || nc >= o.cols)
                    continue;
                LinkSpec link;
                link.from = u;
                link.to = nr * o.cols + nc;
                link.heading = h;
                link.length_m = o.link_length_m;
                link.lane_count = o.lanes_per_link;
                link.lane_capacity = capacity;
                link.free_flow_speed = o.free_flow_speed;
                link.emv_max_speed = o.emv_max_speed;
                if (auto it = o.ec_coefficients.find({link.from, link.to}); it != o.ec_coefficients.end()) {
                    link.ec_coefficient = it->second;
                    used_ec.insert(it->first);
                }
                links.push_back(link);
            }
        }
    }
    for (const auto &[key, coef] : o.ec_coefficients)
        if (!used_ec.count(key))
            throw ConfigError("emergency capacity given for non-existent grid link " + std::to_string(key.first) +
                              "->" + std::to_string(key.second));
    return Network::build(std::move(nodes), std::move(links));
}

Network build_grid(int rows, int cols, double link_length_m, int lanes_per_link, int capacity_per_lane,
                   const EcCoefficientMap &ec_coefficients) {
    GridOptions o;
    o.rows = rows;
    o.cols = cols;
    o.link_length_m = link_length_m;
    o.lanes_per_link = lanes_per_link;
    o.capacity_per_lane = capacity_per_lane;
    o.ec_coefficients = ec_coefficients;
    return build_grid(o);
}

} // namespace emv::net
