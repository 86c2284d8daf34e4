#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace emv::net {

using NodeId = int;
using LinkId = int;
using LaneId = int;

inline constexpr int kNone = -1;
/// Returned by graph_distance for pairs with no connecting path.
inline constexpr int kUnreachable = -1;

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Compass direction. For a link it is the direction of travel; for an
/// intersection arm it is the side of the intersection the arm sits on.
enum class Heading : int { North = 0, East = 1, South = 2, West = 3 };

inline constexpr std::array<Heading, 4> kHeadings = {Heading::North, Heading::East, Heading::South,
                                                     Heading::West};

Heading opposite(Heading h);
Heading clockwise(Heading h);
Heading counter_clockwise(Heading h);
char heading_char(Heading h);
Heading parse_heading(std::string_view s);

enum class Turn : int { Left = 0, Straight = 1, Right = 2 };

inline constexpr unsigned turn_bit(Turn t) { return 1u << static_cast<unsigned>(t); }

/// Turn made by a vehicle travelling `in` that leaves on `out`; U-turns have no value.
bool classify_turn(Heading in, Heading out, Turn &turn);

struct LinkSpec {
    LinkId id = kNone;
    NodeId from = kNone;
    NodeId to = kNone;
    Heading heading = Heading::North;
    double length_m = 0.0;
    int lane_count = 1;
    int lane_capacity = 1;          // x_max per lane
    double ec_coefficient = 0.0;    // C^EC = coefficient * normal capacity
    double free_flow_speed = 6.0;   // m/s, non-EMV traffic
    double emv_max_speed = 12.0;    // m/s, s_f
    LaneId first_lane = kNone;      // lanes are first_lane .. first_lane + lane_count - 1

    int normal_capacity() const { return lane_count * lane_capacity; }
    double emergency_capacity() const { return ec_coefficient * normal_capacity(); }
    double free_flow_time() const { return length_m / free_flow_speed; }
    LaneId lane(int index) const { return first_lane + index; }
};

struct Lane {
    LaneId id = kNone;
    LinkId link = kNone;
    int index = 0;      // 0 is the innermost (left-most) lane
    unsigned turns = 0; // permitted turns at the downstream intersection
};

struct Movement {
    LaneId from_lane = kNone;
    LaneId to_lane = kNone;
    LinkId from_link = kNone;
    LinkId to_link = kNone;
    Heading approach = Heading::North; // arm the vehicle arrives on
    Turn turn = Turn::Straight;
};

struct Phase {
    int id = 0;                 // index in the standard 8-phase table
    std::vector<int> movements; // indices into IntersectionSpec::movements
};

struct IntersectionSpec {
    NodeId id = kNone;
    int row = -1;
    int col = -1;
    std::array<LinkId, 4> in_by_arm{kNone, kNone, kNone, kNone};
    std::array<LinkId, 4> out_by_arm{kNone, kNone, kNone, kNone};
    std::vector<LinkId> in_links;  // arm order N, E, S, W
    std::vector<LinkId> out_links; // arm order N, E, S, W
    std::vector<LaneId> incoming_lanes;
    std::vector<LaneId> outgoing_lanes;
    std::vector<Movement> movements;
    std::vector<Phase> phases;
    std::vector<NodeId> neighbors; // ascending id

    int arm_count() const;
};

struct NodeDef {
    NodeId id = kNone;
    int row = -1;
    int col = -1;
};

/// Static traffic network. Immutable once built.
class Network {
public:
    Network() = default;

    /// Validates nodes/links, assigns lanes and derives movements and phase tables.
    static Network build(std::vector<NodeDef> nodes, std::vector<LinkSpec> links);

    int node_count() const { return static_cast<int>(nodes_.size()); }
    int link_count() const { return static_cast<int>(links_.size()); }
    int lane_count() const { return static_cast<int>(lanes_.size()); }

    const IntersectionSpec &node(NodeId id) const { return nodes_.at(id); }
    const LinkSpec &link(LinkId id) const { return links_.at(id); }
    const Lane &lane(LaneId id) const { return lanes_.at(id); }
    const std::vector<IntersectionSpec> &nodes() const { return nodes_; }
    const std::vector<LinkSpec> &links() const { return links_; }

    /// kNone if there is no directed link u -> v.
    LinkId link_between(NodeId u, NodeId v) const;

    /// True when every node carries grid coordinates.
    bool has_grid_coordinates() const { return grid_coords_; }

    int graph_distance(NodeId i, NodeId j) const;
    int max_distance_from(NodeId i) const;

    /// Directed reachability.
    bool reachable(NodeId from, NodeId to) const;

    /// Nodes with fewer than four arms (network boundary).
    std::vector<NodeId> border_nodes() const;

    /// Whether phase `phase` of `node` lets traffic go from incoming link to outgoing link.
    bool phase_permits(NodeId node, int phase, LinkId in_link, LinkId out_link) const;
    /// Whether the phase lets vehicles on `lane` leave through `out_link`.
    bool phase_permits_lane(NodeId node, int phase, LaneId lane, LinkId out_link) const;

    /// Shortest-length path as a list of links, ties broken towards the
    /// lexicographically smallest node sequence. Empty if o == d. Throws if unreachable.
    std::vector<LinkId> shortest_distance_path(NodeId origin, NodeId destination) const;
    /// Every shortest-length path (up to `limit`), lexicographic by node sequence.
    std::vector<std::vector<LinkId>> shortest_distance_paths(NodeId origin, NodeId destination,
                                                             int limit = 64) const;

private:
    void derive();
    std::vector<double> distances_to(NodeId destination) const;

    std::vector<IntersectionSpec> nodes_;
    std::vector<LinkSpec> links_;
    std::vector<Lane> lanes_;
    std::map<std::pair<NodeId, NodeId>, LinkId> link_index_;
    std::vector<int> distance_; // node_count^2, undirected hop distance
    // per node, per phase: bitmap over (local incoming lane, local out link)
    std::vector<std::vector<std::vector<bool>>> lane_permits_;
    std::vector<int> local_in_lane_; // lane id -> index in its downstream node's incoming_lanes
    std::vector<int> local_out_link_; // link id -> index in its upstream node's out_links
    bool grid_coords_ = false;
};

/// Hop distance on the undirected intersection graph; kUnreachable when disconnected.
int graph_distance(const Network &network, NodeId i, NodeId j);

/// Per-link emergency capacity coefficients keyed by (from, to).
using EcCoefficientMap = std::map<std::pair<NodeId, NodeId>, double>;

struct GridOptions {
    int rows = 0;
    int cols = 0;
    double link_length_m = 200.0;
    int lanes_per_link = 2;
    int capacity_per_lane = 0; // 0 = floor(length / 7.5 m)
    double free_flow_speed = 6.0;
    double emv_max_speed = 12.0;
    EcCoefficientMap ec_coefficients;
};

/// Bidirectional rows x cols grid. Node id = row * cols + col, row 0 is the northern edge.
Network build_grid(const GridOptions &options);

Network build_grid(int rows, int cols, double link_length_m, int lanes_per_link,
                   int capacity_per_lane, const EcCoefficientMap &ec_coefficients);

/// Default lane capacity for a link of the given length.
int default_lane_capacity(double length_m);

/// Whether two movements at the same intersection cross or merge.
bool movements_conflict(const Movement &a, const Movement &b);

} // namespace emv::net
