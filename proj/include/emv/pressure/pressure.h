#pragma once

// Pressure over a snapshot of lane counts x(l), indexed by lane id.

#include "emv/net/network.h"

#include <vector>

namespace emv::pressure {

using net::LaneId;
using net::Network;
using net::NodeId;

using LaneCounts = std::vector<int>;

/// w(l) = | x(l)/xmax(l) - sum over movements (l,m) of x(m)/(h(m) xmax(m)) |,
/// h(m) the lane count of m's link. Throws std::invalid_argument if l has no movements.
double lane_pressure(const Network &net, const LaneCounts &x, LaneId lane);

/// Mean of w(l) over the incoming lanes that have movements (0 if none do).
double intersection_pressure(const Network &net, const LaneCounts &x, NodeId node);

struct MovementPressures {
    std::vector<double> movement; // w*(l,m) = d(l) - d(m), parallel to node.movements
    double intersection = 0.0;    // P* = |sum w*|
};

MovementPressures presslight_pressure(const Network &net, const LaneCounts &x, NodeId node);

/// Signed sum of w* over the phase's movements; phase is an index into node.phases.
double phase_pressure(const Network &net, const LaneCounts &x, NodeId node, int phase);

} // namespace emv::pressure
