#include "emv/pressure/pressure.h"

#include <cmath>
#include <stdexcept>
#include <string>

namespace emv::pressure {

namespace {

double density(const Network &net, const LaneCounts &x, LaneId lane) {
    return static_cast<double>(x[lane]) / net.link(net.lane(lane).link).lane_capacity;
}

} // namespace

double lane_pressure(const Network &net, const LaneCounts &x, LaneId lane) {
    const net::Lane &l = net.lane(lane);
    const net::IntersectionSpec &node = net.node(net.link(l.link).to);
    double downstream = 0.0;
    bool any = false;
    for (const net::Movement &m : node.movements) {
        if (m.from_lane != lane)
            continue;
        any = true;
        downstream += density(net, x, m.to_lane) / net.link(m.to_link).lane_count;
    }
    if (!any)
        throw std::invalid_argument("lane " + std::to_string(lane) + " has no movements");
    return std::abs(density(net, x, lane) - downstream);
}

double intersection_pressure(const Network &net, const LaneCounts &x, NodeId node) {
    const net::IntersectionSpec &spec = net.node(node);
    double sum = 0.0;
    int lanes = 0;
    for (LaneId lane : spec.incoming_lanes) {
        if (net.lane(lane).turns == 0)
            continue;
        sum += lane_pressure(net, x, lane);
        ++lanes;
    }
    return lanes ? sum / lanes : 0.0;
}

MovementPressures presslight_pressure(const Network &net, const LaneCounts &x, NodeId node) {
    const net::IntersectionSpec &spec = net.node(node);
    MovementPressures out;
    out.movement.reserve(spec.movements.size());
    double total = 0.0;
    for (const net::Movement &m : spec.movements) {
        double w = density(net, x, m.from_lane) - density(net, x, m.to_lane);
        out.movement.push_back(w);
        total += w;
    }
    out.intersection = std::abs(total);
    return out;
}

double phase_pressure(const Network &net, const LaneCounts &x, NodeId node, int phase) {
    const net::IntersectionSpec &spec = net.node(node);
    if (phase < 0 || phase >= static_cast<int>(spec.phases.size()))
        throw std::invalid_argument("phase " + std::to_string(phase) + " not in the phase table of intersection " +
                                    std::to_string(node));
    double sum = 0.0;
    for (int mi : spec.phases[phase].movements) {
        const net::Movement &m = spec.movements[mi];
        sum += density(net, x, m.from_lane) - density(net, x, m.to_lane);
    }
    return sum;
}

} // namespace emv::pressure
