#pragma once

#include "emv/routing/routing.h"
#include "emv/sim/simulator.h"

#include <vector>

namespace emv::baselines {

using net::Network;
using net::NodeId;

/// A* on the dispatch-time travel times; the route never changes afterwards.
std::vector<NodeId> static_route_plan(const Network &net, const routing::TravelTimes &T, NodeId origin,
                                      NodeId destination);

enum class RouteMode { Static, Dynamic };

/// Route guide for the non-learning combos. Call before_step() at every MDP
/// boundary: it plans at dispatch and, in dynamic mode, replans every
/// `period_s` of simulated time from the intersection the EMV is heading to,
/// never turning back.
class PlannedRouting : public routing::RouteGuide {
public:
    PlannedRouting(const Network &net, RouteMode mode, double period_s = 50.0);

    void reset();
    void before_step(const sim::Simulator &sim);

    RouteMode mode() const { return mode_; }
    int replans() const { return replans_; }
    /// Every plan in order, the dispatch plan first.
    const std::vector<std::vector<NodeId>> &history() const { return history_; }

private:
    const Network *net_;
    RouteMode mode_;
    double period_s_;
    bool planned_ = false;
    double next_replan_ = 0.0;
    int replans_ = 0;
    std::vector<std::vector<NodeId>> history_;
};

} // namespace emv::baselines
