#include "emv/baselines/route_planning.h"

#include <stdexcept>

namespace emv::baselines {

std::vector<NodeId> static_route_plan(const Network &net, const routing::TravelTimes &T, NodeId origin,
                                      NodeId destination) {
    return routing::a_star_route(net, T, origin, destination);
}

PlannedRouting::PlannedRouting(const Network &net, RouteMode mode, double period_s)
    : net_(&net), mode_(mode), period_s_(period_s) {
    if (!(period_s > 0.0))
        throw std::invalid_argument("replan period must be positive");
}

void PlannedRouting::reset() {
    replace({});
    planned_ = false;
    replans_ = 0;
    history_.clear();
}

void PlannedRouting::before_step(const sim::Simulator &sim) {
    const net::Scenario &scn = sim.scenario();
    if (!scn.emv.enabled)
        return;
    const double dt = scn.sim.mdp_step_s;
    if (!planned_) {
        // the dispatch happens inside the coming step: plan on the current times
        if (sim.emv().status == sim::EmvStatus::Pending && scn.emv.dispatch_s < sim.clock() + dt - 1e-9) {
            replace(static_route_plan(*net_, sim.travel_times(), scn.emv.origin, scn.emv.destination));
            history_.push_back(route());
            planned_ = true;
            next_replan_ = scn.emv.dispatch_s + period_s_;
        }
        return;
    }
    if (mode_ != RouteMode::Dynamic || !sim.emv_active() || sim.clock() < next_replan_ - 1e-9)
        return;
    while (next_replan_ <= sim.clock() + 1e-9)
        next_replan_ += period_s_;
    const auto &link = net_->link(sim.emv().link);
    NodeId at = link.to;
    if (at == scn.emv.destination)
        return;
    routing::TravelTimes T = sim.travel_times();
    std::vector<NodeId> plan;
    try {
        plan = routing::a_star_route(*net_, T, at, scn.emv.destination, link.from);
    } catch (const std::runtime_error &) {
        // only way on is back where it came from
        plan = routing::a_star_route(*net_, T, at, scn.emv.destination);
    }
    replace(std::move(plan));
    history_.push_back(route());
    ++replans_;
}

} // namespace emv::baselines
