#include "emv/baselines/controllers.h"

#include "emv/pressure/pressure.h"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace emv::baselines {

int fixed_time_phase(int phase_count, const std::vector<double> &green_s, double clock, double offset,
                     double step_s) {
    if (phase_count < 1 || static_cast<int>(green_s.size()) != phase_count)
        throw std::invalid_argument("green split has " + std::to_string(green_s.size()) + " entries for " +
                                    std::to_string(phase_count) + " phases");
    long cycle = 0;
    std::vector<long> steps;
    for (double g : green_s) {
        double k = g / step_s;
        if (g <= 0.0 || std::abs(k - std::round(k)) > 1e-9)
            throw std::invalid_argument("green time " + std::to_string(g) + " s is not a positive multiple of " +
                                        std::to_string(step_s) + " s");
        steps.push_back(std::lround(k));
        cycle += steps.back();
    }
    long t = std::lround(std::floor((clock + offset) / step_s + 1e-9)) % cycle;
    if (t < 0)
        t += cycle;
    for (int k = 0; k < phase_count; ++k) {
        if (t < steps[k])
            return k;
        t -= steps[k];
    }
    return phase_count - 1;
}

int max_pressure_phase(const Network &net, const std::vector<int> &occupancy, NodeId node) {
    const auto &phases = net.node(node).phases;
    int best = 0;
    double best_p = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < static_cast<int>(phases.size()); ++k) {
        double p = pressure::phase_pressure(net, occupancy, node, k);
        if (p > best_p) {
            best_p = p;
            best = k;
        }
    }
    return best;
}

FixedTimeController::FixedTimeController(const Network &net, double step_s, int green_steps)
    : net_(&net), step_s_(step_s) {
    if (green_steps < 1)
        throw std::invalid_argument("green_steps must be positive");
    for (const auto &n : net.nodes())
        green_.emplace_back(n.phases.size(), green_steps * step_s);
    offset_.assign(net.node_count(), 0.0);
}

void FixedTimeController::reset(sim::Rng &rng) {
    for (NodeId i = 0; i < net_->node_count(); ++i) {
        double cycle = std::accumulate(green_[i].begin(), green_[i].end(), 0.0);
        auto steps = static_cast<std::uint64_t>(std::lround(cycle / step_s_));
        offset_[i] = static_cast<double>(rng.below(steps)) * step_s_;
    }
}

std::vector<int> FixedTimeController::decide(const sim::Simulator &sim) {
    std::vector<int> out(net_->node_count());
    for (NodeId i = 0; i < net_->node_count(); ++i)
        out[i] = fixed_time_phase(static_cast<int>(green_[i].size()), green_[i], sim.clock(), offset_[i], step_s_);
    return out;
}

std::vector<int> MaxPressureController::decide(const sim::Simulator &sim) {
    std::vector<int> out(net_->node_count());
    for (NodeId i = 0; i < net_->node_count(); ++i)
        out[i] = max_pressure_phase(*net_, sim.occupancy(), i);
    return out;
}

GreenWaveController::GreenWaveController(const Network &net, std::unique_ptr<Controller> base,
                                         const routing::RouteGuide *route)
    : net_(&net), base_(std::move(base)), route_(route) {
    // every turning movement must be served by some phase
    for (const auto &n : net.nodes())
        for (const auto &m : n.movements) {
            bool served = false;
            for (int k = 0; k < static_cast<int>(n.phases.size()) && !served; ++k)
                served = net.phase_permits(n.id, k, m.from_link, m.to_link);
            if (!served)
                throw std::invalid_argument("intersection " + std::to_string(n.id) +
                                            " has a movement no phase serves; pre-emption impossible");
        }
}

std::vector<int> GreenWaveController::decide(const sim::Simulator &sim) {
    std::vector<int> out = base_->decide(sim);
    engaged_ = net::kNone;
    if (!sim.emv_active() || !route_)
        return out;
    const auto &link = net_->link(sim.emv().link);
    NodeId at = link.to;
    NodeId next = route_->peek(at);
    if (next == net::kNone)
        return out; // heading for the destination stop line
    net::LinkId out_link = net_->link_between(at, next);
    if (out_link == net::kNone)
        return out;
    engaged_ = at;
    if (net_->phase_permits(at, out[at], link.id, out_link))
        return out;
    const int n = static_cast<int>(net_->node(at).phases.size());
    for (int k = 0; k < n; ++k)
        if (net_->phase_permits(at, k, link.id, out_link)) {
            out[at] = k;
            return out;
        }
    throw std::logic_error("no phase serves the EMV at intersection " + std::to_string(at));
}

} // namespace emv::baselines
