#include "emv/agents/agents.h"

#include <algorithm>
#include <cmath>

namespace emv::agents {

const char *role_name(Role role) {
    switch (role) {
    case Role::Normal: return "normal";
    case Role::Primary: return "primary";
    case Role::Secondary: return "secondary";
    }
    return "?";
}

Roles classify_roles(const Network &net, const sim::EmvState &emv, const routing::EtaTable &table,
                     const routing::TravelTimes &T) {
    Roles r;
    r.role.assign(net.node_count(), Role::Normal);
    if (emv.status != sim::EmvStatus::Active)
        return r;
    const net::LinkSpec &link = net.link(emv.link);
    r.primary = link.to;
    r.role[r.primary] = Role::Primary;
    if (r.primary != table.destination && table.next[r.primary] != net::kNone) {
        r.secondary = routing::next_hop_no_uturn(net, table, T, r.primary, link.from);
        r.role[r.secondary] = Role::Secondary;
    }
    return r;
}

ObsLayout obs_layout(const Network &net, NodeId node) {
    const auto &spec = net.node(node);
    return ObsLayout{static_cast<int>(spec.incoming_lanes.size()), static_cast<int>(spec.outgoing_lanes.size()),
                     static_cast<int>(spec.in_links.size())};
}

void observe(const sim::Simulator &sim, const Roles &roles, const routing::EtaTable &table, NodeId node,
             double *out) {
    const Network &net = sim.network();
    const auto &spec = net.node(node);
    const auto &x = sim.occupancy();
    for (net::LaneId l : spec.incoming_lanes)
        *out++ = static_cast<double>(x[l]) / net.link(net.lane(l).link).lane_capacity;
    for (net::LaneId l : spec.outgoing_lanes)
        *out++ = static_cast<double>(x[l]) / net.link(net.lane(l).link).lane_capacity;
    const sim::EmvState &emv = sim.emv();
    for (LinkId l : spec.in_links) {
        if (roles.primary == node && emv.link == l) {
            const double len = net.link(l).length_m;
            *out++ = (len - emv.position_m) / len;
        } else {
            *out++ = -1.0;
        }
    }
    if (emv.status != sim::EmvStatus::Active || table.eta.empty()) {
        *out++ = -1.0;
        *out++ = -1.0;
        return;
    }
    double eta = table.eta[node];
    *out++ = std::isfinite(eta) ? eta / kEtaScale : -1.0;
    NodeId next = table.next[node];
    double code = -1.0;
    if (next != net::kNone) {
        int idx = 0;
        for (std::size_t k = 0; k < spec.out_links.size(); ++k)
            if (net.link(spec.out_links[k]).to == next)
                idx = static_cast<int>(k);
        code = spec.out_links.size() > 1 ? static_cast<double>(idx) / (spec.out_links.size() - 1) : 0.0;
    }
    *out++ = code;
}

double secondary_reward(double pressure, double mean_occupancy, double beta) {
    return -beta * pressure - (1.0 - beta) * mean_occupancy;
}

namespace {

double pressure_of(const sim::Simulator &sim, NodeId node, PressureKind kind) {
    if (kind == PressureKind::PressLight)
        return pressure::presslight_pressure(sim.network(), sim.occupancy(), node).intersection;
    return pressure::intersection_pressure(sim.network(), sim.occupancy(), node);
}

} // namespace

double local_reward(const sim::Simulator &sim, const Roles &roles, NodeId node, const RewardOptions &opt) {
    Role role = roles.role[node];
    if (role == Role::Primary && opt.primary_as_normal)
        role = Role::Normal;
    if (role == Role::Secondary && opt.secondary_as_normal)
        role = Role::Normal;
    switch (role) {
    case Role::Primary:
        return -1.0;
    case Role::Secondary: {
        const Network &net = sim.network();
        LinkId link = net.link_between(roles.primary, node);
        double occ = 0.0;
        if (link != net::kNone) {
            const auto &spec = net.link(link);
            for (int i = 0; i < spec.lane_count; ++i)
                occ += static_cast<double>(sim.lane_occupancy(spec.lane(i))) / spec.lane_capacity;
            occ /= spec.lane_count;
        }
        return secondary_reward(pressure_of(sim, node, opt.pressure), occ, opt.beta);
    }
    case Role::Normal:
        break;
    }
    return -pressure_of(sim, node, opt.pressure);
}

std::vector<std::vector<double>> discount_matrix(const Network &net, double alpha) {
    const int n = net.node_count();
    std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
    for (NodeId i = 0; i < n; ++i)
        for (NodeId j = 0; j < n; ++j) {
            int d = net.graph_distance(i, j);
            if (d != net::kUnreachable)
                w[i][j] = d == 0 ? 1.0 : std::pow(alpha, d);
        }
    return w;
}

std::vector<double> adjusted_reward(const std::vector<double> &rewards,
                                    const std::vector<std::vector<double>> &weights) {
    std::vector<double> out(rewards.size(), 0.0);
    for (std::size_t i = 0; i < rewards.size(); ++i)
        for (std::size_t j = 0; j < rewards.size(); ++j)
            out[i] += weights[i][j] * rewards[j];
    return out;
}

std::vector<double> adjusted_reward(const std::vector<double> &rewards, const Network &net, double alpha) {
    return adjusted_reward(rewards, discount_matrix(net, alpha));
}

} // namespace emv::agents
