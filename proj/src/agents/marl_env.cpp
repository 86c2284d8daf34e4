#include "emv/agents/marl_env.h"

#include <algorithm>
#include <cmath>

namespace emv::agents {

MarlEnv::MarlEnv(const net::Scenario &scenario, RewardOptions options)
    : sim_(scenario, 1), options_(options), guide_(scenario.network) {
    const Network &net = scenario.network;
    for (NodeId i = 0; i < net.node_count(); ++i)
        layouts_.push_back(obs_layout(net, i));
    for (NodeId i = 0; i < net.node_count(); ++i) {
        int joint = layouts_[i].width();
        int fp = 0;
        for (NodeId j : net.node(i).neighbors) {
            joint += layouts_[j].width();
            fp += action_count(j);
        }
        joint_width_.push_back(joint);
        fingerprint_width_.push_back(fp);
    }
    sim_.set_emv_guide(&guide_);
    reset(1);
}

int MarlEnv::horizon_steps() const {
    const auto &c = sim_.scenario().sim;
    return static_cast<int>(std::lround(c.horizon_s / c.mdp_step_s));
}

void MarlEnv::reset(std::uint64_t seed) {
    sim_.reset(seed);
    live_ = routing::EtaTable{};
    frozen_ = routing::EtaTable{};
    frozen_T_.clear();
    frozen_link_ = net::kNone;
    steps_ = 0;
    rewards_.assign(agent_count(), 0.0);
    local_.resize(agent_count());
    refresh();
}

void MarlEnv::prepare_dispatch() {
    const auto &scn = sim_.scenario();
    if (!scn.emv.enabled || sim_.emv().status != sim::EmvStatus::Pending)
        return;
    if (scn.emv.dispatch_s >= sim_.clock() + scn.sim.mdp_step_s - 1e-9)
        return;
    routing::TravelTimes T = sim_.travel_times();
    live_ = routing::prepopulate(sim_.network(), T, scn.emv.destination);
    frozen_ = live_;
    frozen_T_ = T;
    guide_.set(frozen_, frozen_T_);
}

const std::vector<double> &MarlEnv::step(const std::vector<int> &actions) {
    prepare_dispatch();
    sim_.step(actions);
    ++steps_;
    if (sim_.emv_active()) {
        routing::TravelTimes T = sim_.travel_times();
        live_ = routing::relax_step(sim_.network(), live_, T);
        const sim::EmvState &emv = sim_.emv();
        if (emv.link != frozen_link_ && emv.position_m >= 0.5 * sim_.network().link(emv.link).length_m) {
            frozen_ = live_;
            frozen_T_ = T;
            frozen_link_ = emv.link;
            guide_.set(frozen_, frozen_T_);
        }
    }
    refresh();
    for (NodeId i = 0; i < agent_count(); ++i)
        rewards_[i] = local_reward(sim_, roles_, i, options_);
    return rewards_;
}

void MarlEnv::refresh() {
    if (sim_.emv_active())
        roles_ = classify_roles(sim_.network(), sim_.emv(), frozen_, frozen_T_);
    else
        roles_ = Roles{std::vector<Role>(agent_count(), Role::Normal), net::kNone, net::kNone};
    for (NodeId i = 0; i < agent_count(); ++i) {
        local_[i].resize(layouts_[i].width());
        observe(sim_, roles_, frozen_, i, local_[i].data());
    }
}

void MarlEnv::joint_observation(NodeId i, double *out) const {
    out = std::copy(local_[i].begin(), local_[i].end(), out);
    for (NodeId j : sim_.network().node(i).neighbors)
        out = std::copy(local_[j].begin(), local_[j].end(), out);
}

} // namespace emv::agents
