#pragma once

#include "emv/agents/agents.h"

#include <cstdint>
#include <vector>

namespace emv::agents {

/// Multi-agent view of one simulation: one signal agent per intersection.
/// Routing runs alongside: Dijkstra at dispatch, one relaxation round per MDP
/// step, and the table seen by the EMV and by observations is refreshed once
/// per link, when the EMV passes half of it.
class MarlEnv {
public:
    MarlEnv(const net::Scenario &scenario, RewardOptions options);
    MarlEnv(const MarlEnv &) = delete;
    MarlEnv &operator=(const MarlEnv &) = delete;

    void reset(std::uint64_t seed);
    /// Applies one action per agent for one MDP step; returns the local rewards.
    const std::vector<double> &step(const std::vector<int> &actions);
    bool done() const { return sim_.done(); }
    int step_index() const { return steps_; }
    int horizon_steps() const;

    int agent_count() const { return sim_.network().node_count(); }
    int action_count(NodeId i) const { return static_cast<int>(sim_.network().node(i).phases.size()); }
    const ObsLayout &layout(NodeId i) const { return layouts_[i]; }
    int local_width(NodeId i) const { return layouts_[i].width(); }
    /// Own observation followed by the neighbors', ascending id.
    int joint_width(NodeId i) const { return joint_width_[i]; }
    int fingerprint_width(NodeId i) const { return fingerprint_width_[i]; }
    void joint_observation(NodeId i, double *out) const;
    const std::vector<double> &local_observation(NodeId i) const { return local_[i]; }

    const Roles &roles() const { return roles_; }
    const std::vector<double> &rewards() const { return rewards_; }
    const sim::Simulator &sim() const { return sim_; }
    sim::Simulator &sim() { return sim_; }
    const routing::EtaTable &live_table() const { return live_; }
    const routing::EtaTable &frozen_table() const { return frozen_; }
    /// Link on which the frozen table was last refreshed (kNone before the first refresh).
    LinkId frozen_link() const { return frozen_link_; }
    const RewardOptions &reward_options() const { return options_; }

private:
    void prepare_dispatch();
    void refresh();

    sim::Simulator sim_;
    RewardOptions options_;
    routing::EtaGuide guide_;
    std::vector<ObsLayout> layouts_;
    std::vector<int> joint_width_;
    std::vector<int> fingerprint_width_;
    routing::EtaTable live_;
    routing::EtaTable frozen_;
    routing::TravelTimes frozen_T_;
    LinkId frozen_link_ = net::kNone;
    Roles roles_;
    std::vector<std::vector<double>> local_;
    std::vector<double> rewards_;
    int steps_ = 0;
};

} // namespace emv::agents
