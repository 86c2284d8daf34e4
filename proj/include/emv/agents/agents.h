#pragma once

#include "emv/net/network.h"
#include "emv/pressure/pressure.h"
#include "emv/routing/routing.h"
#include "emv/sim/simulator.h"

#include <vector>

namespace emv::agents {

using net::LinkId;
using net::Network;
using net::NodeId;

enum class Role { Normal, Primary, Secondary };
const char *role_name(Role role);

struct Roles {
    std::vector<Role> role;
    NodeId primary = net::kNone;
    NodeId secondary = net::kNone;
};

/// Primary: head of the EMV's current link. Secondary: where the EMV goes next
/// from there according to `table` (never straight back). All Normal when the EMV is not active.
Roles classify_roles(const Network &net, const sim::EmvState &emv, const routing::EtaTable &table,
                     const routing::TravelTimes &T);

/// Per-intersection observation layout: incoming lane densities, outgoing lane
/// densities, EMV distance per incoming link, ETA, next hop.
struct ObsLayout {
    int in_lanes = 0;
    int out_lanes = 0;
    int in_links = 0;
    int width() const { return in_lanes + out_lanes + in_links + 2; }
};

ObsLayout obs_layout(const Network &net, NodeId node);

inline constexpr double kEtaScale = 100.0;

/// Writes the local observation of `node` into out[0 .. layout.width()).
/// d_EMV is the remaining distance over link length, only at the Primary agent, -1 elsewhere.
/// ETA is scaled by 1/kEtaScale; next is the index of Next_i among the out links
/// scaled to [0, 1]. Both are -1 while the EMV is not active.
void observe(const sim::Simulator &sim, const Roles &roles, const routing::EtaTable &table, NodeId node,
             double *out);

/// Which pressure feeds the Normal and Secondary rewards.
enum class PressureKind { Average, PressLight };

struct RewardOptions {
    double beta = 0.5;
    PressureKind pressure = PressureKind::Average;
    bool primary_as_normal = false;
    bool secondary_as_normal = false;
};

/// Local reward of `node` given its role.
double local_reward(const sim::Simulator &sim, const Roles &roles, NodeId node, const RewardOptions &opt);

/// Secondary reward from its parts: -beta P - (1 - beta) mean occupancy of the EMV's next link.
double secondary_reward(double pressure, double mean_occupancy, double beta);

/// Spatial discount weights alpha^d(i,j); zero for unreachable pairs.
std::vector<std::vector<double>> discount_matrix(const Network &net, double alpha);

/// r~_i = sum_j alpha^d(i,j) r_j.
std::vector<double> adjusted_reward(const std::vector<double> &rewards, const Network &net, double alpha);
std::vector<double> adjusted_reward(const std::vector<double> &rewards,
                                    const std::vector<std::vector<double>> &weights);

/// R~ = r~ + gamma V(next); the bootstrap is dropped on terminal steps.
inline double local_return(double adjusted, double next_value, double gamma, bool terminal) {
    return terminal ? adjusted : adjusted + gamma * next_value;
}

} // namespace emv::agents
