#pragma once

#include "emv/net/network.h"

#include <limits>
#include <string>
#include <vector>

namespace emv::net {

/// One demand stream. Rates are vehicles per entry lane per hour.
struct FlowSpec {
    bool random_od = false;          // origin and destination drawn from border nodes
    std::vector<NodeId> origins;      // each origin is its own stream
    std::vector<NodeId> destinations; // drawn uniformly per arrival
    double rate = 0.0;
    double peak_rate = -1.0; // negative: no peak
    double peak_start_s = 0.0;
    double peak_end_s = 0.0;
    double start_s = 0.0;
    double end_s = std::numeric_limits<double>::infinity();

    double rate_at(double t) const;
    bool operator==(const FlowSpec &) const = default;
};

struct FlowSchedule {
    std::vector<FlowSpec> flows;
    bool operator==(const FlowSchedule &) const = default;
};

struct EmvDispatch {
    bool enabled = true;
    NodeId origin = kNone;
    NodeId destination = kNone;
    double dispatch_s = 0.0;
    bool operator==(const EmvDispatch &) const = default;
};

struct SimConfig {
    double horizon_s = 1200.0;
    double substep_s = 1.0;
    double mdp_step_s = 5.0;
    double saturation_rate = 0.5; // veh/s per discharging lane
    bool bernoulli_arrivals = false;
    double travel_time_clamp_s = 600.0;
    double replan_period_s = 50.0;
    int ft_green_steps = 1; // fixed-time green per phase, in MDP steps
    bool operator==(const SimConfig &) const = default;
};

struct TrainConfig {
    double gamma = 0.99;
    double alpha = 0.90;
    double entropy_coef = 0.01;
    double beta = 0.5;
    int batch_size = 128;
    double lr_policy = 1e-3;
    double lr_value = 1e-3;
    double lr_final_fraction = 0.0; // learning rate decays linearly to this fraction
    double grad_clip = 40.0;
    double init_std = 0.1;
    double reward_scale = 1.0;
    int epochs = 100;
    int obs_hidden = 128;
    int fp_hidden = 64;
    int lstm_hidden = 64;
    bool operator==(const TrainConfig &) const = default;
};

struct Scenario {
    std::string name;
    Network network;
    FlowSchedule flows;
    EmvDispatch emv;
    SimConfig sim;
    TrainConfig train;
};

/// Parses and validates a scenario; `source_name` is used in error messages.
Scenario parse_scenario(const std::string &text, const std::string &source_name);
Scenario load_scenario(const std::string &path);

/// Writes the scenario with an explicit edge list. parse_scenario(to_toml(s)) reproduces s.
std::string to_toml(const Scenario &scenario);

/// Structural equality of two networks (nodes, links and their attributes).
bool same_network(const Network &a, const Network &b);

} // namespace emv::net
