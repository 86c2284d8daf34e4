#pragma once

#include "emv/baselines/controllers.h"
#include "emv/baselines/route_planning.h"
#include "emv/ma2c/trainer.h"

#include <optional>
#include <string>
#include <vector>

namespace emv::exp {

enum class Combo { FtNoEmv, WStaticFt, WStaticMp, WDynamicFt, WDynamicMp, EmvLight };

const std::vector<std::string> &combo_ids();
/// Throws std::invalid_argument listing the valid ids.
Combo combo_by_name(const std::string &name);
std::string combo_name(Combo combo);

/// One evaluated episode.
struct RunMetrics {
    std::string label;
    std::uint64_t seed = 0;
    std::optional<double> t_emv; // absent without an EMV or when it did not arrive
    double t_emv_censored = 0.0;  // t_emv, or horizon - dispatch when it did not arrive
    std::optional<double> t_avg;
    int emergency_lanes = 0;
    int emv_links = 0;
    long spawned = 0;
    long completed = 0;
    long deferred = 0;
    int replans = 0;
    std::vector<net::NodeId> emv_route;
};

struct EpisodeTrace {
    std::vector<sim::SimEvent> events;
    std::vector<ma2c::RouteTraceRow> route;
};

/// Runs one non-learning combo for a full horizon on simulator seed `seed`.
RunMetrics run_baseline(const net::Scenario &scenario, Combo combo, std::uint64_t seed, EpisodeTrace *trace = nullptr);

/// Greedy evaluation of a trained model on simulator seed `seed`.
RunMetrics run_emvlight(ma2c::Trainer &trainer, std::uint64_t seed, EpisodeTrace *trace = nullptr);

/// Seed offsets for fixed-time controllers, independent of the traffic stream.
std::uint64_t offset_seed(std::uint64_t seed);

} // namespace emv::exp
