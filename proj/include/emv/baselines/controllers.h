#pragma once

#include "emv/routing/routing.h"
#include "emv/sim/simulator.h"

#include <memory>
#include <vector>

namespace emv::baselines {

using net::Network;
using net::NodeId;

/// Cyclic phase index at `clock`. green_s[k] is the green time of phase k, each a
/// positive whole multiple of step_s. Throws std::invalid_argument when the split
/// does not cover `phase_count` phases or is not step-aligned.
int fixed_time_phase(int phase_count, const std::vector<double> &green_s, double clock, double offset,
                     double step_s);

/// Phase with the largest signed phase pressure, lowest index on ties.
int max_pressure_phase(const Network &net, const std::vector<int> &occupancy, NodeId node);

/// Signal controller deciding one phase per intersection for the next MDP step.
class Controller {
public:
    virtual ~Controller() = default;
    /// Called at the start of every episode.
    virtual void reset(sim::Rng &rng) { (void)rng; }
    virtual std::vector<int> decide(const sim::Simulator &sim) = 0;
};

class FixedTimeController : public Controller {
public:
    /// Every phase gets green_steps MDP steps.
    FixedTimeController(const Network &net, double step_s, int green_steps = 1);
    /// Offsets are drawn here, a whole number of steps in [0, cycle).
    void reset(sim::Rng &rng) override;
    std::vector<int> decide(const sim::Simulator &sim) override;
    const std::vector<double> &offsets() const { return offset_; }
    void set_offsets(std::vector<double> offsets) { offset_ = std::move(offsets); }

private:
    const Network *net_;
    double step_s_;
    std::vector<std::vector<double>> green_;
    std::vector<double> offset_;
};

class MaxPressureController : public Controller {
public:
    explicit MaxPressureController(const Network &net) : net_(&net) {}
    std::vector<int> decide(const sim::Simulator &sim) override;

private:
    const Network *net_;
};

/// Walabi-style green wave: while the EMV is on an incoming link of an
/// intersection, that intersection shows a phase serving the EMV's next movement
/// (the base phase if it already does, else the lowest such phase). Everything
/// else follows the base controller.
class GreenWaveController : public Controller {
public:
    GreenWaveController(const Network &net, std::unique_ptr<Controller> base, const routing::RouteGuide *route);
    void reset(sim::Rng &rng) override { base_->reset(rng); }
    std::vector<int> decide(const sim::Simulator &sim) override;
    /// Intersection overridden by the last decide(), kNone if none.
    NodeId engaged() const { return engaged_; }
    Controller &base() { return *base_; }

private:
    const Network *net_;
    std::unique_ptr<Controller> base_;
    const routing::RouteGuide *route_;
    NodeId engaged_ = net::kNone;
};

} // namespace emv::baselines
