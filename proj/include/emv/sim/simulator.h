#pragma once

#include "emv/net/scenario.h"

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace emv::sim {

using net::LaneId;
using net::LinkId;
using net::NodeId;

struct EmvSpeed {
    double speed = 0.0;
    bool lane_formed = false;
};

/// EMV speed on a link holding n non-EMV vehicles: s_f when an emergency lane
/// can form (n <= k + C - k/l), otherwise the link's mean speed s_i.
EmvSpeed emv_speed(int n, int k, int l, double c_ec, double s_i, double s_f);

/// Uniform draws on top of mt19937_64 that do not depend on the standard
/// library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 1) : engine_(seed) {}
    std::uint64_t next() { return engine_(); }
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);
    double normal(); // Box-Muller, no cached second value
    std::mt19937_64 &engine() { return engine_; }
    const std::mt19937_64 &engine() const { return engine_; }

private:
    std::mt19937_64 engine_;
};

/// Decides where the EMV goes when it reaches the stop line at `at`.
class EmvGuide {
public:
    virtual ~EmvGuide() = default;
    virtual NodeId next_node(NodeId at, NodeId came_from) = 0;
};

enum class EventType { Spawn, Cross, Complete, Defer, EmvDispatch, EmvEnterLink, EmvEmergencyLane, EmvArrive };
const char *event_name(EventType type);

struct SimEvent {
    double time = 0.0;
    EventType type = EventType::Spawn;
    int vehicle = -1;
    LaneId lane = net::kNone;
};

struct Vehicle {
    int id = -1;
    NodeId origin = net::kNone;
    NodeId destination = net::kNone;
    double spawn_time = 0.0;
    double completion_time = -1.0;
    int route = -1;     // index into the route cache
    int route_pos = 0;  // index of the current link in the route
    LaneId lane = net::kNone;
    double ready_time = 0.0; // earliest time at the stop line
};

enum class EmvStatus { Pending, Active, Arrived };

struct EmvState {
    EmvStatus status = EmvStatus::Pending;
    LinkId link = net::kNone;
    LaneId lane = net::kNone;
    double position_m = 0.0;
    double speed = 0.0;
    NodeId came_from = net::kNone;
    double dispatch_time = 0.0;
    double arrival_time = -1.0;
    double link_entry_time = 0.0;
    bool link_all_full_speed = true;
    int emergency_lanes = 0; // links traversed entirely at s_f
    std::vector<NodeId> visited; // intersections in order, origin first
    std::vector<bool> link_full_speed; // per traversed link
};

struct Metrics {
    std::optional<double> t_emv;
    std::optional<double> t_avg;
    long spawned = 0;
    long completed = 0;
    long in_network = 0;
    long deferred = 0; // arrivals that had to wait for room
    int emergency_lanes = 0;
    int emv_links = 0;
};

class Simulator {
public:
    /// The scenario must outlive the simulator.
    Simulator(const net::Scenario &scenario, std::uint64_t seed);

    void reset(std::uint64_t seed);

    const net::Network &network() const { return *net_; }
    const net::Scenario &scenario() const { return *scenario_; }
    double clock() const { return clock_; }
    bool done() const { return clock_ >= scenario_->sim.horizon_s - 1e-9; }

    /// Holds the given phase indices (into each node's phase list) for one
    /// MDP step. Throws std::invalid_argument before touching state if any is invalid.
    void step(const std::vector<int> &phases);
    /// Advances a single sub-step with the current phases.
    void substep();
    void set_phases(const std::vector<int> &phases);
    const std::vector<int> &phases() const { return phase_; }

    void set_emv_guide(EmvGuide *guide) { guide_ = guide; }
    void set_event_sink(std::vector<SimEvent> *sink) { events_ = sink; }

    /// x(l): vehicles on the lane, the EMV included.
    int lane_occupancy(LaneId lane) const;
    const std::vector<int> &occupancy() const { return occupancy_; }
    /// n_i: non-EMV vehicles on the link.
    int link_vehicles(LinkId link) const { return link_count_[link]; }
    /// Mean current speed of the link's non-EMV vehicles (queued 0, moving free-flow).
    double link_mean_speed(LinkId link) const;
    EmvSpeed link_emv_speed(LinkId link) const;
    /// EMV traversal time of the link under current conditions, clamped.
    double link_travel_time(LinkId link) const;
    std::vector<double> travel_times() const;

    const EmvState &emv() const { return emv_; }
    bool emv_active() const { return emv_.status == EmvStatus::Active; }
    Metrics metrics() const;
    bool conserved() const;
    long pending_arrivals() const;

    const std::vector<Vehicle> &vehicles() const { return vehicles_; }
    const std::deque<int> &lane_queue(LaneId lane) const { return queues_[lane]; }
    Rng &rng() { return rng_; }

    /// Places a vehicle on a lane directly (tests and fixtures); returns its id.
    int inject_vehicle(NodeId origin, NodeId destination, double ready_delay = -1.0);

private:
    struct Stream {
        const net::FlowSpec *flow = nullptr;
        NodeId origin = net::kNone; // kNone for random OD
        double lanes = 1.0;
        double carry = 0.0;
        std::deque<std::pair<NodeId, NodeId>> pending;
        std::deque<int> pending_route;
    };

    void spawn(double t, double dt);
    bool try_enter(NodeId origin, NodeId destination, int route, double t);
    /// Draws one of the equal-length shortest paths uniformly.
    int route_for(NodeId origin, NodeId destination);
    LaneId pick_lane(LinkId link, LinkId next_link, bool for_emv) const;
    void discharge(double t, double dt);
    void move_emv(double t, double dt);
    void dispatch_emv(double t);
    void emv_enter_link(LinkId link, double t);
    void log(double t, EventType type, int vehicle, LaneId lane);
    LinkId next_link_of(const Vehicle &v) const;

    const net::Scenario *scenario_;
    const net::Network *net_;
    Rng rng_{1};
    double clock_ = 0.0;
    long substeps_ = 0;
    std::vector<int> phase_;
    std::vector<Vehicle> vehicles_;
    std::vector<std::deque<int>> queues_;
    std::vector<int> occupancy_;   // x(l) including EMV
    std::vector<int> link_count_;  // non-EMV per link
    std::vector<double> credit_;   // discharge credit per lane
    std::vector<Stream> streams_;
    std::vector<NodeId> border_;
    std::vector<std::vector<LinkId>> routes_;
    std::map<std::pair<NodeId, NodeId>, std::vector<int>> route_index_;
    EmvState emv_;
    EmvGuide *guide_ = nullptr;
    std::vector<SimEvent> *events_ = nullptr;
    long spawned_ = 0;
    long completed_ = 0;
    long deferred_ = 0;
    double trip_time_sum_ = 0.0;
};

/// Writes events as CSV with header time_s,event_type,vehicle_id,lane_id.
void write_events_csv(const std::vector<SimEvent> &events, const std::string &path);

} // namespace emv::sim
