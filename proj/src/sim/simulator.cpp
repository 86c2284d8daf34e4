#include "emv/sim/simulator.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace emv::sim {

EmvSpeed emv_speed(int n, int k, int l, double c_ec, double s_i, double s_f) {
    // n <= k + C - k/l, multiplied through by l so integer inputs compare exactly
    bool formed = static_cast<double>(n) * l <= static_cast<double>(k) * l + c_ec * l - k;
    return formed ? EmvSpeed{s_f, true} : EmvSpeed{s_i, false};
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0)
        throw std::invalid_argument("Rng::below(0)");
    std::uint64_t threshold = (0 - n) % n;
    while (true) {
        std::uint64_t x = engine_();
        if (x >= threshold)
            return x % n;
    }
}

double Rng::normal() {
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

const char *event_name(EventType type) {
    switch (type) {
    case EventType::Spawn: return "spawn";
    case EventType::Cross: return "cross";
    case EventType::Complete: return "complete";
    case EventType::Defer: return "defer";
    case EventType::EmvDispatch: return "emv_dispatch";
    case EventType::EmvEnterLink: return "emv_enter_link";
    case EventType::EmvEmergencyLane: return "emv_emergency_lane";
    case EventType::EmvArrive: return "emv_arrive";
    }
    return "unknown";
}

Simulator::Simulator(const net::Scenario &scenario, std::uint64_t seed)
    : scenario_(&scenario), net_(&scenario.network) {
    const auto &cfg = scenario.sim;
    double ratio = cfg.mdp_step_s / cfg.substep_s;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1)
        throw net::ConfigError("sub-step must divide the MDP step");
    border_ = net_->border_nodes();
    reset(seed);
}

void Simulator::reset(std::uint64_t seed) {
    rng_ = Rng(seed);
    clock_ = 0.0;
    substeps_ = 0;
    phase_.assign(net_->node_count(), 0);
    vehicles_.clear();
    queues_.assign(net_->lane_count(), {});
    occupancy_.assign(net_->lane_count(), 0);
    link_count_.assign(net_->link_count(), 0);
    credit_.assign(net_->lane_count(), 0.0);
    spawned_ = completed_ = deferred_ = 0;
    trip_time_sum_ = 0.0;

    streams_.clear();
    for (const net::FlowSpec &flow : scenario_->flows.flows) {
        auto entry_lanes = [&](NodeId origin) {
            int lanes = 1;
            for (LinkId l : net_->node(origin).out_links)
                lanes = std::max(lanes, net_->link(l).lane_count);
            return static_cast<double>(lanes);
        };
        if (flow.random_od) {
            Stream s;
            s.flow = &flow;
            for (NodeId b : border_)
                s.lanes += entry_lanes(b);
            s.lanes -= 1.0;
            streams_.push_back(std::move(s));
        } else {
            for (NodeId o : flow.origins) {
                Stream s;
                s.flow = &flow;
                s.origin = o;
                s.lanes = entry_lanes(o);
                streams_.push_back(std::move(s));
            }
        }
    }

    emv_ = EmvState{};
    emv_.dispatch_time = scenario_->emv.dispatch_s;
}

void Simulator::set_phases(const std::vector<int> &phases) {
    if (phases.size() != phase_.size())
        throw std::invalid_argument("expected one phase per intersection (" + std::to_string(phase_.size()) +
                                    "), got " + std::to_string(phases.size()));
    for (std::size_t i = 0; i < phases.size(); ++i)
        if (phases[i] < 0 || phases[i] >= static_cast<int>(net_->node(static_cast<NodeId>(i)).phases.size()))
            throw std::invalid_argument("invalid phase " + std::to_string(phases[i]) + " for intersection " +
                                        std::to_string(i));
    phase_ = phases;
}

void Simulator::step(const std::vector<int> &phases) {
    set_phases(phases);
    int n = static_cast<int>(std::lround(scenario_->sim.mdp_step_s / scenario_->sim.substep_s));
    for (int i = 0; i < n; ++i)
        substep();
}

void Simulator::substep() {
    const double dt = scenario_->sim.substep_s;
    const double t = clock_;
    const auto &emv_cfg = scenario_->emv;
    if (emv_cfg.enabled && emv_.status == EmvStatus::Pending && t >= emv_cfg.dispatch_s - 1e-9)
        dispatch_emv(t);
    spawn(t, dt);
    discharge(t, dt);
    move_emv(t, dt);
    ++substeps_;
    clock_ = static_cast<double>(substeps_) * dt;
}

void Simulator::log(double t, EventType type, int vehicle, LaneId lane) {
    if (events_)
        events_->push_back(SimEvent{t, type, vehicle, lane});
}

int Simulator::route_for(NodeId origin, NodeId destination) {
    auto key = std::make_pair(origin, destination);
    auto it = route_index_.find(key);
    if (it == route_index_.end()) {
        std::vector<int> ids;
        for (auto &path : net_->shortest_distance_paths(origin, destination)) {
            ids.push_back(static_cast<int>(routes_.size()));
            routes_.push_back(std::move(path));
        }
        it = route_index_.emplace(key, std::move(ids)).first;
    }
    const std::vector<int> &ids = it->second;
    return ids.size() == 1 ? ids.front() : ids[rng_.below(ids.size())];
}

LaneId Simulator::pick_lane(LinkId link, LinkId next_link, bool for_emv) const {
    const net::LinkSpec &spec = net_->link(link);
    unsigned need = 0;
    if (next_link != net::kNone) {
        net::Turn turn;
        if (net::classify_turn(spec.heading, net_->link(next_link).heading, turn))
            need = net::turn_bit(turn);
    }
    LaneId best = net::kNone;
    for (int pass = 0; pass < 2 && best == net::kNone; ++pass) {
        for (int i = 0; i < spec.lane_count; ++i) {
            LaneId lane = spec.lane(i);
            if (pass == 0 && need && !(net_->lane(lane).turns & need))
                continue;
            if (!for_emv && static_cast<int>(queues_[lane].size()) >= spec.lane_capacity)
                continue;
            if (best == net::kNone || occupancy_[lane] < occupancy_[best])
                best = lane;
        }
        // the EMV may use any lane if none is marked for its turn
        if (!for_emv)
            break;
    }
    return best;
}

bool Simulator::try_enter(NodeId origin, NodeId destination, int r, double t) {
    const auto &route = routes_[r];
    LinkId first = route.front();
    LinkId next = route.size() > 1 ? route[1] : net::kNone;
    LaneId lane = pick_lane(first, next, false);
    if (lane == net::kNone)
        return false;
    Vehicle v;
    v.id = static_cast<int>(vehicles_.size());
    v.origin = origin;
    v.destination = destination;
    v.spawn_time = t;
    v.route = r;
    v.route_pos = 0;
    v.lane = lane;
    v.ready_time = t + net_->link(first).free_flow_time();
    vehicles_.push_back(v);
    queues_[lane].push_back(v.id);
    ++occupancy_[lane];
    ++link_count_[first];
    ++spawned_;
    log(t, EventType::Spawn, v.id, lane);
    return true;
}

int Simulator::inject_vehicle(NodeId origin, NodeId destination, double ready_delay) {
    if (!try_enter(origin, destination, route_for(origin, destination), clock_))
        return -1;
    Vehicle &v = vehicles_.back();
    if (ready_delay >= 0.0)
        v.ready_time = clock_ + ready_delay;
    return v.id;
}

void Simulator::spawn(double t, double dt) {
    for (Stream &s : streams_) {
        double rate = s.flow->rate_at(t) * s.lanes / 3600.0;
        int arrivals = 0;
        if (rate > 0.0) {
            double expected = rate * dt;
            if (scenario_->sim.bernoulli_arrivals) {
                arrivals = static_cast<int>(std::floor(expected));
                if (rng_.uniform() < expected - arrivals)
                    ++arrivals;
            } else {
                s.carry += expected;
                while (s.carry >= 1.0 - 1e-12) {
                    s.carry -= 1.0;
                    ++arrivals;
                }
            }
        }
        for (int a = 0; a < arrivals; ++a) {
            NodeId o = s.origin;
            NodeId d = net::kNone;
            if (s.flow->random_od) {
                if (border_.size() < 2)
                    break;
                o = border_[rng_.below(border_.size())];
                do {
                    d = border_[rng_.below(border_.size())];
                } while (d == o);
            } else {
                const auto &dests = s.flow->destinations;
                bool any = std::any_of(dests.begin(), dests.end(), [&](NodeId x) { return x != o; });
                if (!any)
                    break;
                do {
                    d = dests[rng_.below(dests.size())];
                } while (d == o);
            }
            s.pending.emplace_back(o, d);
            s.pending_route.push_back(route_for(o, d));
        }
        while (!s.pending.empty() &&
               try_enter(s.pending.front().first, s.pending.front().second, s.pending_route.front(), t)) {
            s.pending.pop_front();
            s.pending_route.pop_front();
        }
        long waiting_new = std::min<long>(arrivals, static_cast<long>(s.pending.size()));
        for (long k = 0; k < waiting_new; ++k)
            log(t, EventType::Defer, -1, net::kNone);
        deferred_ += waiting_new;
    }
}

LinkId Simulator::next_link_of(const Vehicle &v) const {
    const auto &route = routes_[v.route];
    return v.route_pos + 1 < static_cast<int>(route.size()) ? route[v.route_pos + 1] : net::kNone;
}

void Simulator::discharge(double t, double dt) {
    const double sat = scenario_->sim.saturation_rate;
    const double cap = std::max(1.0, sat * dt);
    for (const net::IntersectionSpec &node : net_->nodes()) {
        const int phase = phase_[node.id];
        for (LaneId lane : node.incoming_lanes) {
            credit_[lane] = std::min(cap, credit_[lane] + sat * dt);
            auto &q = queues_[lane];
            while (!q.empty()) {
                Vehicle &v = vehicles_[q.front()];
                if (v.ready_time >= t + dt)
                    break;
                const double when = std::max(v.ready_time, t);
                const LinkId here = routes_[v.route][v.route_pos];
                LinkId next = next_link_of(v);
                if (next == net::kNone) {
                    q.pop_front();
                    --occupancy_[lane];
                    --link_count_[here];
                    v.completion_time = when;
                    v.lane = net::kNone;
                    ++completed_;
                    trip_time_sum_ += when - v.spawn_time;
                    log(when, EventType::Complete, v.id, lane);
                    continue;
                }
                if (credit_[lane] < 1.0 || !net_->phase_permits_lane(node.id, phase, lane, next))
                    break;
                const auto &route = routes_[v.route];
                LinkId after = v.route_pos + 2 < static_cast<int>(route.size()) ? route[v.route_pos + 2] : net::kNone;
                LaneId target = pick_lane(next, after, false);
                if (target == net::kNone)
                    break;
                q.pop_front();
                credit_[lane] -= 1.0;
                --occupancy_[lane];
                --link_count_[here];
                ++v.route_pos;
                v.lane = target;
                v.ready_time = when + net_->link(next).free_flow_time();
                queues_[target].push_back(v.id);
                ++occupancy_[target];
                ++link_count_[next];
                log(when, EventType::Cross, v.id, target);
            }
        }
    }
}

void Simulator::dispatch_emv(double t) {
    const auto &cfg = scenario_->emv;
    emv_.status = EmvStatus::Active;
    emv_.dispatch_time = t;
    emv_.visited = {cfg.origin};
    log(t, EventType::EmvDispatch, -1, net::kNone);
    NodeId next = guide_ ? guide_->next_node(cfg.origin, net::kNone)
                         : net_->link(net_->shortest_distance_path(cfg.origin, cfg.destination).front()).to;
    LinkId link = net_->link_between(cfg.origin, next);
    if (link == net::kNone)
        throw std::logic_error("EMV guide chose a non-adjacent intersection");
    emv_enter_link(link, t);
}

void Simulator::emv_enter_link(LinkId link, double t) {
    if (emv_.lane != net::kNone)
        --occupancy_[emv_.lane];
    emv_.link = link;
    emv_.lane = pick_lane(link, net::kNone, true);
    ++occupancy_[emv_.lane];
    emv_.came_from = net_->link(link).from;
    emv_.position_m = 0.0;
    emv_.link_entry_time = t;
    emv_.link_all_full_speed = true;
    log(t, EventType::EmvEnterLink, -1, emv_.lane);
}

void Simulator::move_emv(double t, double dt) {
    if (emv_.status != EmvStatus::Active)
        return;
    const double clamp = scenario_->sim.travel_time_clamp_s;
    double budget = dt;
    double now = t;
    while (budget > 1e-12) {
        const net::LinkSpec &link = net_->link(emv_.link);
        if (emv_.position_m < link.length_m) {
            EmvSpeed s = link_emv_speed(emv_.link);
            if (!s.lane_formed)
                emv_.link_all_full_speed = false;
            double speed = std::max(s.speed, link.length_m / clamp);
            emv_.speed = speed;
            double remaining = link.length_m - emv_.position_m;
            if (speed * budget < remaining) {
                emv_.position_m += speed * budget;
                return;
            }
            double used = remaining / speed;
            emv_.position_m = link.length_m;
            budget -= used;
            now += used;
        }

        // at the stop line
        const NodeId at = link.to;
        auto finish_link = [&] {
            emv_.link_full_speed.push_back(emv_.link_all_full_speed);
            if (emv_.link_all_full_speed) {
                ++emv_.emergency_lanes;
                log(now, EventType::EmvEmergencyLane, -1, emv_.lane);
            }
            emv_.visited.push_back(at);
        };
        if (at == scenario_->emv.destination) {
            finish_link();
            --occupancy_[emv_.lane];
            emv_.lane = net::kNone;
            emv_.status = EmvStatus::Arrived;
            emv_.arrival_time = now;
            emv_.speed = 0.0;
            log(now, EventType::EmvArrive, -1, net::kNone);
            return;
        }
        NodeId next = guide_ ? guide_->next_node(at, link.from)
                             : net_->link(net_->shortest_distance_path(at, scenario_->emv.destination).front()).to;
        LinkId out = net_->link_between(at, next);
        if (out == net::kNone)
            throw std::logic_error("EMV guide chose a non-adjacent intersection");
        if (!net_->phase_permits(at, phase_[at], emv_.link, out)) {
            emv_.speed = 0.0;
            return;
        }
        finish_link();
        emv_enter_link(out, now);
    }
}

int Simulator::lane_occupancy(LaneId lane) const { return occupancy_[lane]; }

double Simulator::link_mean_speed(LinkId link) const {
    const net::LinkSpec &spec = net_->link(link);
    int total = link_count_[link];
    if (total == 0)
        return spec.free_flow_speed;
    int moving = 0;
    for (int i = 0; i < spec.lane_count; ++i) {
        const auto &q = queues_[spec.lane(i)];
        for (int id : q)
            moving += vehicles_[id].ready_time > clock_;
    }
    return spec.free_flow_speed * moving / total;
}

EmvSpeed Simulator::link_emv_speed(LinkId link) const {
    const net::LinkSpec &spec = net_->link(link);
    return emv_speed(link_count_[link], spec.normal_capacity(), spec.lane_count, spec.emergency_capacity(),
                     link_mean_speed(link), spec.emv_max_speed);
}

double Simulator::link_travel_time(LinkId link) const {
    const double clamp = scenario_->sim.travel_time_clamp_s;
    double speed = link_emv_speed(link).speed;
    if (!(speed > 0.0))
        return clamp;
    return std::min(clamp, net_->link(link).length_m / speed);
}

std::vector<double> Simulator::travel_times() const {
    std::vector<double> out(net_->link_count());
    for (LinkId l = 0; l < net_->link_count(); ++l)
        out[l] = link_travel_time(l);
    return out;
}

long Simulator::pending_arrivals() const {
    long n = 0;
    for (const Stream &s : streams_)
        n += static_cast<long>(s.pending.size());
    return n;
}

Metrics Simulator::metrics() const {
    Metrics m;
    if (emv_.status == EmvStatus::Arrived)
        m.t_emv = emv_.arrival_time - emv_.dispatch_time;
    if (completed_ > 0)
        m.t_avg = trip_time_sum_ / static_cast<double>(completed_);
    m.spawned = spawned_;
    m.completed = completed_;
    for (int c : link_count_)
        m.in_network += c;
    m.deferred = deferred_;
    m.emergency_lanes = emv_.emergency_lanes;
    m.emv_links = static_cast<int>(emv_.link_full_speed.size());
    return m;
}

bool Simulator::conserved() const {
    Metrics m = metrics();
    return m.spawned == m.completed + m.in_network;
}

void write_events_csv(const std::vector<SimEvent> &events, const std::string &path) {
    std::FILE *f = std::fopen(path.c_str(), "w");
    if (!f)
        throw std::runtime_error("cannot write " + path);
    std::fprintf(f, "time_s,event_type,vehicle_id,lane_id\n");
    for (const SimEvent &e : events)
        std::fprintf(f, "%.6g,%s,%d,%d\n", e.time, event_name(e.type), e.vehicle, e.lane);
    std::fclose(f);
}

} // namespace emv::sim
