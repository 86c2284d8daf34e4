#include "emv/exp/episode.h"

#include <stdexcept>

namespace emv::exp {

const std::vector<std::string> &combo_ids() {
    static const std::vector<std::string> ids = {"ft_no_emv",    "w_static_ft",  "w_static_mp",
                                                 "w_dynamic_ft", "w_dynamic_mp", "emvlight"};
    return ids;
}

Combo combo_by_name(const std::string &name) {
    const auto &ids = combo_ids();
    for (std::size_t i = 0; i < ids.size(); ++i)
        if (ids[i] == name)
            return static_cast<Combo>(i);
    std::string valid;
    for (const auto &id : ids)
        valid += (valid.empty() ? "" : ", ") + id;
    throw std::invalid_argument("unknown combo '" + name + "' (valid: " + valid + ")");
}

std::string combo_name(Combo combo) { return combo_ids().at(static_cast<std::size_t>(combo)); }

std::uint64_t offset_seed(std::uint64_t seed) { return ma2c::Trainer::episode_seed(seed ^ 0x5eedf00dULL, -1); }

namespace {

RunMetrics collect(const sim::Simulator &sim, const std::string &label, std::uint64_t seed) {
    sim::Metrics m = sim.metrics();
    RunMetrics r;
    r.label = label;
    r.seed = seed;
    r.t_emv = m.t_emv;
    const net::Scenario &scn = sim.scenario();
    if (scn.emv.enabled)
        r.t_emv_censored = m.t_emv ? *m.t_emv : scn.sim.horizon_s - scn.emv.dispatch_s;
    r.t_avg = m.t_avg;
    r.emergency_lanes = m.emergency_lanes;
    r.emv_links = m.emv_links;
    r.spawned = m.spawned;
    r.completed = m.completed;
    r.deferred = m.deferred;
    r.emv_route = sim.emv().visited;
    return r;
}

} // namespace

RunMetrics run_baseline(const net::Scenario &scenario, Combo combo, std::uint64_t seed, EpisodeTrace *trace) {
    if (combo == Combo::EmvLight)
        throw std::invalid_argument("emvlight needs a trained checkpoint");
    net::Scenario scn = scenario;
    if (combo == Combo::FtNoEmv)
        scn.emv.enabled = false;
    const net::Network &net = scn.network;
    const bool mp = combo == Combo::WStaticMp || combo == Combo::WDynamicMp;
    const bool dynamic = combo == Combo::WDynamicFt || combo == Combo::WDynamicMp;

    baselines::PlannedRouting routing(net, dynamic ? baselines::RouteMode::Dynamic : baselines::RouteMode::Static,
                                      scn.sim.replan_period_s);
    std::unique_ptr<baselines::Controller> base;
    if (mp)
        base = std::make_unique<baselines::MaxPressureController>(net);
    else
        base = std::make_unique<baselines::FixedTimeController>(net, scn.sim.mdp_step_s, scn.sim.ft_green_steps);
    std::unique_ptr<baselines::Controller> controller;
    if (combo == Combo::FtNoEmv)
        controller = std::move(base);
    else
        controller = std::make_unique<baselines::GreenWaveController>(net, std::move(base), &routing);

    sim::Simulator sim(scn, seed);
    sim.set_emv_guide(&routing);
    if (trace)
        sim.set_event_sink(&trace->events);
    sim::Rng offsets(offset_seed(seed));
    controller->reset(offsets);
    routing.reset();
    int step = 0;
    while (!sim.done()) {
        routing.before_step(sim);
        sim.step(controller->decide(sim));
        ++step;
        if (trace && sim.emv_active()) {
            const auto &link = net.link(sim.emv().link);
            routing::TravelTimes T = sim.travel_times();
            std::vector<net::NodeId> rest;
            for (std::size_t k = 0; k < routing.route().size(); ++k)
                if (routing.route()[k] == link.to)
                    rest.assign(routing.route().begin() + static_cast<long>(k), routing.route().end());
            // ETA from the intersection ahead, as in the learned runs
            double eta = rest.empty() ? 0.0 : routing::route_time(net, T, rest);
            trace->route.push_back(ma2c::RouteTraceRow{step, link.id, eta, routing.peek(link.to)});
        }
    }
    RunMetrics r = collect(sim, combo_name(combo), seed);
    r.replans = routing.replans();
    return r;
}

RunMetrics run_emvlight(ma2c::Trainer &trainer, std::uint64_t seed, EpisodeTrace *trace) {
    ma2c::EpisodeRecord rec = trainer.evaluate(seed, true, trace ? &trace->events : nullptr,
                                               trace ? &trace->route : nullptr);
    (void)rec;
    std::string label = trainer.variant().name;
    return collect(trainer.env().sim(), label, seed);
}

} // namespace emv::exp
