#include "emv/net/scenario.h"

#include "emv/net/config_text.h"

#include <cmath>
#include <fstream>
#include <sstream>

namespace emv::net {

using config::Table;
using config::format_double;

double FlowSpec::rate_at(double t) const {
    if (t < start_s || t >= end_s)
        return 0.0;
    if (peak_rate >= 0.0 && t >= peak_start_s && t < peak_end_s)
        return peak_rate;
    return rate;
}

namespace {

int as_int(const Table &t, const std::string &key, std::int64_t lo, std::int64_t hi) {
    std::int64_t v = t.get_int(key);
    if (v < lo || v > hi)
        t.fail(key, "value " + std::to_string(v) + " out of range [" + std::to_string(lo) + ", " +
                        std::to_string(hi) + "]");
    return static_cast<int>(v);
}

int as_int(const Table &t, const std::string &key, std::int64_t lo, std::int64_t hi, std::int64_t fallback) {
    return t.has(key) ? as_int(t, key, lo, hi) : static_cast<int>(fallback);
}

double positive(const Table &t, const std::string &key, double fallback) {
    double v = t.get_double(key, fallback);
    if (!(v > 0.0) || !std::isfinite(v))
        t.fail(key, "must be a positive finite number");
    return v;
}

double non_negative(const Table &t, const std::string &key, double fallback) {
    double v = t.get_double(key, fallback);
    if (!(v >= 0.0))
        t.fail(key, "must be non-negative");
    return v;
}

double unit_interval(const Table &t, const std::string &key, double fallback) {
    double v = t.get_double(key, fallback);
    if (!(v >= 0.0 && v <= 1.0))
        t.fail(key, "must lie in [0, 1]");
    return v;
}

std::vector<NodeId> node_list(const Table &t, const std::string &key, int node_count) {
    std::vector<NodeId> out;
    for (double v : t.get_double_array(key)) {
        if (v != std::floor(v) || v < 0 || v >= node_count)
            t.fail(key, "entries must be intersection ids in [0, " + std::to_string(node_count - 1) + "]");
        out.push_back(static_cast<NodeId>(v));
    }
    if (out.empty())
        t.fail(key, "must not be empty");
    return out;
}

Network read_network(const config::Document &doc) {
    const Table *nt = doc.table("network");
    if (!nt)
        throw config::SchemaError(doc.source + ": missing [network] table");
    std::string type = nt->get_string("type");
    double ffs = positive(*nt, "free_flow_speed", 6.0);
    double emv_speed = positive(*nt, "emv_max_speed", 12.0);

    if (type == "grid") {
        GridOptions o;
        o.rows = as_int(*nt, "rows", 2, 1000);
        o.cols = as_int(*nt, "cols", 2, 1000);
        o.link_length_m = positive(*nt, "link_length_m", 200.0);
        o.lanes_per_link = as_int(*nt, "lanes_per_link", 1, 16, 2);
        o.capacity_per_lane = as_int(*nt, "lane_capacity", 1, 100000, 0);
        o.free_flow_speed = ffs;
        o.emv_max_speed = emv_speed;
        for (const Table &ec : doc.array("ec")) {
            int n = o.rows * o.cols;
            NodeId from = as_int(ec, "from", 0, n - 1);
            NodeId to = as_int(ec, "to", 0, n - 1);
            double coef = non_negative(ec, "coefficient", 0.0);
            if (!o.ec_coefficients.emplace(std::make_pair(from, to), coef).second)
                ec.fail("to", "duplicate emergency capacity entry");
        }
        return build_grid(o);
    }
    if (type != "edges")
        nt->fail("type", "expected \"grid\" or \"edges\"");

    std::vector<NodeDef> nodes;
    for (const Table &t : doc.array("node"))
        nodes.push_back(NodeDef{as_int(t, "id", 0, 1000000), as_int(t, "row", -1, 1000000, -1),
                                as_int(t, "col", -1, 1000000, -1)});
    int n = static_cast<int>(nodes.size());
    std::vector<LinkSpec> links;
    for (const Table &t : doc.array("link")) {
        LinkSpec l;
        l.from = as_int(t, "from", 0, n - 1);
        l.to = as_int(t, "to", 0, n - 1);
        try {
            l.heading = parse_heading(t.get_string("heading"));
        } catch (const ConfigError &e) {
            t.fail("heading", e.what());
        }
        l.length_m = positive(t, "length_m", 0.0);
        l.lane_count = as_int(t, "lanes", 1, 16);
        l.lane_capacity = as_int(t, "lane_capacity", 1, 100000, default_lane_capacity(l.length_m));
        l.ec_coefficient = non_negative(t, "ec_coefficient", 0.0);
        l.free_flow_speed = positive(t, "free_flow_speed", ffs);
        l.emv_max_speed = positive(t, "emv_max_speed", emv_speed);
        links.push_back(l);
    }
    if (links.empty())
        throw config::SchemaError(doc.source + ": edge-list network needs at least one [[link]]");
    return Network::build(std::move(nodes), std::move(links));
}

} // namespace

Scenario parse_scenario(const std::string &text, const std::string &source_name) {
    config::Document doc = config::parse(text, source_name);
    Scenario s;
    try {
        s.network = read_network(doc);
    } catch (const ConfigError &e) {
        throw ConfigError(source_name + ": " + e.what());
    }
    const int n = s.network.node_count();

    if (const Table *meta = doc.table("scenario"))
        s.name = meta->get_string("name", "");

    if (const Table *t = doc.table("sim")) {
        SimConfig &c = s.sim;
        c.horizon_s = positive(*t, "horizon_s", c.horizon_s);
        c.substep_s = positive(*t, "substep_s", c.substep_s);
        c.mdp_step_s = positive(*t, "mdp_step_s", c.mdp_step_s);
        c.saturation_rate = positive(*t, "saturation_rate", c.saturation_rate);
        std::string arrivals = t->get_string("arrivals", "deterministic");
        if (arrivals != "deterministic" && arrivals != "bernoulli")
            t->fail("arrivals", "expected \"deterministic\" or \"bernoulli\"");
        c.bernoulli_arrivals = arrivals == "bernoulli";
        c.travel_time_clamp_s = positive(*t, "travel_time_clamp_s", c.travel_time_clamp_s);
        c.replan_period_s = positive(*t, "replan_period_s", c.replan_period_s);
        c.ft_green_steps = as_int(*t, "ft_green_steps", 1, 1000, c.ft_green_steps);
        double ratio = c.mdp_step_s / c.substep_s;
        if (std::abs(ratio - std::round(ratio)) > 1e-9)
            t->fail("substep_s", "must divide mdp_step_s");
        double steps = c.horizon_s / c.mdp_step_s;
        if (std::abs(steps - std::round(steps)) > 1e-9)
            t->fail("horizon_s", "must be a multiple of mdp_step_s");
    }

    for (const Table &t : doc.array("flow")) {
        FlowSpec f;
        f.random_od = t.get_bool("random_od", false);
        if (!f.random_od) {
            if (t.has("origin"))
                f.origins = {as_int(t, "origin", 0, n - 1)};
            else
                f.origins = node_list(t, "origins", n);
            if (t.has("destination"))
                f.destinations = {as_int(t, "destination", 0, n - 1)};
            else
                f.destinations = node_list(t, "destinations", n);
            for (NodeId o : f.origins)
                for (NodeId d : f.destinations)
                    if (o != d && !s.network.reachable(o, d))
                        t.fail("destination", "intersection " + std::to_string(d) + " unreachable from " +
                                                  std::to_string(o));
        }
        f.rate = non_negative(t, "rate", 0.0);
        if (t.has("peak_rate")) {
            f.peak_rate = non_negative(t, "peak_rate", 0.0);
            f.peak_start_s = non_negative(t, "peak_start_s", 0.0);
            f.peak_end_s = non_negative(t, "peak_end_s", s.sim.horizon_s);
            if (f.peak_end_s < f.peak_start_s)
                t.fail("peak_end_s", "must not precede peak_start_s");
        }
        f.start_s = non_negative(t, "start_s", 0.0);
        f.end_s = t.get_double("end_s", s.sim.horizon_s);
        if (f.end_s < f.start_s)
            t.fail("end_s", "must not precede start_s");
        if (f.end_s > s.sim.horizon_s)
            t.fail("end_s", "flow interval extends past the horizon");
        s.flows.flows.push_back(std::move(f));
    }

    if (const Table *t = doc.table("emv")) {
        s.emv.enabled = t->get_bool("enabled", true);
        s.emv.origin = as_int(*t, "origin", 0, n - 1);
        s.emv.destination = as_int(*t, "destination", 0, n - 1);
        s.emv.dispatch_s = non_negative(*t, "dispatch_s", 0.0);
        if (s.emv.origin == s.emv.destination)
            t->fail("destination", "must differ from origin");
        if (s.emv.dispatch_s >= s.sim.horizon_s)
            t->fail("dispatch_s", "must be before the horizon");
        if (!s.network.reachable(s.emv.origin, s.emv.destination))
            t->fail("destination", "destination unreachable from origin " + std::to_string(s.emv.origin));
    } else {
        s.emv.enabled = false;
    }

    if (const Table *t = doc.table("train")) {
        TrainConfig &c = s.train;
        c.gamma = t->get_double("gamma", c.gamma);
        if (!(c.gamma >= 0.0 && c.gamma < 1.0))
            t->fail("gamma", "must lie in [0, 1)");
        c.alpha = unit_interval(*t, "alpha", c.alpha);
        c.entropy_coef = non_negative(*t, "entropy_coef", c.entropy_coef);
        c.beta = unit_interval(*t, "beta", c.beta);
        c.batch_size = as_int(*t, "batch_size", 1, 1 << 20, c.batch_size);
        c.lr_policy = positive(*t, "lr_policy", c.lr_policy);
        c.lr_value = positive(*t, "lr_value", c.lr_value);
        c.lr_final_fraction = unit_interval(*t, "lr_final_fraction", c.lr_final_fraction);
        c.grad_clip = positive(*t, "grad_clip", c.grad_clip);
        c.init_std = positive(*t, "init_std", c.init_std);
        c.reward_scale = positive(*t, "reward_scale", c.reward_scale);
        c.epochs = as_int(*t, "epochs", 0, 1 << 24, c.epochs);
        c.obs_hidden = as_int(*t, "obs_hidden", 1, 4096, c.obs_hidden);
        c.fp_hidden = as_int(*t, "fp_hidden", 1, 4096, c.fp_hidden);
        c.lstm_hidden = as_int(*t, "lstm_hidden", 1, 4096, c.lstm_hidden);
    }
    return s;
}

Scenario load_scenario(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open scenario file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path);
}

namespace {

std::string id_list(const std::vector<NodeId> &ids) {
    std::string s = "[";
    for (std::size_t i = 0; i < ids.size(); ++i)
        s += (i ? ", " : "") + std::to_string(ids[i]);
    return s + "]";
}

} // namespace

std::string to_toml(const Scenario &s) {
    std::ostringstream out;
    const Network &net = s.network;
    out << "[scenario]\nname = \"" << s.name << "\"\n\n";
    out << "[network]\ntype = \"edges\"\n\n";
    for (const IntersectionSpec &node : net.nodes())
        out << "[[node]]\nid = " << node.id << "\nrow = " << node.row << "\ncol = " << node.col << "\n\n";
    for (const LinkSpec &l : net.links()) {
        out << "[[link]]\nfrom = " << l.from << "\nto = " << l.to << "\nheading = \"" << heading_char(l.heading)
            << "\"\nlength_m = " << format_double(l.length_m) << "\nlanes = " << l.lane_count
            << "\nlane_capacity = " << l.lane_capacity << "\nec_coefficient = " << format_double(l.ec_coefficient)
            << "\nfree_flow_speed = " << format_double(l.free_flow_speed)
            << "\nemv_max_speed = " << format_double(l.emv_max_speed) << "\n\n";
    }
    const SimConfig &c = s.sim;
    out << "[sim]\nhorizon_s = " << format_double(c.horizon_s) << "\nsubstep_s = " << format_double(c.substep_s)
        << "\nmdp_step_s = " << format_double(c.mdp_step_s)
        << "\nsaturation_rate = " << format_double(c.saturation_rate) << "\narrivals = \""
        << (c.bernoulli_arrivals ? "bernoulli" : "deterministic")
        << "\"\ntravel_time_clamp_s = " << format_double(c.travel_time_clamp_s)
        << "\nreplan_period_s = " << format_double(c.replan_period_s) << "\nft_green_steps = " << c.ft_green_steps
        << "\n\n";
    for (const FlowSpec &f : s.flows.flows) {
        out << "[[flow]]\n";
        if (f.random_od)
            out << "random_od = true\n";
        else
            out << "origins = " << id_list(f.origins) << "\ndestinations = " << id_list(f.destinations) << "\n";
        out << "rate = " << format_double(f.rate) << "\n";
        if (f.peak_rate >= 0.0)
            out << "peak_rate = " << format_double(f.peak_rate) << "\npeak_start_s = " << format_double(f.peak_start_s)
                << "\npeak_end_s = " << format_double(f.peak_end_s) << "\n";
        out << "start_s = " << format_double(f.start_s) << "\nend_s = " << format_double(f.end_s) << "\n\n";
    }
    if (s.emv.origin != kNone)
        out << "[emv]\nenabled = " << (s.emv.enabled ? "true" : "false") << "\norigin = " << s.emv.origin
            << "\ndestination = " << s.emv.destination << "\ndispatch_s = " << format_double(s.emv.dispatch_s)
            << "\n\n";
    const TrainConfig &t = s.train;
    out << "[train]\ngamma = " << format_double(t.gamma) << "\nalpha = " << format_double(t.alpha)
        << "\nentropy_coef = " << format_double(t.entropy_coef) << "\nbeta = " << format_double(t.beta)
        << "\nbatch_size = " << t.batch_size << "\nlr_policy = " << format_double(t.lr_policy)
        << "\nlr_value = " << format_double(t.lr_value) << "\nlr_final_fraction = " << format_double(t.lr_final_fraction)
        << "\ngrad_clip = " << format_double(t.grad_clip) << "\ninit_std = " << format_double(t.init_std)
        << "\nreward_scale = " << format_double(t.reward_scale) << "\nepochs = " << t.epochs
        << "\nobs_hidden = " << t.obs_hidden << "\nfp_hidden = " << t.fp_hidden << "\nlstm_hidden = " << t.lstm_hidden
        << "\n";
    return out.str();
}

bool same_network(const Network &a, const Network &b) {
    if (a.node_count() != b.node_count() || a.link_count() != b.link_count())
        return false;
    for (NodeId i = 0; i < a.node_count(); ++i)
        if (a.node(i).row != b.node(i).row || a.node(i).col != b.node(i).col ||
            a.node(i).phases.size() != b.node(i).phases.size())
            return false;
    for (LinkId l = 0; l < a.link_count(); ++l) {
        const LinkSpec &x = a.link(l);
        const LinkSpec &y = b.link(l);
        if (x.from != y.from || x.to != y.to || x.heading != y.heading || x.length_m != y.length_m ||
            x.lane_count != y.lane_count || x.lane_capacity != y.lane_capacity ||
            x.ec_coefficient != y.ec_coefficient || x.free_flow_speed != y.free_flow_speed ||
            x.emv_max_speed != y.emv_max_speed)
            return false;
    }
    return true;
}

} // namespace emv::net
