#include "support.h"

#include "emv/net/config_text.h"
#include "emv/net/network.h"
#include "emv/net/scenario.h"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace emv;
using net::Heading;
using net::Turn;

TEST_SUITE("net") {

TEST_CASE("turn classification follows the driver's view") {
    Turn t;
    REQUIRE(net::classify_turn(Heading::East, Heading::East, t));
    CHECK(t == Turn::Straight);
    REQUIRE(net::classify_turn(Heading::East, Heading::South, t));
    CHECK(t == Turn::Right);
    REQUIRE(net::classify_turn(Heading::East, Heading::North, t));
    CHECK(t == Turn::Left);
    CHECK_FALSE(net::classify_turn(Heading::East, Heading::West, t));
}

TEST_CASE("5x5 grid: counts and phase tables by node type") {
    net::Network g = net::build_grid(5, 5, 200, 2, 0, {});
    CHECK(g.node_count() == 25);
    CHECK(g.link_count() == 80);
    CHECK(g.lane_count() == 160);
    CHECK(g.link(0).lane_capacity == 26);

    auto ids = [&](int node) {
        std::vector<int> out;
        for (const auto &p : g.node(node).phases)
            out.push_back(p.id);
        return out;
    };
    CHECK(ids(0) == std::vector<int>{0, 3});        // corner
    CHECK(ids(2) == std::vector<int>{2, 5, 6});     // northern edge
    CHECK(ids(12) == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
    CHECK(g.node(12).movements.size() == 24);
    CHECK(g.graph_distance(0, 24) == 8);
    CHECK(g.graph_distance(7, 7) == 0);
    CHECK(g.border_nodes().size() == 16);
}

TEST_CASE("every phase is conflict-free and every movement is served") {
    for (const char *file : {"grid3x3.toml", "grid5x5_config1.toml", "irregular4x4.toml"}) {
        net::Scenario s = test::load(file);
        for (const auto &node : s.network.nodes()) {
            std::set<int> served;
            for (const auto &phase : node.phases)
                for (std::size_t a = 0; a < phase.movements.size(); ++a) {
                    served.insert(phase.movements[a]);
                    for (std::size_t b = a + 1; b < phase.movements.size(); ++b)
                        CHECK_FALSE(net::movements_conflict(node.movements[phase.movements[a]],
                                                            node.movements[phase.movements[b]]));
                }
            CHECK(served.size() == node.movements.size());
            CHECK(!node.phases.empty());
        }
    }
}

TEST_CASE("lane turn sets on a two-lane approach") {
    net::Network g = net::build_grid(3, 3, 200, 2, 0, {});
    net::LinkId in = g.link_between(3, 4); // eastbound into the centre
    const auto &inner = g.lane(g.link(in).lane(0));
    const auto &outer = g.lane(g.link(in).lane(1));
    CHECK(inner.turns == (net::turn_bit(Turn::Left) | 0u));
    CHECK(outer.turns == (net::turn_bit(Turn::Straight) | net::turn_bit(Turn::Right)));
}

TEST_CASE("phase_permits matches the movement table") {
    net::Network g = net::build_grid(3, 3, 200, 2, 0, {});
    net::LinkId west_in = g.link_between(3, 4), east_out = g.link_between(4, 5), north_out = g.link_between(4, 1);
    // phase index of standard id 2 (E/W through) at the centre
    int ew = -1, ns = -1;
    for (int k = 0; k < static_cast<int>(g.node(4).phases.size()); ++k) {
        if (g.node(4).phases[k].id == 2)
            ew = k;
        if (g.node(4).phases[k].id == 0)
            ns = k;
    }
    CHECK(g.phase_permits(4, ew, west_in, east_out));
    CHECK_FALSE(g.phase_permits(4, ns, west_in, east_out));
    CHECK_FALSE(g.phase_permits(4, ew, west_in, north_out)); // left turn is a separate phase
}

TEST_CASE("shortest-distance paths enumerate equal-length alternatives lexicographically") {
    net::Network g = net::build_grid(3, 3, 200, 2, 0, {});
    auto paths = g.shortest_distance_paths(0, 8);
    CHECK(paths.size() == 6); // C(4,2) staircase paths
    auto nodes = [&](const std::vector<net::LinkId> &p) {
        std::vector<int> out{g.link(p.front()).from};
        for (auto l : p)
            out.push_back(g.link(l).to);
        return out;
    };
    CHECK(nodes(paths.front()) == std::vector<int>{0, 1, 2, 5, 8});
    CHECK(nodes(paths.back()) == std::vector<int>{0, 3, 6, 7, 8});
    CHECK(nodes(g.shortest_distance_path(0, 8)) == nodes(paths.front()));
    CHECK(g.shortest_distance_path(4, 4).empty());
}

TEST_CASE("network validation rejects malformed inputs") {
    std::vector<net::NodeDef> nodes = {{0, 0, 0}, {1, 0, 1}};
    net::LinkSpec a;
    a.from = 0;
    a.to = 1;
    a.heading = Heading::East;
    a.length_m = 100;
    net::LinkSpec b = a;
    CHECK_THROWS_AS(net::Network::build(nodes, {a, b}), net::ConfigError); // duplicate
    net::LinkSpec self = a;
    self.to = 0;
    CHECK_THROWS_AS(net::Network::build(nodes, {self}), net::ConfigError);
    net::LinkSpec slow = a;
    slow.emv_max_speed = 1.0;
    CHECK_THROWS_AS(net::Network::build(nodes, {slow}), net::ConfigError);
    net::LinkSpec zero = a;
    zero.length_m = 0;
    CHECK_THROWS_AS(net::Network::build(nodes, {zero}), net::ConfigError);
    CHECK_NOTHROW(net::Network::build(nodes, {a}));
    CHECK_THROWS(net::build_grid(1, 3, 200, 2, 0, {}));
}

TEST_CASE("emergency capacity keys must name existing grid links") {
    CHECK_NOTHROW(net::build_grid(3, 3, 200, 2, 0, {{{1, 2}, 0.2}}));
    CHECK_THROWS_AS(net::build_grid(3, 3, 200, 2, 0, {{{0, 4}, 0.2}}), net::ConfigError);
    net::Network g = net::build_grid(3, 3, 200, 2, 0, {{{1, 2}, 0.2}});
    CHECK(g.link(g.link_between(1, 2)).emergency_capacity() == doctest::Approx(0.2 * 52));
    CHECK(g.link(g.link_between(2, 1)).emergency_capacity() == 0.0);
}

TEST_CASE("config reader: values, arrays of tables, located errors") {
    auto doc = config::parse("# c\n[a]\nx = 1\ny = 2.5\nz = \"s\"\nw = [1, 2]\nb = true\n[[r]]\nk = 1\n[[r]]\nk = 2\n",
                             "f.toml");
    const config::Table *a = doc.table("a");
    REQUIRE(a);
    CHECK(a->get_int("x") == 1);
    CHECK(a->get_double("y") == 2.5);
    CHECK(a->get_double("x") == 1.0);
    CHECK(a->get_string("z") == "s");
    CHECK(a->get_bool("b"));
    CHECK(a->get_double_array("w") == std::vector<double>{1, 2});
    CHECK(doc.array("r").size() == 2);
    CHECK(a->get_int("missing", 7) == 7);
    try {
        a->get_int("z");
        FAIL("expected a schema error");
    } catch (const config::SchemaError &e) {
        std::string msg = e.what();
        CHECK(msg.find("f.toml:5") != std::string::npos);
        CHECK(msg.find("[a]") != std::string::npos);
        CHECK(msg.find("'z'") != std::string::npos);
    }
    CHECK_THROWS(config::parse("[a]\nx = \n", "bad.toml"));
    CHECK_THROWS(config::parse("[a]\nx = 1\nx = 2\n", "dup.toml"));
}

TEST_CASE("format_double round-trips") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 12345.678, 200.0})
        CHECK(std::stod(config::format_double(v)) == v);
}

TEST_CASE("scenario files load and round-trip through the canonical writer") {
    for (const char *file : {"grid3x3.toml", "grid3x3_ec.toml", "grid5x5_config1.toml", "grid5x5_config2.toml",
                             "grid5x5_config3.toml", "grid5x5_config4.toml", "grid5x5_config1_ec.toml",
                             "irregular4x4.toml"}) {
        CAPTURE(file);
        net::Scenario s = test::load(file);
        net::Scenario back = net::parse_scenario(net::to_toml(s), "roundtrip");
        CHECK(net::same_network(s.network, back.network));
        CHECK(s.flows == back.flows);
        CHECK(s.emv == back.emv);
        CHECK(s.sim == back.sim);
        CHECK(s.train == back.train);
        CHECK(net::to_toml(back) == net::to_toml(s));
    }
}

TEST_CASE("scenario: peak window and flow rates") {
    net::Scenario s = test::load("grid5x5_config2.toml");
    REQUIRE(s.flows.flows.size() == 1);
    const auto &f = s.flows.flows[0];
    CHECK(f.rate_at(100) == 160);
    CHECK(f.rate_at(400) == 320);
    CHECK(f.rate_at(799) == 320);
    CHECK(f.rate_at(800) == 160);
    CHECK(s.emv.dispatch_s == 600);
    CHECK(s.sim.horizon_s == 1200);
}

TEST_CASE("scenario errors name the file, table and field") {
    auto message = [](const std::string &text) {
        try {
            test::parse(text);
        } catch (const std::exception &e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    std::string base = test::empty_grid_text();
    CHECK(message(base + "[[flow]]\norigin = 0\ndestination = 99\nrate = 10\n").find("destination") !=
          std::string::npos);
    CHECK(message("[network]\ntype = \"ring\"\n").find("'type'") != std::string::npos);
    std::string same = "[network]\ntype = \"grid\"\nrows = 2\ncols = 2\n[emv]\norigin = 1\ndestination = 1\n";
    CHECK(message(same).find("must differ") != std::string::npos);
    std::string late = "[network]\ntype = \"grid\"\nrows = 2\ncols = 2\n[sim]\nhorizon_s = 100\n"
                       "[emv]\norigin = 0\ndestination = 3\ndispatch_s = 100\n";
    CHECK(message(late).find("dispatch_s") != std::string::npos);
    std::string misaligned = "[network]\ntype = \"grid\"\nrows = 2\ncols = 2\n[sim]\nhorizon_s = 101\n";
    CHECK(message(misaligned).find("horizon_s") != std::string::npos);
    CHECK(message(base).find("test.toml") == std::string::npos); // valid
    CHECK(message("[network]\ntype = \"grid\"\nrows = 2\n").find("test.toml") != std::string::npos);
}

TEST_CASE("unreachable EMV destination is reported") {
    std::string text = R"([network]
type = "edges"
[[node]]
id = 0
row = 0
col = 0
[[node]]
id = 1
row = 0
col = 1
[[link]]
from = 0
to = 1
heading = "E"
length_m = 100
lanes = 1
[emv]
origin = 1
destination = 0
)";
    try {
        test::parse(text);
        FAIL("expected an error");
    } catch (const std::exception &e) {
        CHECK(std::string(e.what()).find("unreachable from origin 1") != std::string::npos);
    }
}

TEST_CASE("irregular map: pass-through and one-way nodes still get phases") {
    net::Scenario s = test::load("irregular4x4.toml");
    const auto &net = s.network;
    CHECK(net.link_between(0, 1) != net::kNone);
    CHECK(net.link_between(1, 0) == net::kNone);
    CHECK(net.link_between(5, 6) == net::kNone);
    CHECK(net.reachable(0, 15));
    CHECK_FALSE(net.has_grid_coordinates() == false);
    for (const auto &n : net.nodes())
        CHECK(n.phases.size() >= 1);
}

} // TEST_SUITE
