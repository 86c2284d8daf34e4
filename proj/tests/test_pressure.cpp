#include "emv/net/network.h"
#include "emv/pressure/pressure.h"
#include "emv/sim/simulator.h"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace emv;

namespace {

// The worked example: 3x3 grid, 5 vehicles per lane, centre node 4, observed
// lane is the straight/right lane of the eastbound approach 3->4.
struct Fixture {
    net::Network g = net::build_grid(3, 3, 200, 2, 5, {});
    pressure::LaneCounts x = pressure::LaneCounts(g.lane_count(), 0);
    net::LaneId lane = g.link(g.link_between(3, 4)).lane(1);

    Fixture() {
        x[lane] = 1;
        const auto &east = g.link(g.link_between(4, 5));
        const auto &south = g.link(g.link_between(4, 7));
        x[east.lane(0)] = 1;
        x[east.lane(1)] = 2;
        x[south.lane(0)] = 3;
        x[south.lane(1)] = 0;
    }
};

// Independent re-derivation from the lane turn sets rather than the movement table.
double oracle_lane_pressure(const net::Network &g, const pressure::LaneCounts &x, net::LaneId lane) {
    const auto &ln = g.lane(lane);
    const auto &link = g.link(ln.link);
    const auto &node = g.node(link.to);
    double down = 0.0;
    for (net::LinkId out : node.out_links) {
        net::Turn t;
        if (!net::classify_turn(link.heading, g.link(out).heading, t) || !(ln.turns & net::turn_bit(t)))
            continue;
        const auto &o = g.link(out);
        for (int k = 0; k < o.lane_count; ++k)
            down += static_cast<double>(x[o.lane(k)]) / o.lane_capacity / o.lane_count;
    }
    return std::abs(static_cast<double>(x[lane]) / link.lane_capacity - down);
}

} // namespace

TEST_SUITE("pressure") {

TEST_CASE("worked example: w = 2/5") {
    Fixture f;
    CHECK(std::abs(pressure::lane_pressure(f.g, f.x, f.lane) - 0.4) <= 1e-12);
    CHECK(std::abs(oracle_lane_pressure(f.g, f.x, f.lane) - 0.4) <= 1e-12);
}

TEST_CASE("worked example: movement pressure w* = -1/5 towards the lane holding 2") {
    Fixture f;
    auto mp = pressure::presslight_pressure(f.g, f.x, 4);
    const auto &node = f.g.node(4);
    net::LaneId target = f.g.link(f.g.link_between(4, 5)).lane(1);
    bool found = false;
    double total = 0.0;
    for (std::size_t k = 0; k < node.movements.size(); ++k) {
        total += mp.movement[k];
        if (node.movements[k].from_lane == f.lane && node.movements[k].to_lane == target) {
            found = true;
            CHECK(std::abs(mp.movement[k] - (-0.2)) <= 1e-12);
        }
    }
    CHECK(found);
    CHECK(mp.intersection == doctest::Approx(std::abs(total)).epsilon(1e-12));
}

TEST_CASE("empty network has zero pressure everywhere") {
    net::Network g = net::build_grid(3, 3, 200, 2, 0, {});
    pressure::LaneCounts x(g.lane_count(), 0);
    for (int i = 0; i < g.node_count(); ++i) {
        CHECK(pressure::intersection_pressure(g, x, i) == 0.0);
        CHECK(pressure::presslight_pressure(g, x, i).intersection == 0.0);
        for (int p = 0; p < static_cast<int>(g.node(i).phases.size()); ++p)
            CHECK(pressure::phase_pressure(g, x, i, p) == 0.0);
    }
}

TEST_CASE("lane pressure matches the turn-set oracle on random counts") {
    net::Network g = net::build_grid(4, 4, 150, 3, 0, {});
    sim::Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        pressure::LaneCounts x(g.lane_count());
        for (auto &v : x)
            v = static_cast<int>(rng.below(21));
        for (int l = 0; l < g.lane_count(); ++l) {
            if (g.lane(l).turns == 0)
                continue;
            CHECK(pressure::lane_pressure(g, x, l) == doctest::Approx(oracle_lane_pressure(g, x, l)).epsilon(1e-12));
        }
        for (int i = 0; i < g.node_count(); ++i) {
            double sum = 0.0;
            int n = 0;
            for (auto l : g.node(i).incoming_lanes)
                if (g.lane(l).turns) {
                    sum += oracle_lane_pressure(g, x, l);
                    ++n;
                }
            CHECK(pressure::intersection_pressure(g, x, i) == doctest::Approx(n ? sum / n : 0.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("pressure depends on densities only") {
    // doubling both the counts and the lane capacity leaves every value unchanged
    net::Network a = net::build_grid(3, 3, 200, 2, 10, {});
    net::Network b = net::build_grid(3, 3, 200, 2, 20, {});
    sim::Rng rng(3);
    pressure::LaneCounts xa(a.lane_count()), xb(b.lane_count());
    for (std::size_t k = 0; k < xa.size(); ++k) {
        xa[k] = static_cast<int>(rng.below(11));
        xb[k] = 2 * xa[k];
    }
    for (int i = 0; i < a.node_count(); ++i) {
        CHECK(pressure::intersection_pressure(a, xa, i) == doctest::Approx(pressure::intersection_pressure(b, xb, i)));
        CHECK(pressure::presslight_pressure(a, xa, i).intersection ==
              doctest::Approx(pressure::presslight_pressure(b, xb, i).intersection));
    }
}

TEST_CASE("lane pressure is non-negative and phase pressure is the phase's share of w*") {
    net::Network g = net::build_grid(3, 3, 200, 2, 0, {});
    sim::Rng rng(11);
    pressure::LaneCounts x(g.lane_count());
    for (auto &v : x)
        v = static_cast<int>(rng.below(27));
    for (int i = 0; i < g.node_count(); ++i) {
        auto mp = pressure::presslight_pressure(g, x, i);
        const auto &node = g.node(i);
        for (int p = 0; p < static_cast<int>(node.phases.size()); ++p) {
            double s = 0.0;
            for (int m : node.phases[p].movements)
                s += mp.movement[m];
            CHECK(pressure::phase_pressure(g, x, i, p) == doctest::Approx(s));
        }
        CHECK(pressure::intersection_pressure(g, x, i) >= 0.0);
    }
    CHECK_THROWS_AS(pressure::phase_pressure(g, x, 4, 99), std::invalid_argument);
}

} // TEST_SUITE
