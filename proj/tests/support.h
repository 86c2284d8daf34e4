#pragma once

#include "emv/net/scenario.h"
#include "emv/sim/simulator.h"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <limits>
#include <vector>

#include <filesystem>
#include <string>

namespace emv::test {

inline std::string scenario_dir() { return EMV_SCENARIO_DIR; }

inline net::Scenario load(const std::string &file) { return net::load_scenario(scenario_dir() + "/" + file); }

inline net::Scenario parse(const std::string &text) { return net::parse_scenario(text, "test.toml"); }

/// Small grid scenario with no traffic and an EMV from the north-west corner to the south-east.
inline std::string empty_grid_text(int rows = 3, int cols = 3, double horizon = 300, double dispatch = 0) {
    return "[network]\ntype = \"grid\"\nrows = " + std::to_string(rows) + "\ncols = " + std::to_string(cols) +
           "\nlink_length_m = 200\nlanes_per_link = 2\n\n[sim]\nhorizon_s = " + std::to_string(horizon) +
           "\n\n[emv]\norigin = 0\ndestination = " + std::to_string(rows * cols - 1) +
           "\ndispatch_s = " + std::to_string(dispatch) + "\n";
}

/// Fresh temporary directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string &tag) {
        path = std::filesystem::temp_directory_path() /
               ("emv_test_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

/// Random directed graph embedded in a rows x cols lattice: each of the four
/// neighbor pairs gets 0, 1 or 2 directed links, node ids are shuffled.
inline net::Network random_lattice_graph(sim::Rng &rng, int rows, int cols, double keep = 0.75) {
    const int n = rows * cols;
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i)
        std::swap(perm[i], perm[rng.below(i + 1)]);
    std::vector<net::NodeDef> nodes;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            nodes.push_back({perm[r * cols + c], r, c});
    std::vector<net::LinkSpec> links;
    auto add = [&](int a, int b, net::Heading h) {
        if (rng.uniform() >= keep)
            return;
        net::LinkSpec l;
        l.from = perm[a];
        l.to = perm[b];
        l.heading = h;
        l.length_m = 50.0 + 250.0 * rng.uniform();
        l.lane_count = 1 + static_cast<int>(rng.below(2));
        links.push_back(l);
    };
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            int v = r * cols + c;
            if (c + 1 < cols) {
                add(v, v + 1, net::Heading::East);
                add(v + 1, v, net::Heading::West);
            }
            if (r + 1 < rows) {
                add(v, v + cols, net::Heading::South);
                add(v + cols, v, net::Heading::North);
            }
        }
    return net::Network::build(nodes, links);
}

/// Positive random link weights spanning two orders of magnitude, with some exact ties.
inline std::vector<double> random_weights(sim::Rng &rng, const net::Network &g) {
    std::vector<double> T(g.link_count());
    for (auto &t : T)
        t = rng.uniform() < 0.2 ? 10.0 : 1.0 + 99.0 * rng.uniform();
    return T;
}

/// Bellman-Ford over the reversed graph: exact shortest time to `dest`.
inline std::vector<double> bellman_ford_to(const net::Network &g, const std::vector<double> &T, net::NodeId dest) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> d(g.node_count(), inf);
    d[dest] = 0.0;
    for (int round = 0; round < g.node_count(); ++round) {
        bool changed = false;
        for (const auto &l : g.links())
            if (d[l.to] + T[l.id] < d[l.from]) {
                d[l.from] = d[l.to] + T[l.id];
                changed = true;
            }
        if (!changed)
            break;
    }
    return d;
}

} // namespace emv::test

namespace doctest {
template <> struct StringMaker<std::vector<int>> {
    static String convert(const std::vector<int> &v) {
        std::string s = "[";
        for (std::size_t i = 0; i < v.size(); ++i)
            s += (i ? ", " : "") + std::to_string(v[i]);
        return (s + "]").c_str();
    }
};
} // namespace doctest
