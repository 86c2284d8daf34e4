// Lane turn assignment, movement enumeration and phase tables.

#include "emv/net/network.h"

#include <algorithm>
#include <set>

namespace emv::net {

namespace {

struct StandardPhase {
    std::array<bool, 4> approach; // by arm N, E, S, W
    unsigned turns;
};

constexpr unsigned kThroughRight = turn_bit(Turn::Straight) | turn_bit(Turn::Right);
constexpr unsigned kLeft = turn_bit(Turn::Left);
constexpr unsigned kAll = kThroughRight | kLeft;

// 0: N/S through, 1: N/S left, 2: E/W through, 3: E/W left, 4-7: single approach N, S, E, W.
constexpr std::array<StandardPhase, 8> kStandardPhases = {{
    {{true, false, true, false}, kThroughRight},
    {{true, false, true, false}, kLeft},
    {{false, true, false, true}, kThroughRight},
    {{false, true, false, true}, kLeft},
    {{true, false, false, false}, kAll},
    {{false, false, true, false}, kAll},
    {{false, true, false, false}, kAll},
    {{false, false, false, true}, kAll},
}};

bool is_strict_subset(const std::vector<int> &a, const std::vector<int> &b) {
    return a.size() < b.size() && std::includes(b.begin(), b.end(), a.begin(), a.end());
}

} // namespace

// Left turners use the innermost lane, right turners the outermost, through
// traffic everything in between (and the inner lane when there is no left turn).
unsigned lane_turns(int lane_index, int lane_count, unsigned available) {
    if (available == 0)
        return 0;
    if (lane_count == 1)
        return available;
    unsigned turns = 0;
    bool has_left = available & turn_bit(Turn::Left);
    if (has_left && lane_index == 0)
        turns |= turn_bit(Turn::Left);
    if ((available & turn_bit(Turn::Right)) && lane_index == lane_count - 1)
        turns |= turn_bit(Turn::Right);
    if ((available & turn_bit(Turn::Straight)) && lane_index >= (has_left ? 1 : 0))
        turns |= turn_bit(Turn::Straight);
    if (turns == 0)
        turns = available;
    return turns;
}

bool movements_conflict(const Movement &a, const Movement &b) {
    if (a.approach == b.approach)
        return false;
    bool a_left = a.turn == Turn::Left;
    bool b_left = b.turn == Turn::Left;
    if (opposite(a.approach) == b.approach)
        return a_left != b_left;
    // Adjacent approaches only coexist when one of them turns right and they exit on different arms.
    if (a.turn != Turn::Right && b.turn != Turn::Right)
        return true;
    return a.to_link == b.to_link;
}

void build_movements_and_phases(IntersectionSpec &node, const std::vector<LinkSpec> &links,
                                std::vector<Lane> &lanes) {
    node.movements.clear();
    node.phases.clear();
    for (Heading arm : kHeadings) {
        LinkId in = node.in_by_arm[static_cast<int>(arm)];
        if (in == kNone)
            continue;
        const LinkSpec &in_link = links[in];
        unsigned available = 0;
        std::array<LinkId, 3> target{kNone, kNone, kNone};
        for (Heading out_arm : kHeadings) {
            LinkId out = node.out_by_arm[static_cast<int>(out_arm)];
            if (out == kNone)
                continue;
            Turn turn;
            if (!classify_turn(in_link.heading, links[out].heading, turn))
                continue;
            available |= turn_bit(turn);
            target[static_cast<int>(turn)] = out;
        }
        for (int li = 0; li < in_link.lane_count; ++li) {
            Lane &lane = lanes[in_link.lane(li)];
            lane.turns = lane_turns(li, in_link.lane_count, available);
            for (Turn turn : {Turn::Left, Turn::Straight, Turn::Right}) {
                if (!(lane.turns & turn_bit(turn)))
                    continue;
                const LinkSpec &out_link = links[target[static_cast<int>(turn)]];
                for (int lo = 0; lo < out_link.lane_count; ++lo) {
                    Movement m;
                    m.from_lane = lane.id;
                    m.to_lane = out_link.lane(lo);
                    m.from_link = in_link.id;
                    m.to_link = out_link.id;
                    m.approach = arm;
                    m.turn = turn;
                    node.movements.push_back(m);
                }
            }
        }
    }

    // Standard phases restricted to the movements this intersection has,
    // keeping only the maximal distinct sets.
    std::vector<std::pair<int, std::vector<int>>> candidates;
    for (int pid = 0; pid < static_cast<int>(kStandardPhases.size()); ++pid) {
        const StandardPhase &sp = kStandardPhases[pid];
        std::vector<int> members;
        for (int mi = 0; mi < static_cast<int>(node.movements.size()); ++mi) {
            const Movement &m = node.movements[mi];
            if (sp.approach[static_cast<int>(m.approach)] && (sp.turns & turn_bit(m.turn)))
                members.push_back(mi);
        }
        if (members.empty())
            continue;
        bool duplicate = std::any_of(candidates.begin(), candidates.end(),
                                     [&](const auto &c) { return c.second == members; });
        if (!duplicate)
            candidates.emplace_back(pid, std::move(members));
    }
    for (const auto &[pid, members] : candidates) {
        bool dominated = std::any_of(candidates.begin(), candidates.end(), [&](const auto &other) {
            return is_strict_subset(members, other.second);
        });
        if (!dominated)
            node.phases.push_back(Phase{pid, members});
    }
}

void validate_phases(const IntersectionSpec &node) {
    if (node.movements.empty())
        return;
    std::set<int> covered;
    for (const Phase &phase : node.phases) {
        for (std::size_t a = 0; a < phase.movements.size(); ++a) {
            covered.insert(phase.movements[a]);
            for (std::size_t b = a + 1; b < phase.movements.size(); ++b)
                if (movements_conflict(node.movements[phase.movements[a]], node.movements[phase.movements[b]]))
                    throw ConfigError("intersection " + std::to_string(node.id) + ": phase " +
                                      std::to_string(phase.id) + " contains conflicting movements");
        }
    }
    if (covered.size() != node.movements.size())
        throw ConfigError("intersection " + std::to_string(node.id) + ": movement not served by any phase");
}

} // namespace emv::net
