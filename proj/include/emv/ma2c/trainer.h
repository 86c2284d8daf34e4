#pragma once

#include "emv/agents/marl_env.h"
#include "emv/ma2c/losses.h"
#include "emv/ma2c/recurrent_net.h"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace emv::ma2c {

/// Training variant: the full method or one of the ablations.
struct Variant {
    std::string name = "emvlight";
    agents::RewardOptions reward;
    bool fingerprint = true;
};

/// "emvlight", "presslight_reward", "no_secondary", "no_primary", "no_fingerprint".
/// Throws std::invalid_argument listing the valid ids otherwise.
Variant variant_by_name(const std::string &name, double beta = 0.5);
const std::vector<std::string> &ablation_ids();

struct EpisodeRecord {
    int episode = 0;
    std::uint64_t seed = 0;
    std::optional<double> t_emv; // absent when the EMV did not arrive
    double t_emv_censored = 0.0; // t_emv, or horizon - dispatch when it did not arrive
    std::optional<double> t_avg;
    double mean_reward = 0.0;
    int emergency_lanes = 0;
    int emv_links = 0;
    long completed = 0;
    std::vector<net::NodeId> emv_route;
};

struct RouteTraceRow {
    int step = 0;
    net::LinkId emv_link = net::kNone;
    double eta_s = 0.0;
    net::NodeId next = net::kNone;
};

struct AgentModel {
    RecurrentNet policy;
    RecurrentNet value;
    Adam policy_opt;
    Adam value_opt;
};

/// Targets computed at update time with the parameters frozen.
struct BatchTargets {
    std::vector<Vec> returns;    // per agent, batch length
    std::vector<Vec> advantages; // per agent
    std::vector<Vec> values;     // per agent, batch length + 1 (last is the bootstrap state)
};

struct CheckpointInfo {
    std::string variant;
    bool fingerprint = true;
    long updates = 0;
    int episodes = 0;
    std::uint64_t seed = 0;
    int agents = 0;
};

/// Reads only the header of a checkpoint written by Trainer::save.
CheckpointInfo read_checkpoint_info(const std::string &path);

/// Synchronous multi-agent advantage actor-critic with independent per-agent
/// networks, neighbor fingerprints and spatially discounted rewards.
class Trainer {
public:
    Trainer(const net::Scenario &scenario, const net::TrainConfig &config, Variant variant, std::uint64_t seed);
    Trainer(const Trainer &) = delete;
    Trainer &operator=(const Trainer &) = delete;

    /// Runs `episodes` training episodes; the learning rate decays linearly over them.
    std::vector<EpisodeRecord> train(int episodes, const std::function<void(const EpisodeRecord &)> &on_episode = {});

    /// One episode without learning on simulator seed `sim_seed`.
    EpisodeRecord evaluate(std::uint64_t sim_seed, bool greedy = true, std::vector<sim::SimEvent> *events = nullptr,
                           std::vector<RouteTraceRow> *route = nullptr);

    const std::vector<AgentModel> &models() const { return models_; }
    std::vector<AgentModel> &models() { return models_; }
    agents::MarlEnv &env() { return *env_; }
    const Variant &variant() const { return variant_; }
    const net::TrainConfig &config() const { return config_; }
    long updates() const { return updates_; }
    int episodes_done() const { return episodes_; }
    std::uint64_t parameter_checksum() const;
    double learning_rate_factor() const;

    /// Rollout without the update (tests): fills the batch with `steps` steps
    /// continuing the current episode, starting one if needed.
    void collect(int steps);
    int batch_fill() const { return fill_; }
    BatchTargets compute_targets() const;
    /// Gradient step on the current batch for every agent, then clears it.
    void update();

    void save(const std::string &path) const;
    /// Restores parameters, optimizer moments, counters, the base seed and RNG. Shapes must match.
    void load(const std::string &path);

    static std::uint64_t episode_seed(std::uint64_t base, int episode);

private:
    struct AgentBatch {
        Mat obs;
        Mat fp;
        std::vector<int> actions;
        RecurrentState policy_start;
        RecurrentState value_start;
    };

    void begin_episode(std::uint64_t sim_seed);
    void act(bool greedy, bool record, std::vector<int> &actions);
    void finish_batch_column();
    EpisodeRecord summarize(int episode, std::uint64_t seed) const;

    const net::Scenario *scenario_;
    net::TrainConfig config_;
    Variant variant_;
    std::uint64_t seed_;
    std::unique_ptr<agents::MarlEnv> env_;
    std::vector<AgentModel> models_;
    std::vector<std::vector<double>> discount_;
    sim::Rng rng_;

    // rollout state
    std::vector<RecurrentState> policy_state_;
    std::vector<RecurrentState> value_state_;
    std::vector<Vec> prev_pi_;
    bool episode_open_ = false;
    bool episode_start_ = false;
    double reward_sum_ = 0.0;
    long reward_count_ = 0;

    // batch
    std::vector<AgentBatch> batch_;
    Mat rewards_; // agents x batch
    std::vector<char> terminal_;
    std::vector<char> reset_;
    int fill_ = 0;

    long updates_ = 0;
    long planned_updates_ = 0;
    int episodes_ = 0;
    Vec scratch_obs_, scratch_fp_;
};

} // namespace emv::ma2c
