#include "emv/ma2c/trainer.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace emv::ma2c {

const std::vector<std::string> &ablation_ids() {
    static const std::vector<std::string> ids = {"presslight_reward", "no_secondary", "no_primary", "no_fingerprint"};
    return ids;
}

Variant variant_by_name(const std::string &name, double beta) {
    Variant v;
    v.name = name;
    v.reward.beta = beta;
    if (name == "emvlight")
        return v;
    if (name == "presslight_reward")
        v.reward.pressure = agents::PressureKind::PressLight;
    else if (name == "no_secondary")
        v.reward.secondary_as_normal = true;
    else if (name == "no_primary")
        v.reward.primary_as_normal = true;
    else if (name == "no_fingerprint")
        v.fingerprint = false;
    else {
        std::string valid = "emvlight";
        for (const auto &id : ablation_ids())
            valid += ", " + id;
        throw std::invalid_argument("unknown variant '" + name + "' (valid: " + valid + ")");
    }
    return v;
}

std::uint64_t Trainer::episode_seed(std::uint64_t base, int episode) {
    // splitmix64 of (base, episode)
    std::uint64_t z = base * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(episode) + 0x632BE59BD9B4E019ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Trainer::Trainer(const net::Scenario &scenario, const net::TrainConfig &config, Variant variant, std::uint64_t seed)
    : scenario_(&scenario), config_(config), variant_(std::move(variant)), seed_(seed), rng_(seed) {
    variant_.reward.beta = config.beta;
    env_ = std::make_unique<agents::MarlEnv>(scenario, variant_.reward);
    const int n = env_->agent_count();
    const int N = config.batch_size;
    discount_ = agents::discount_matrix(scenario.network, config.alpha);
    models_.resize(n);
    batch_.resize(n);
    for (int i = 0; i < n; ++i) {
        NetShape shape;
        shape.obs = env_->joint_width(i);
        shape.fp = variant_.fingerprint ? env_->fingerprint_width(i) : 0;
        shape.obs_hidden = config.obs_hidden;
        shape.fp_hidden = config.fp_hidden;
        shape.lstm = config.lstm_hidden;
        shape.out = env_->action_count(i);
        models_[i].policy = RecurrentNet(shape);
        shape.out = 1;
        models_[i].value = RecurrentNet(shape);
    }
    for (int i = 0; i < n; ++i) {
        models_[i].policy.init(rng_, config.init_std, true);
        models_[i].value.init(rng_, config.init_std, false);
        models_[i].policy_opt = Adam(models_[i].policy.shape().param_count());
        models_[i].value_opt = Adam(models_[i].value.shape().param_count());
        const NetShape &s = models_[i].policy.shape();
        batch_[i].obs.setZero(s.obs, N + 1);
        batch_[i].fp.setZero(s.fp, N + 1);
        batch_[i].actions.assign(N, 0);
    }
    rewards_.setZero(n, N);
    terminal_.assign(N, 0);
    reset_.assign(N + 1, 0);
    policy_state_.resize(n);
    value_state_.resize(n);
    prev_pi_.resize(n);
    for (int i = 0; i < n; ++i)
        value_state_[i].zero(config.lstm_hidden);
}

std::uint64_t Trainer::parameter_checksum() const {
    std::uint64_t h = 0;
    for (const AgentModel &m : models_)
        h = h * 31 + checksum(m.policy.params()) * 7 + checksum(m.value.params());
    return h;
}

double Trainer::learning_rate_factor() const {
    if (planned_updates_ <= 0)
        return 1.0;
    double progress = std::min(1.0, static_cast<double>(updates_) / static_cast<double>(planned_updates_));
    return 1.0 - (1.0 - config_.lr_final_fraction) * progress;
}

void Trainer::begin_episode(std::uint64_t sim_seed) {
    env_->reset(sim_seed);
    for (int i = 0; i < env_->agent_count(); ++i) {
        policy_state_[i].zero(config_.lstm_hidden);
        prev_pi_[i] = Vec::Constant(env_->action_count(i), 1.0 / env_->action_count(i));
    }
    episode_open_ = true;
    episode_start_ = true;
    reward_sum_ = 0.0;
    reward_count_ = 0;
}

namespace {

void write_fingerprint(const net::Network &net, const std::vector<Vec> &prev_pi, net::NodeId i, double *out) {
    for (net::NodeId j : net.node(i).neighbors)
        out = std::copy(prev_pi[j].data(), prev_pi[j].data() + prev_pi[j].size(), out);
}

} // namespace

void Trainer::act(bool greedy, bool record, std::vector<int> &actions) {
    const int n = env_->agent_count();
    const net::Network &net = scenario_->network;
    actions.resize(n);
    std::vector<Vec> pis(n);
    Vec logits;
    for (int i = 0; i < n; ++i) {
        const RecurrentNet &policy = models_[i].policy;
        const NetShape &s = policy.shape();
        double *obs;
        double *fp;
        if (record) {
            obs = batch_[i].obs.col(fill_).data();
            fp = s.fp > 0 ? batch_[i].fp.col(fill_).data() : nullptr;
            if (fill_ == 0)
                batch_[i].policy_start = policy_state_[i];
        } else {
            scratch_obs_.resize(s.obs);
            scratch_fp_.resize(std::max(1, s.fp));
            obs = scratch_obs_.data();
            fp = s.fp > 0 ? scratch_fp_.data() : nullptr;
        }
        env_->joint_observation(i, obs);
        if (fp)
            write_fingerprint(net, prev_pi_, i, fp);
        logits.resize(s.out);
        policy.step(obs, fp, policy_state_[i], logits.data());
        pis[i] = softmax(logits.data(), s.out);
        actions[i] = greedy ? argmax_action(pis[i]) : sample_action(pis[i], rng_);
        if (record)
            batch_[i].actions[fill_] = actions[i];
    }
    if (record)
        reset_[fill_] = episode_start_;
    prev_pi_ = std::move(pis);
    episode_start_ = false;
}

void Trainer::finish_batch_column() {
    // the state after the last recorded step, used only for bootstrapping
    const net::Network &net = scenario_->network;
    const int N = fill_;
    for (int i = 0; i < env_->agent_count(); ++i) {
        env_->joint_observation(i, batch_[i].obs.col(N).data());
        if (batch_[i].fp.rows() > 0)
            write_fingerprint(net, prev_pi_, i, batch_[i].fp.col(N).data());
    }
    reset_[N] = terminal_[N - 1];
}

void Trainer::collect(int steps) {
    std::vector<int> actions;
    const int N = config_.batch_size;
    for (int k = 0; k < steps && fill_ < N; ++k) {
        if (!episode_open_ || env_->done())
            begin_episode(episode_seed(seed_, episodes_));
        act(false, true, actions);
        const std::vector<double> &r = env_->step(actions);
        for (int i = 0; i < env_->agent_count(); ++i) {
            rewards_(i, fill_) = r[i] * config_.reward_scale;
            reward_sum_ += r[i];
        }
        reward_count_ += env_->agent_count();
        terminal_[fill_] = env_->done();
        ++fill_;
        if (env_->done()) {
            episode_open_ = false;
            ++episodes_;
        }
    }
    if (fill_ > 0)
        finish_batch_column();
}

BatchTargets Trainer::compute_targets() const {
    const int n = env_->agent_count();
    const int N = fill_;
    if (N == 0)
        throw std::logic_error("no data in the batch");
    BatchTargets out;
    out.returns.resize(n);
    out.advantages.resize(n);
    out.values.resize(n);
    std::vector<char> reset(reset_.begin(), reset_.begin() + N + 1);
    for (int i = 0; i < n; ++i) {
        const AgentModel &m = models_[i];
        SequenceCache cache;
        Mat v;
        m.value.forward(batch_[i].obs.leftCols(N + 1), batch_[i].fp.leftCols(N + 1), value_state_[i], reset, cache,
                        v);
        out.values[i] = v.row(0).transpose();
        out.returns[i].resize(N);
        out.advantages[i].resize(N);
        for (int t = 0; t < N; ++t) {
            double adjusted = 0.0;
            for (int j = 0; j < n; ++j)
                adjusted += discount_[i][j] * rewards_(j, t);
            out.returns[i][t] = agents::local_return(adjusted, out.values[i][t + 1], config_.gamma, terminal_[t]);
            out.advantages[i][t] = out.returns[i][t] - out.values[i][t];
        }
    }
    return out;
}

void Trainer::update() {
    const int n = env_->agent_count();
    const int N = fill_;
    if (N == 0)
        return;
    BatchTargets targets = compute_targets();
    const double factor = learning_rate_factor();
    std::vector<char> reset(reset_.begin(), reset_.begin() + N + 1);
    std::vector<char> policy_reset(reset_.begin(), reset_.begin() + N);

    for (int i = 0; i < n; ++i) {
        AgentModel &m = models_[i];
        AgentBatch &b = batch_[i];

        SequenceCache vcache;
        Mat values;
        m.value.forward(b.obs.leftCols(N + 1), b.fp.leftCols(N + 1), value_state_[i], reset, vcache, values);
        Vec dv;
        double lv = value_loss(values.row(0).head(N).transpose(), targets.returns[i], &dv);
        Mat d_out = Mat::Zero(1, N + 1);
        d_out.row(0).head(N) = dv.transpose();
        Vec vgrad = Vec::Zero(m.value.params().size());
        m.value.backward(vcache, d_out, vgrad);
        value_state_[i].h = vcache.h.col(N - 1);
        value_state_[i].c = vcache.c.col(N - 1);

        SequenceCache pcache;
        Mat logits;
        m.policy.forward(b.obs.leftCols(N), b.fp.leftCols(N), b.policy_start, policy_reset, pcache, logits);
        Mat dlogits;
        std::vector<int> actions(b.actions.begin(), b.actions.begin() + N);
        double lp = policy_loss(logits, actions, targets.advantages[i], config_.entropy_coef, &dlogits);
        if (!std::isfinite(lv) || !std::isfinite(lp))
            throw std::runtime_error("training diverged: non-finite loss at update " + std::to_string(updates_) +
                                     " for agent " + std::to_string(i));
        Vec pgrad = Vec::Zero(m.policy.params().size());
        m.policy.backward(pcache, dlogits, pgrad);

        m.value_opt.step(m.value.params(), vgrad, config_.lr_value * factor, config_.grad_clip);
        m.policy_opt.step(m.policy.params(), pgrad, config_.lr_policy * factor, config_.grad_clip);
    }
    ++updates_;
    fill_ = 0;
}

EpisodeRecord Trainer::summarize(int episode, std::uint64_t seed) const {
    const sim::Simulator &sim = env_->sim();
    sim::Metrics m = sim.metrics();
    EpisodeRecord r;
    r.episode = episode;
    r.seed = seed;
    r.t_emv = m.t_emv;
    r.t_emv_censored = m.t_emv ? *m.t_emv : scenario_->sim.horizon_s - scenario_->emv.dispatch_s;
    r.t_avg = m.t_avg;
    r.mean_reward = reward_count_ ? reward_sum_ / static_cast<double>(reward_count_) : 0.0;
    r.emergency_lanes = m.emergency_lanes;
    r.emv_links = m.emv_links;
    r.completed = m.completed;
    r.emv_route = sim.emv().visited;
    return r;
}

std::vector<EpisodeRecord> Trainer::train(int episodes, const std::function<void(const EpisodeRecord &)> &on_episode) {
    std::vector<EpisodeRecord> records;
    if (episodes <= 0)
        return records;
    const int N = config_.batch_size;
    planned_updates_ =
        updates_ + std::max<long>(1, (static_cast<long>(episodes) * env_->horizon_steps() + fill_) / N);
    std::vector<int> actions;
    for (int e = 0; e < episodes; ++e) {
        const int index = episodes_;
        const std::uint64_t seed = episode_seed(seed_, index);
        begin_episode(seed);
        while (!env_->done()) {
            act(false, true, actions);
            const std::vector<double> &r = env_->step(actions);
            for (int i = 0; i < env_->agent_count(); ++i) {
                rewards_(i, fill_) = r[i] * config_.reward_scale;
                reward_sum_ += r[i];
            }
            reward_count_ += env_->agent_count();
            terminal_[fill_] = env_->done();
            ++fill_;
            if (fill_ == N) {
                finish_batch_column();
                update();
            }
        }
        episode_open_ = false;
        ++episodes_;
        records.push_back(summarize(index, seed));
        if (on_episode)
            on_episode(records.back());
    }
    return records;
}

EpisodeRecord Trainer::evaluate(std::uint64_t sim_seed, bool greedy, std::vector<sim::SimEvent> *events,
                                std::vector<RouteTraceRow> *route) {
    begin_episode(sim_seed);
    env_->sim().set_event_sink(events);
    std::vector<int> actions;
    while (!env_->done()) {
        act(greedy, false, actions);
        const std::vector<double> &r = env_->step(actions);
        for (double x : r)
            reward_sum_ += x;
        reward_count_ += env_->agent_count();
        if (route && env_->sim().emv_active()) {
            const agents::Roles &roles = env_->roles();
            const routing::EtaTable &t = env_->frozen_table();
            route->push_back(RouteTraceRow{env_->step_index(), env_->sim().emv().link,
                                           roles.primary != net::kNone ? t.eta[roles.primary] : 0.0,
                                           roles.secondary});
        }
    }
    env_->sim().set_event_sink(nullptr);
    episode_open_ = false;
    return summarize(-1, sim_seed);
}

} // namespace emv::ma2c
