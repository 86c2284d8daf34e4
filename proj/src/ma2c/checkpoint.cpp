#include "emv/ma2c/trainer.h"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace emv::ma2c {

namespace {

constexpr char kMagic[8] = {'E', 'M', 'V', 'C', 'K', 'P', 'T', '1'};

class Writer {
public:
    explicit Writer(const std::string &path) : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
        if (!out_)
            throw std::runtime_error("cannot write checkpoint '" + path + "'");
    }
    template <typename T> void pod(const T &v) { out_.write(reinterpret_cast<const char *>(&v), sizeof v); }
    void str(const std::string &s) {
        pod<std::uint64_t>(s.size());
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    void vec(const Vec &v) {
        pod<std::uint64_t>(static_cast<std::uint64_t>(v.size()));
        out_.write(reinterpret_cast<const char *>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    }
    void finish() {
        out_.flush();
        if (!out_)
            throw std::runtime_error("write failed for checkpoint '" + path_ + "'");
    }

private:
    std::ofstream out_;
    std::string path_;
};

class Reader {
public:
    explicit Reader(const std::string &path) : in_(path, std::ios::binary), path_(path) {
        if (!in_)
            throw std::runtime_error("cannot read checkpoint '" + path + "'");
        char magic[8];
        in_.read(magic, 8);
        if (!in_ || std::memcmp(magic, kMagic, 8) != 0)
            throw std::runtime_error("'" + path + "' is not a checkpoint");
    }
    template <typename T> T pod() {
        T v{};
        in_.read(reinterpret_cast<char *>(&v), sizeof v);
        check();
        return v;
    }
    std::string str() {
        auto n = pod<std::uint64_t>();
        if (n > (1u << 20))
            fail("corrupt string length");
        std::string s(n, '\0');
        in_.read(s.data(), static_cast<std::streamsize>(n));
        check();
        return s;
    }
    void vec(Vec &v, const char *what) {
        auto n = pod<std::uint64_t>();
        if (n != static_cast<std::uint64_t>(v.size()))
            fail(std::string(what) + " has " + std::to_string(n) + " values, expected " + std::to_string(v.size()));
        in_.read(reinterpret_cast<char *>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
        check();
    }
    [[noreturn]] void fail(const std::string &what) const {
        throw std::runtime_error("checkpoint '" + path_ + "': " + what);
    }

private:
    void check() {
        if (!in_)
            fail("truncated");
    }
    std::ifstream in_;
    std::string path_;
};

void write_shape(Writer &w, const NetShape &s) {
    for (int v : {s.obs, s.fp, s.obs_hidden, s.fp_hidden, s.lstm, s.out})
        w.pod<std::int32_t>(v);
}

NetShape read_shape(Reader &r) {
    NetShape s;
    s.obs = r.pod<std::int32_t>();
    s.fp = r.pod<std::int32_t>();
    s.obs_hidden = r.pod<std::int32_t>();
    s.fp_hidden = r.pod<std::int32_t>();
    s.lstm = r.pod<std::int32_t>();
    s.out = r.pod<std::int32_t>();
    return s;
}

void write_adam(Writer &w, const Adam &a) {
    w.pod<std::int64_t>(a.t);
    w.vec(a.m);
    w.vec(a.v);
}

void read_adam(Reader &r, Adam &a) {
    a.t = r.pod<std::int64_t>();
    r.vec(a.m, "optimizer moment");
    r.vec(a.v, "optimizer moment");
}

CheckpointInfo read_header(Reader &r) {
    CheckpointInfo info;
    info.variant = r.str();
    info.fingerprint = r.pod<std::uint8_t>() != 0;
    info.updates = r.pod<std::int64_t>();
    info.episodes = r.pod<std::int32_t>();
    info.seed = r.pod<std::uint64_t>();
    info.agents = r.pod<std::int32_t>();
    return info;
}

} // namespace

CheckpointInfo read_checkpoint_info(const std::string &path) {
    Reader r(path);
    return read_header(r);
}

void Trainer::save(const std::string &path) const {
    Writer w(path);
    for (char c : kMagic)
        w.pod(c);
    w.str(variant_.name);
    w.pod<std::uint8_t>(variant_.fingerprint ? 1 : 0);
    w.pod<std::int64_t>(updates_);
    w.pod<std::int32_t>(episodes_);
    w.pod<std::uint64_t>(seed_);
    w.pod<std::int32_t>(static_cast<std::int32_t>(models_.size()));
    std::ostringstream rng;
    rng << rng_.engine();
    w.str(rng.str());
    for (std::size_t i = 0; i < models_.size(); ++i) {
        const AgentModel &m = models_[i];
        write_shape(w, m.policy.shape());
        write_shape(w, m.value.shape());
        w.vec(m.policy.params());
        w.vec(m.value.params());
        write_adam(w, m.policy_opt);
        write_adam(w, m.value_opt);
        w.vec(value_state_[i].h);
        w.vec(value_state_[i].c);
    }
    w.finish();
}

void Trainer::load(const std::string &path) {
    Reader r(path);
    CheckpointInfo info = read_header(r);
    if (info.variant != variant_.name || info.fingerprint != variant_.fingerprint)
        r.fail("variant '" + info.variant + "' does not match '" + variant_.name + "'");
    if (info.agents != static_cast<int>(models_.size()))
        r.fail("has " + std::to_string(info.agents) + " agents, scenario has " + std::to_string(models_.size()));
    std::istringstream rng(r.str());
    std::mt19937_64 engine;
    rng >> engine;
    if (!rng)
        r.fail("corrupt RNG state");

    // read into copies so a failed load leaves the trainer untouched
    std::vector<AgentModel> models = models_;
    std::vector<RecurrentState> value_state(models_.size());
    for (std::size_t i = 0; i < models.size(); ++i) {
        AgentModel &m = models[i];
        if (!(read_shape(r) == m.policy.shape()) || !(read_shape(r) == m.value.shape()))
            r.fail("network shape of agent " + std::to_string(i) + " does not match the scenario");
        r.vec(m.policy.params(), "policy parameters");
        r.vec(m.value.params(), "value parameters");
        read_adam(r, m.policy_opt);
        read_adam(r, m.value_opt);
        value_state[i].zero(config_.lstm_hidden);
        r.vec(value_state[i].h, "value state");
        r.vec(value_state[i].c, "value state");
    }
    models_ = std::move(models);
    value_state_ = std::move(value_state);
    rng_.engine() = engine;
    updates_ = info.updates;
    episodes_ = info.episodes;
    seed_ = info.seed; // episode seeds continue where the saved run left off
    fill_ = 0;
    episode_open_ = false;
}

} // namespace emv::ma2c
