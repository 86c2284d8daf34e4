#include "emv/exp/commands.h"

#include "emv/exp/episode.h"
#include "emv/exp/report.h"

#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#ifndef EMV_VERSION
#define EMV_VERSION "unknown"
#endif

namespace emv::exp {

namespace fs = std::filesystem;
using nlohmann::json;

const char *version_string() { return EMV_VERSION; }

int worker_count() {
    const char *env = std::getenv("EMV_WORKERS");
    if (!env || !*env)
        return 1;
    char *end = nullptr;
    long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1 || n > 256)
        throw std::invalid_argument(std::string("EMV_WORKERS must be an integer in [1, 256], got '") + env + "'");
    return static_cast<int>(n);
}

void parallel_for(int count, int workers, const std::function<void(int)> &job) {
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i)
            job(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) {
                try {
                    job(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!error)
                        error = std::current_exception();
                }
            }
        });
    for (auto &t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

std::string scenario_hash(const std::string &text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void prepare_out_dir(const fs::path &out_dir, bool force) {
    if (out_dir.empty())
        throw std::invalid_argument("--out is required");
    if (fs::exists(out_dir)) {
        if (!fs::is_directory(out_dir))
            throw std::runtime_error("'" + out_dir.string() + "' exists and is not a directory");
        if (!fs::is_empty(out_dir) && !force)
            throw std::runtime_error("output directory '" + out_dir.string() +
                                     "' already exists; pass --force to overwrite");
    }
    fs::create_directories(out_dir);
}

namespace {

json config_echo(const net::Scenario &s) {
    const auto &c = s.sim;
    const auto &t = s.train;
    return json{{"sim",
                 {{"horizon_s", c.horizon_s},
                  {"substep_s", c.substep_s},
                  {"mdp_step_s", c.mdp_step_s},
                  {"saturation_rate", c.saturation_rate},
                  {"arrivals", c.bernoulli_arrivals ? "bernoulli" : "deterministic"},
                  {"travel_time_clamp_s", c.travel_time_clamp_s},
                  {"replan_period_s", c.replan_period_s},
                  {"ft_green_steps", c.ft_green_steps}}},
                {"train",
                 {{"gamma", t.gamma},
                  {"alpha", t.alpha},
                  {"entropy_coef", t.entropy_coef},
                  {"beta", t.beta},
                  {"batch_size", t.batch_size},
                  {"lr_policy", t.lr_policy},
                  {"lr_value", t.lr_value},
                  {"lr_final_fraction", t.lr_final_fraction},
                  {"grad_clip", t.grad_clip},
                  {"init_std", t.init_std},
                  {"reward_scale", t.reward_scale},
                  {"epochs", t.epochs},
                  {"obs_hidden", t.obs_hidden},
                  {"fp_hidden", t.fp_hidden},
                  {"lstm_hidden", t.lstm_hidden}}},
                {"emv",
                 {{"enabled", s.emv.enabled},
                  {"origin", s.emv.origin},
                  {"destination", s.emv.destination},
                  {"dispatch_s", s.emv.dispatch_s}}}};
}

void write_manifest(const fs::path &out_dir, const std::string &command, const CommandOptions &opt,
                    const net::Scenario *scenario, json extra = json::object()) {
    json m;
    m["tool"] = "emvctl";
    m["version"] = version_string();
    m["command"] = command;
    m["command_line"] = opt.command_line;
    m["seed"] = opt.seed;
    m["workers"] = worker_count();
    if (scenario) {
        std::string canonical = net::to_toml(*scenario);
        m["scenario_path"] = opt.scenario;
        m["scenario_name"] = scenario->name;
        m["scenario_hash"] = scenario_hash(canonical);
        m["config"] = config_echo(*scenario);
    }
    for (auto it = extra.begin(); it != extra.end(); ++it)
        m[it.key()] = it.value();
    std::ofstream out(out_dir / "manifest.json", std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write manifest in '" + out_dir.string() + "'");
    out << m.dump(2) << '\n';
}

net::Scenario load(const CommandOptions &opt) {
    if (opt.scenario.empty())
        throw std::invalid_argument("--scenario is required");
    return net::load_scenario(opt.scenario);
}

int epochs_of(const CommandOptions &opt, const net::Scenario &s) { return opt.epochs >= 0 ? opt.epochs : s.train.epochs; }

std::vector<std::uint64_t> seed_list(const CommandOptions &opt) {
    if (opt.seeds < 1)
        throw std::invalid_argument("--seeds must be at least 1");
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < opt.seeds; ++i)
        seeds.push_back(opt.seed + static_cast<std::uint64_t>(i));
    return seeds;
}

std::unique_ptr<ma2c::Trainer> trainer_from_checkpoint(const net::Scenario &s, const std::string &path) {
    if (path.empty())
        throw std::invalid_argument("combo emvlight needs --checkpoint");
    ma2c::CheckpointInfo info = ma2c::read_checkpoint_info(path);
    auto trainer = std::make_unique<ma2c::Trainer>(s, s.train, ma2c::variant_by_name(info.variant, s.train.beta), 0);
    trainer->load(path);
    return trainer;
}

} // namespace

int run_train(const CommandOptions &opt, std::ostream &log) {
    net::Scenario s = load(opt);
    const int epochs = epochs_of(opt, s);
    if (epochs < 0)
        throw std::invalid_argument("--epochs must be non-negative");
    ma2c::Variant variant = ma2c::variant_by_name(opt.which.empty() ? "emvlight" : opt.which, s.train.beta);
    fs::path out(opt.out);
    prepare_out_dir(out, opt.force);
    ma2c::Trainer trainer(s, s.train, variant, opt.seed);
    const int every = std::max(1, epochs / 20);
    auto curve = trainer.train(epochs, [&](const ma2c::EpisodeRecord &r) {
        if ((r.episode + 1) % every == 0)
            log << "episode " << r.episode + 1 << "/" << epochs << "  T_EMV " << fmt(r.t_emv) << "  T_avg "
                << fmt(r.t_avg) << "  reward " << fmt(r.mean_reward) << '\n';
    });
    trainer.save((out / "checkpoint.bin").string());
    write_learning_curve_csv(out / "learning_curve.csv", curve);
    write_manifest(out, "train", opt, &s,
                   json{{"epochs", epochs},
                        {"variant", variant.name},
                        {"updates", trainer.updates()},
                        {"parameter_checksum", trainer.parameter_checksum()}});
    log << "wrote " << (out / "checkpoint.bin").string() << '\n';
    return 0;
}

int run_eval(const CommandOptions &opt, std::ostream &log) {
    net::Scenario s = load(opt);
    if (opt.combo.empty())
        throw std::invalid_argument("--combo is required");
    Combo combo = combo_by_name(opt.combo);
    fs::path out(opt.out);
    std::unique_ptr<ma2c::Trainer> trainer;
    if (combo == Combo::EmvLight)
        trainer = trainer_from_checkpoint(s, opt.checkpoint);
    prepare_out_dir(out, opt.force);
    EpisodeTrace trace;
    RunMetrics m = trainer ? run_emvlight(*trainer, opt.seed, &trace) : run_baseline(s, combo, opt.seed, &trace);
    m.label = opt.combo;
    write_metrics_csv(out / "metrics.csv", {m});
    sim::write_events_csv(trace.events, (out / "events.csv").string());
    write_route_csv(out / "route.csv", trace.route);
    write_manifest(out, "eval", opt, &s, json{{"combo", opt.combo}, {"checkpoint", opt.checkpoint}});
    log << opt.combo << " seed " << opt.seed << ": T_EMV " << fmt(m.t_emv) << "  T_avg " << fmt(m.t_avg)
        << "  emergency lanes " << m.emergency_lanes << '\n';
    return 0;
}

int run_benchmark(const CommandOptions &opt, std::ostream &log) {
    net::Scenario s = load(opt);
    if (opt.combo.empty())
        throw std::invalid_argument("--combo is required (one of the combo ids or 'all')");
    std::vector<std::string> combos;
    if (opt.combo == "all") {
        for (const auto &id : combo_ids())
            if (id != "emvlight" || !opt.checkpoint.empty())
                combos.push_back(id);
    } else {
        combo_by_name(opt.combo);
        combos.push_back(opt.combo);
    }
    for (const auto &c : combos)
        if (c == "emvlight" && opt.checkpoint.empty())
            throw std::invalid_argument("combo emvlight needs --checkpoint");
    if (!opt.checkpoint.empty())
        ma2c::read_checkpoint_info(opt.checkpoint); // fail before creating anything
    const std::vector<std::uint64_t> seeds = seed_list(opt);
    fs::path out(opt.out);
    prepare_out_dir(out, opt.force);

    const int jobs = static_cast<int>(combos.size() * seeds.size());
    std::vector<RunMetrics> runs(jobs);
    parallel_for(jobs, worker_count(), [&](int j) {
        const std::string &c = combos[j / seeds.size()];
        const std::uint64_t seed = seeds[j % seeds.size()];
        Combo combo = combo_by_name(c);
        if (combo == Combo::EmvLight) {
            auto trainer = trainer_from_checkpoint(s, opt.checkpoint);
            runs[j] = run_emvlight(*trainer, seed);
        } else {
            runs[j] = run_baseline(s, combo, seed);
        }
        runs[j].label = c;
    });
    std::vector<SummaryRow> rows;
    for (std::size_t c = 0; c < combos.size(); ++c) {
        std::vector<RunMetrics> part(runs.begin() + static_cast<long>(c * seeds.size()),
                                     runs.begin() + static_cast<long>((c + 1) * seeds.size()));
        rows.push_back(summarize(combos[c], part));
        const SummaryRow &r = rows.back();
        log << combos[c] << ": T_EMV " << fmt(r.t_emv.mean) << " ± " << fmt(r.t_emv.std) << "  T_avg "
            << fmt(r.t_avg.mean) << " ± " << fmt(r.t_avg.std) << '\n';
    }
    write_metrics_csv(out / "metrics.csv", runs);
    write_summary_csv(out / "summary.csv", rows);
    json seeds_json = seeds;
    write_manifest(out, "benchmark", opt, &s,
                   json{{"combos", combos}, {"seeds", seeds_json}, {"checkpoint", opt.checkpoint}});
    return 0;
}

int run_ablation(const CommandOptions &opt, std::ostream &log) {
    net::Scenario s = load(opt);
    ma2c::Variant variant = ma2c::variant_by_name(opt.which, s.train.beta);
    const int epochs = epochs_of(opt, s);
    const std::vector<std::uint64_t> seeds = seed_list(opt);
    fs::path out(opt.out);
    prepare_out_dir(out, opt.force);

    std::vector<RunMetrics> runs(seeds.size());
    std::vector<double> variances(seeds.size());
    std::mutex log_mu;
    parallel_for(static_cast<int>(seeds.size()), worker_count(), [&](int j) {
        ma2c::Trainer trainer(s, s.train, variant, seeds[j]);
        auto curve = trainer.train(epochs);
        write_learning_curve_csv(out / ("learning_curve_seed" + std::to_string(seeds[j]) + ".csv"), curve);
        variances[j] = tail_reward_variance(curve);
        runs[j] = run_emvlight(trainer, seeds[j]);
        std::lock_guard<std::mutex> lock(log_mu);
        log << variant.name << " seed " << seeds[j] << ": T_EMV " << fmt(runs[j].t_emv) << "  T_avg "
            << fmt(runs[j].t_avg) << '\n';
    });
    SummaryRow row = summarize(variant.name, runs);
    row.reward_variance = describe(variances).mean;
    write_metrics_csv(out / "metrics.csv", runs);
    write_summary_csv(out / "summary.csv", {row});
    json seeds_json = seeds;
    write_manifest(out, "ablate", opt, &s, json{{"ablation", variant.name}, {"epochs", epochs}, {"seeds", seeds_json}});
    log << variant.name << ": T_EMV " << fmt(row.t_emv.mean) << " ± " << fmt(row.t_emv.std) << "  T_avg "
        << fmt(row.t_avg.mean) << " ± " << fmt(row.t_avg.std) << '\n';
    return 0;
}

int run_report(const CommandOptions &opt, std::ostream &log) {
    if (opt.out.empty())
        throw std::invalid_argument("--out is required");
    int found = emit_report(opt.out);
    log << "report: " << found << " run file(s) found, wrote " << (fs::path(opt.out) / "report.md").string() << '\n';
    return 0;
}

} // namespace emv::exp
