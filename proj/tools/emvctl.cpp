// emvctl: train, evaluate, benchmark and ablate on in-repo scenarios.
#include "emv/exp/commands.h"

#include <CLI11.hpp>

#include <iostream>

namespace {

std::string joined_args(int argc, char **argv) {
    std::string s;
    for (int i = 0; i < argc; ++i)
        s += (i ? " " : "") + std::string(argv[i]);
    return s;
}

} // namespace

int main(int argc, char **argv) {
    using namespace emv::exp;
    CLI::App app{"EMV routing and signal-control experiments"};
    app.set_version_flag("--version", std::string(version_string()));
    app.require_subcommand(1);
    CommandOptions opt;
    opt.command_line = joined_args(argc, argv);

    auto common = [&](CLI::App *sub, bool needs_scenario) {
        auto *s = sub->add_option("--scenario", opt.scenario, "scenario TOML file");
        if (needs_scenario)
            s->required()->check(CLI::ExistingFile);
        sub->add_option("--out", opt.out, "output directory")->required();
        sub->add_flag("--force", opt.force, "overwrite an existing output directory");
    };

    auto *train = app.add_subcommand("train", "train the signal agents");
    common(train, true);
    train->add_option("--seed", opt.seed, "training seed")->capture_default_str();
    train->add_option("--epochs", opt.epochs, "training episodes (default: scenario [train] epochs)");
    train->add_option("--variant", opt.which, "emvlight or an ablation id")->default_str("emvlight");

    auto *eval = app.add_subcommand("eval", "run one episode and write metrics, events and the route trace");
    common(eval, true);
    eval->add_option("--combo", opt.combo, "ft_no_emv, w_static_ft, w_static_mp, w_dynamic_ft, w_dynamic_mp, emvlight")
        ->required();
    eval->add_option("--checkpoint", opt.checkpoint, "trained checkpoint (emvlight)");
    eval->add_option("--seed", opt.seed, "simulation seed")->capture_default_str();

    auto *bench = app.add_subcommand("benchmark", "run a combo over several seeds and summarize");
    common(bench, true);
    bench->add_option("--combo", opt.combo, "combo id or 'all'")->required();
    bench->add_option("--checkpoint", opt.checkpoint, "trained checkpoint (emvlight)");
    bench->add_option("--seed", opt.seed, "first seed")->capture_default_str();
    bench->add_option("--seeds", opt.seeds, "number of seeds")->capture_default_str();

    auto *ablate = app.add_subcommand("ablate", "train and evaluate an ablation over several seeds");
    common(ablate, true);
    ablate->add_option("--which", opt.which, "presslight_reward, no_secondary, no_primary, no_fingerprint")
        ->required();
    ablate->add_option("--epochs", opt.epochs, "training episodes per seed");
    ablate->add_option("--seed", opt.seed, "first seed")->capture_default_str();
    ablate->add_option("--seeds", opt.seeds, "number of seeds")->capture_default_str();

    auto *report = app.add_subcommand("report", "collect runs under a directory into report.md and plotdata/");
    report->add_option("--out", opt.out, "directory holding runs")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (train->parsed())
            return run_train(opt, std::cout);
        if (eval->parsed())
            return run_eval(opt, std::cout);
        if (bench->parsed())
            return run_benchmark(opt, std::cout);
        if (ablate->parsed())
            return run_ablation(opt, std::cout);
        return run_report(opt, std::cout);
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
