#include "support.h"

#include "emv/exp/commands.h"
#include "emv/exp/episode.h"
#include "emv/exp/report.h"

#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace emv;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Small, quick training setup written to disk for the command-level tests.
fs::path write_small_scenario(const fs::path &dir) {
    auto text = test::empty_grid_text(2, 2, 100, 20) +
                "[[flow]]\norigins = [0, 3]\ndestinations = [1, 2]\nrate = 600\n"
                "[train]\nbatch_size = 10\nobs_hidden = 8\nfp_hidden = 4\nlstm_hidden = 6\nepochs = 3\n";
    auto path = dir / "small.toml";
    std::ofstream(path) << text;
    return path;
}

int emvctl(const std::string &args) {
    std::string cmd = std::string(EMVCTL_PATH) + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST_SUITE("exp") {

TEST_CASE("combo ids round-trip and unknown ids list the valid ones") {
    for (const auto &id : exp::combo_ids())
        CHECK(exp::combo_name(exp::combo_by_name(id)) == id);
    CHECK(exp::combo_ids().size() == 6);
    try {
        exp::combo_by_name("w_magic");
        FAIL("expected an error");
    } catch (const std::invalid_argument &e) {
        CHECK(std::string(e.what()).find("w_dynamic_mp") != std::string::npos);
    }
}

TEST_CASE("formatting and summary statistics") {
    CHECK(exp::fmt(1.0 / 3.0) == "0.333333");
    CHECK(exp::fmt(std::optional<double>{}) == "NA");
    CHECK(exp::fmt(NAN) == "NA");
    auto s = exp::describe({2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0});
    CHECK(s.n == 8);
    CHECK(*s.mean == 5.0);
    CHECK(*s.std == doctest::Approx(std::sqrt(32.0 / 7.0)));
    CHECK_FALSE(exp::describe({1.0}).std);
    CHECK_FALSE(exp::describe({}).mean);

    std::vector<ma2c::EpisodeRecord> curve(8);
    for (int i = 0; i < 8; ++i)
        curve[i].mean_reward = i;
    CHECK(exp::tail_reward_variance(curve) == doctest::Approx(0.25)); // {6, 7}
}

TEST_CASE("summary skips missing travel times but counts every run") {
    std::vector<exp::RunMetrics> runs(3);
    runs[0].t_emv = 70.0;
    runs[1].t_emv = 80.0;
    runs[0].t_avg = runs[1].t_avg = runs[2].t_avg = 100.0;
    runs[2].emergency_lanes = 3;
    auto row = exp::summarize("x", runs);
    CHECK(row.runs == 3);
    CHECK(row.t_emv.n == 2);
    CHECK(*row.t_emv.mean == 75.0);
    CHECK(*row.emergency_lanes.mean == 1.0);
}

TEST_CASE("CSV writers and reader agree") {
    test::TempDir dir("csv");
    exp::RunMetrics m;
    m.label = "w_static_ft";
    m.seed = 3;
    m.t_emv = 71.25;
    m.emv_route = {0, 1, 2};
    exp::write_metrics_csv(dir.path / "metrics.csv", {m});
    auto t = exp::read_csv(dir.path / "metrics.csv");
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0][t.column("t_emv")] == "71.25");
    CHECK(t.rows[0][t.column("t_avg")] == "NA");
    CHECK(t.rows[0][t.column("emv_route")] == "0-1-2");
    CHECK(t.column("missing") == -1);
}

TEST_CASE("report on an empty directory says so") {
    test::TempDir dir("report_empty");
    CHECK(exp::emit_report(dir.path) == 0);
    auto text = slurp(dir.path / "report.md");
    CHECK(text.find("No runs found") != std::string::npos);
}

TEST_CASE("output directory guard") {
    test::TempDir dir("guard");
    fs::path out = dir.path / "run";
    CHECK_NOTHROW(exp::prepare_out_dir(out, false));
    CHECK_NOTHROW(exp::prepare_out_dir(out, false)); // still empty
    std::ofstream(out / "x.csv") << "a\n";
    CHECK_THROWS_WITH(exp::prepare_out_dir(out, false), doctest::Contains("--force"));
    CHECK_NOTHROW(exp::prepare_out_dir(out, true));
    CHECK_THROWS(exp::prepare_out_dir("", false));
}

TEST_CASE("worker count comes from the environment") {
    ::unsetenv("EMV_WORKERS");
    CHECK(exp::worker_count() == 1);
    ::setenv("EMV_WORKERS", "3", 1);
    CHECK(exp::worker_count() == 3);
    ::setenv("EMV_WORKERS", "zero", 1);
    CHECK_THROWS(exp::worker_count());
    ::unsetenv("EMV_WORKERS");
}

TEST_CASE("parallel_for runs every job once and rethrows") {
    std::vector<int> hits(50, 0);
    exp::parallel_for(50, 4, [&](int i) { hits[i] += 1; });
    CHECK(std::count(hits.begin(), hits.end(), 1) == 50);
    CHECK_THROWS_AS(exp::parallel_for(5, 2,
                                      [](int i) {
                                          if (i == 3)
                                              throw std::runtime_error("boom");
                                      }),
                    std::runtime_error);
}

TEST_CASE("baseline runs are reproducible per seed") {
    auto scn = test::load("grid3x3.toml");
    auto a = exp::run_baseline(scn, exp::Combo::WDynamicMp, 4);
    auto b = exp::run_baseline(scn, exp::Combo::WDynamicMp, 4);
    CHECK(a.t_emv == b.t_emv);
    CHECK(a.t_avg == b.t_avg);
    CHECK(a.emv_route == b.emv_route);
    auto c = exp::run_baseline(scn, exp::Combo::WStaticFt, 4);
    auto d = exp::run_baseline(scn, exp::Combo::WStaticFt, 5);
    CHECK(c.t_avg != d.t_avg);
}

TEST_CASE("train twice with the same seed: byte-identical learning curves and checkpoints") {
    test::TempDir dir("train");
    auto scenario = write_small_scenario(dir.path);
    exp::CommandOptions opt;
    opt.scenario = scenario.string();
    opt.seed = 9;
    std::ostringstream log;
    opt.out = (dir.path / "a").string();
    REQUIRE(exp::run_train(opt, log) == 0);
    opt.out = (dir.path / "b").string();
    REQUIRE(exp::run_train(opt, log) == 0);
    CHECK(slurp(dir.path / "a" / "learning_curve.csv") == slurp(dir.path / "b" / "learning_curve.csv"));
    CHECK(slurp(dir.path / "a" / "checkpoint.bin") == slurp(dir.path / "b" / "checkpoint.bin"));
    auto curve = exp::read_csv(dir.path / "a" / "learning_curve.csv");
    CHECK(curve.rows.size() == 3);
    auto manifest = nlohmann::json::parse(slurp(dir.path / "a" / "manifest.json"));
    CHECK(manifest["command"] == "train");
    CHECK(manifest["seed"] == 9);
    CHECK(manifest["scenario_hash"].get<std::string>().size() == 16);
    CHECK(manifest["config"]["train"]["batch_size"] == 10);

    // refuses to overwrite without --force
    CHECK_THROWS(exp::run_train(opt, log));
    opt.force = true;
    CHECK(exp::run_train(opt, log) == 0);
}

TEST_CASE("eval of a trained checkpoint, and the report over the results") {
    test::TempDir dir("eval");
    auto scenario = write_small_scenario(dir.path);
    std::ostringstream log;
    exp::CommandOptions train;
    train.scenario = scenario.string();
    train.out = (dir.path / "train").string();
    REQUIRE(exp::run_train(train, log) == 0);

    exp::CommandOptions ev;
    ev.scenario = scenario.string();
    ev.combo = "emvlight";
    ev.out = (dir.path / "eval").string();
    CHECK_THROWS_WITH(exp::run_eval(ev, log), doctest::Contains("--checkpoint"));
    CHECK_FALSE(fs::exists(ev.out));
    ev.checkpoint = (dir.path / "train" / "checkpoint.bin").string();
    REQUIRE(exp::run_eval(ev, log) == 0);
    for (const char *f : {"metrics.csv", "events.csv", "route.csv", "manifest.json"})
        CHECK(fs::exists(dir.path / "eval" / f));

    exp::CommandOptions bench;
    bench.scenario = scenario.string();
    bench.combo = "all";
    bench.seeds = 2;
    bench.out = (dir.path / "bench").string();
    REQUIRE(exp::run_benchmark(bench, log) == 0);
    auto summary = exp::read_csv(dir.path / "bench" / "summary.csv");
    CHECK(summary.rows.size() == 5); // no checkpoint: emvlight left out
    auto metrics = exp::read_csv(dir.path / "bench" / "metrics.csv");
    CHECK(metrics.rows.size() == 10);

    CHECK(exp::emit_report(dir.path) >= 2);
    auto report = slurp(dir.path / "report.md");
    CHECK(report.find("w_dynamic_mp") != std::string::npos);
    CHECK(fs::exists(dir.path / "plotdata"));
}

TEST_CASE("command line front end") {
    test::TempDir dir("cli");
    auto scenario = write_small_scenario(dir.path);
    CHECK(emvctl("--version") == 0);
    CHECK(emvctl("") != 0);
    CHECK(emvctl("eval --scenario " + scenario.string() + " --combo nope --out " + (dir.path / "x").string()) == 1);
    CHECK(emvctl("benchmark --scenario " + scenario.string() + " --combo w_static_ft --seeds 1 --out " +
                 (dir.path / "b").string()) == 0);
    CHECK(emvctl("benchmark --scenario " + scenario.string() + " --combo w_static_ft --seeds 1 --out " +
                 (dir.path / "b").string()) == 1);
    CHECK(emvctl("report --out " + dir.path.string()) == 0);
    CHECK(emvctl("train --scenario /nonexistent.toml --out " + (dir.path / "t").string()) != 0);
}

} // TEST_SUITE
