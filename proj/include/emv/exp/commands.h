#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace emv::exp {

struct CommandOptions {
    std::string scenario;
    std::uint64_t seed = 1;
    int epochs = -1; // -1: the scenario's [train] epochs
    std::string combo;
    std::string checkpoint;
    std::string out;
    bool force = false;
    int seeds = 5;
    std::string which;        // ablation id
    std::string command_line; // echoed into the manifest
};

/// EMV_WORKERS, else 1.
int worker_count();

/// Creates out_dir; refuses an existing non-empty directory unless forced.
void prepare_out_dir(const std::filesystem::path &out_dir, bool force);

int run_train(const CommandOptions &opt, std::ostream &log);
int run_eval(const CommandOptions &opt, std::ostream &log);
int run_benchmark(const CommandOptions &opt, std::ostream &log);
int run_ablation(const CommandOptions &opt, std::ostream &log);
int run_report(const CommandOptions &opt, std::ostream &log);

/// FNV-1a over the canonical scenario text, 16 hex digits.
std::string scenario_hash(const std::string &canonical_text);

/// Version string baked in at configure time.
const char *version_string();

/// Runs jobs 0..count-1 on up to `workers` threads; the first exception is rethrown.
void parallel_for(int count, int workers, const std::function<void(int)> &job);

} // namespace emv::exp
