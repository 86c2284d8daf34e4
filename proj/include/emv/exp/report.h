#pragma once

#include "emv/exp/episode.h"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace emv::exp {

/// "%.6g", or "NA".
std::string fmt(double v);
std::string fmt(const std::optional<double> &v);

struct Stat {
    int n = 0;
    std::optional<double> mean;
    std::optional<double> std; // sample standard deviation, needs n >= 2
};
Stat describe(const std::vector<double> &values);

/// Variance of per-episode mean reward over the last quarter of the curve.
double tail_reward_variance(const std::vector<ma2c::EpisodeRecord> &curve);

struct SummaryRow {
    std::string label;
    int runs = 0;
    Stat t_emv;
    Stat t_avg;
    Stat emergency_lanes;
    std::optional<double> reward_variance; // ablations only
};
SummaryRow summarize(const std::string &label, const std::vector<RunMetrics> &runs);

void write_metrics_csv(const std::filesystem::path &path, const std::vector<RunMetrics> &runs);
void write_summary_csv(const std::filesystem::path &path, const std::vector<SummaryRow> &rows);
void write_learning_curve_csv(const std::filesystem::path &path, const std::vector<ma2c::EpisodeRecord> &curve);
void write_route_csv(const std::filesystem::path &path, const std::vector<ma2c::RouteTraceRow> &rows);

/// Minimal CSV reader for files this module writes (no quoting).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    int column(const std::string &name) const; // -1 when absent
};
CsvTable read_csv(const std::filesystem::path &path);

/// Writes report.md and plotdata/ under out_dir from whatever runs it finds there.
/// Returns the number of runs found.
int emit_report(const std::filesystem::path &out_dir);

} // namespace emv::exp
