#include "emv/exp/report.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace emv::exp {

namespace fs = std::filesystem;

std::string fmt(double v) {
    if (!std::isfinite(v))
        return "NA";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string fmt(const std::optional<double> &v) { return v ? fmt(*v) : "NA"; }

Stat describe(const std::vector<double> &values) {
    Stat s;
    s.n = static_cast<int>(values.size());
    if (values.empty())
        return s;
    double sum = 0.0;
    for (double v : values)
        sum += v;
    double mean = sum / s.n;
    s.mean = mean;
    if (s.n >= 2) {
        double ss = 0.0;
        for (double v : values)
            ss += (v - mean) * (v - mean);
        s.std = std::sqrt(ss / (s.n - 1));
    }
    return s;
}

double tail_reward_variance(const std::vector<ma2c::EpisodeRecord> &curve) {
    if (curve.empty())
        return 0.0;
    std::size_t start = curve.size() - std::max<std::size_t>(1, curve.size() / 4);
    double sum = 0.0;
    for (std::size_t i = start; i < curve.size(); ++i)
        sum += curve[i].mean_reward;
    const double n = static_cast<double>(curve.size() - start);
    double mean = sum / n, ss = 0.0;
    for (std::size_t i = start; i < curve.size(); ++i)
        ss += (curve[i].mean_reward - mean) * (curve[i].mean_reward - mean);
    return ss / n;
}

SummaryRow summarize(const std::string &label, const std::vector<RunMetrics> &runs) {
    SummaryRow row;
    row.label = label;
    row.runs = static_cast<int>(runs.size());
    std::vector<double> te, ta, el;
    for (const RunMetrics &r : runs) {
        if (r.t_emv)
            te.push_back(*r.t_emv);
        if (r.t_avg)
            ta.push_back(*r.t_avg);
        el.push_back(r.emergency_lanes);
    }
    row.t_emv = describe(te);
    row.t_avg = describe(ta);
    row.emergency_lanes = describe(el);
    return row;
}

namespace {

std::ofstream open_out(const fs::path &path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write '" + path.string() + "'");
    return out;
}

std::string join_route(const std::vector<net::NodeId> &route) {
    std::string s;
    for (std::size_t i = 0; i < route.size(); ++i)
        s += (i ? "-" : "") + std::to_string(route[i]);
    return s.empty() ? "NA" : s;
}

std::vector<std::string> split(const std::string &line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

} // namespace

void write_metrics_csv(const fs::path &path, const std::vector<RunMetrics> &runs) {
    auto out = open_out(path);
    out << "label,seed,t_emv,t_emv_censored,t_avg,emergency_lanes,emv_links,spawned,completed,deferred,replans,"
           "emv_route\n";
    for (const RunMetrics &r : runs)
        out << r.label << ',' << r.seed << ',' << fmt(r.t_emv) << ','
            << (r.t_emv || r.t_emv_censored > 0 ? fmt(r.t_emv_censored) : "NA") << ',' << fmt(r.t_avg) << ','
            << r.emergency_lanes << ',' << r.emv_links << ',' << r.spawned << ',' << r.completed << ','
            << r.deferred << ',' << r.replans << ',' << join_route(r.emv_route) << '\n';
}

void write_summary_csv(const fs::path &path, const std::vector<SummaryRow> &rows) {
    auto out = open_out(path);
    out << "label,runs,t_emv_n,t_emv_mean,t_emv_std,t_avg_n,t_avg_mean,t_avg_std,emergency_lanes_mean,"
           "emergency_lanes_std,reward_var_last25\n";
    for (const SummaryRow &r : rows)
        out << r.label << ',' << r.runs << ',' << r.t_emv.n << ',' << fmt(r.t_emv.mean) << ',' << fmt(r.t_emv.std)
            << ',' << r.t_avg.n << ',' << fmt(r.t_avg.mean) << ',' << fmt(r.t_avg.std) << ','
            << fmt(r.emergency_lanes.mean) << ',' << fmt(r.emergency_lanes.std) << ',' << fmt(r.reward_variance)
            << '\n';
}

void write_learning_curve_csv(const fs::path &path, const std::vector<ma2c::EpisodeRecord> &curve) {
    auto out = open_out(path);
    out << "episode,seed,t_emv,t_emv_censored,t_avg,mean_reward,emergency_lanes,completed\n";
    for (const auto &r : curve)
        out << r.episode << ',' << r.seed << ',' << fmt(r.t_emv) << ',' << fmt(r.t_emv_censored) << ','
            << fmt(r.t_avg) << ',' << fmt(r.mean_reward) << ',' << r.emergency_lanes << ',' << r.completed << '\n';
}

void write_route_csv(const fs::path &path, const std::vector<ma2c::RouteTraceRow> &rows) {
    auto out = open_out(path);
    out << "step,emv_link,eta_s,next\n";
    for (const auto &r : rows)
        out << r.step << ',' << r.emv_link << ',' << fmt(r.eta_s) << ','
            << (r.next == net::kNone ? std::string("NA") : std::to_string(r.next)) << '\n';
}

int CsvTable::column(const std::string &name) const {
    auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
}

CsvTable read_csv(const fs::path &path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read '" + path.string() + "'");
    CsvTable t;
    std::string line;
    if (std::getline(in, line))
        t.header = split(line);
    while (std::getline(in, line))
        if (!line.empty())
            t.rows.push_back(split(line));
    return t;
}

namespace {

std::string cell(const CsvTable &t, const std::vector<std::string> &row, const std::string &name) {
    int c = t.column(name);
    return c >= 0 && c < static_cast<int>(row.size()) ? row[c] : "NA";
}

std::string mean_std(const CsvTable &t, const std::vector<std::string> &row, const std::string &stem) {
    std::string m = cell(t, row, stem + "_mean");
    std::string s = cell(t, row, stem + "_std");
    if (m == "NA")
        return "N/A";
    return s == "NA" ? m : m + " ± " + s;
}

std::string flat_name(const fs::path &rel) {
    std::string s = rel.generic_string();
    std::replace(s.begin(), s.end(), '/', '_');
    return s;
}

} // namespace

int emit_report(const fs::path &out_dir) {
    if (!fs::exists(out_dir))
        fs::create_directories(out_dir);
    std::vector<fs::path> summaries, curves, routes;
    for (const auto &entry : fs::recursive_directory_iterator(out_dir)) {
        if (!entry.is_regular_file())
            continue;
        fs::path rel = fs::relative(entry.path(), out_dir);
        if (*rel.begin() == "plotdata")
            continue;
        std::string name = entry.path().filename().string();
        if (name == "summary.csv")
            summaries.push_back(rel);
        else if (name.rfind("learning_curve", 0) == 0 && entry.path().extension() == ".csv")
            curves.push_back(rel);
        else if (name == "route.csv")
            routes.push_back(rel);
    }
    std::sort(summaries.begin(), summaries.end());
    std::sort(curves.begin(), curves.end());
    std::sort(routes.begin(), routes.end());

    std::ostringstream md;
    md << "# Run report\n\n";
    const int found = static_cast<int>(summaries.size() + curves.size() + routes.size());
    if (found == 0) {
        md << "No runs found under `" << out_dir.string() << "`.\n";
        auto out = open_out(out_dir / "report.md");
        out << md.str();
        return 0;
    }

    fs::path plot = out_dir / "plotdata";
    fs::create_directories(plot);
    std::set<std::string> seen_combos;
    bool any_benchmark = false;

    if (!summaries.empty()) {
        md << "## Summary (mean ± sample std over seeds)\n\n";
        for (const fs::path &rel : summaries) {
            CsvTable t = read_csv(out_dir / rel);
            md << "### " << rel.parent_path().generic_string() << "\n\n";
            md << "| method | runs | T_EMV (s) | T_avg (s) | emergency lanes | reward var (last 25%) |\n";
            md << "|---|---|---|---|---|---|\n";
            for (const auto &row : t.rows) {
                std::string label = cell(t, row, "label");
                md << "| " << label << " | " << cell(t, row, "runs") << " | " << mean_std(t, row, "t_emv") << " | "
                   << mean_std(t, row, "t_avg") << " | " << mean_std(t, row, "emergency_lanes") << " | "
                   << cell(t, row, "reward_var_last25") << " |\n";
                seen_combos.insert(label);
                for (const auto &id : combo_ids())
                    any_benchmark |= id == label && id != "emvlight";
            }
            md << "\n";
            fs::copy_file(out_dir / rel, plot / (flat_name(rel.parent_path() / "summary") + ".csv"),
                          fs::copy_options::overwrite_existing);
        }
        if (any_benchmark) {
            std::vector<std::string> missing;
            for (const auto &id : combo_ids())
                if (!seen_combos.count(id))
                    missing.push_back(id);
            if (!missing.empty()) {
                md << "Gaps: no run found for";
                for (const auto &m : missing)
                    md << " `" << m << "`";
                md << ".\n\n";
            }
        }
    } else {
        md << "## Summary\n\nNo benchmark or ablation summaries found.\n\n";
    }

    md << "## Learning curves\n\n";
    if (curves.empty())
        md << "No training runs found.\n\n";
    for (const fs::path &rel : curves) {
        CsvTable t = read_csv(out_dir / rel);
        std::string dest = flat_name(rel);
        fs::copy_file(out_dir / rel, plot / dest, fs::copy_options::overwrite_existing);
        int c = t.column("mean_reward");
        std::vector<double> tail;
        for (std::size_t i = t.rows.size() - std::min(t.rows.size(), std::max<std::size_t>(1, t.rows.size() / 4));
             i < t.rows.size(); ++i)
            if (c >= 0)
                tail.push_back(std::stod(t.rows[i][c]));
        Stat s = describe(tail);
        md << "- `" << rel.generic_string() << "`: " << t.rows.size() << " episodes, last-quarter mean reward "
           << fmt(s.mean) << " (plot data: `plotdata/" << dest << "`)\n";
    }
    md << "\n## Route traces\n\n";
    if (routes.empty())
        md << "No evaluation traces found.\n";
    for (const fs::path &rel : routes) {
        std::string dest = flat_name(rel);
        fs::copy_file(out_dir / rel, plot / dest, fs::copy_options::overwrite_existing);
        md << "- `" << rel.generic_string() << "` (plot data: `plotdata/" << dest << "`)\n";
    }
    auto out = open_out(out_dir / "report.md");
    out << md.str();
    return found;
}

} // namespace emv::exp
