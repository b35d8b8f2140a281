#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>

#include "ptloc/experiments.hpp"

using namespace ptloc;
using namespace ptloc::experiments;
using io::json;

namespace {

enum Exit { exit_ok = 0, exit_invariant = 1, exit_usage = 2, exit_numerical = 3 };

int exit_for(ErrorKind k) {
    switch (k) {
        case ErrorKind::config:
        case ErrorKind::io:
            return exit_usage;
        default:
            return exit_numerical;
    }
}

void diagnose(const std::string& command, int code, const std::string& kind, const std::string& message) {
    json d;
    d["status"] = "error";
    d["command"] = command;
    d["kind"] = kind;
    d["message"] = message;
    d["exit_code"] = code;
    std::cerr << d.dump() << std::endl;
}

std::vector<std::vector<io::Cell>> row_cells(const ExperimentReport& r) {
    std::vector<std::vector<io::Cell>> out;
    out.reserve(r.rows.size());
    for (const auto& row : r.rows)
        out.push_back({row.label, row.parameter, row.value, row.error, static_cast<long long>(row.pass)});
    return out;
}

std::vector<std::vector<io::Cell>> table_cells(const ExperimentReport& r) {
    std::vector<std::vector<io::Cell>> out;
    out.reserve(r.table.size());
    for (const auto& t : r.table) out.emplace_back(t.begin(), t.end());
    return out;
}

// Writes `<stem>.csv` (+ sidecar) and, if present, `<stem>_<table>.csv`. Returns the CSV paths.
std::vector<std::string> write_report(const std::filesystem::path& dir, const std::string& stem,
                                      const ExperimentReport& r, const io::Config& config) {
    std::vector<std::string> files;
    const auto main = dir / (stem + ".csv");
    io::write_table(main, {"label", "parameter", "value", "error", "pass"}, row_cells(r), config, r.metadata);
    files.push_back(main.string());
    if (!r.table_header.empty()) {
        const auto extra = dir / (stem + "_" + r.table_name + ".csv");
        io::write_table(extra, r.table_header, table_cells(r), config, r.metadata);
        files.push_back(extra.string());
    }
    return files;
}

struct Options {
    std::string config_path;
    std::string out_dir = "ptloc-out";
    std::vector<std::string> sets;
    int threads = 1;
};

using Runner = std::function<std::vector<ExperimentReport>(const ExperimentConfig&, const std::filesystem::path&)>;

const std::map<std::string, std::pair<std::string, Runner>>& commands() {
    static const std::map<std::string, std::pair<std::string, Runner>> table = {
        {"verify", {"run every module invariant and report pass/fail rows",
                    [](const ExperimentConfig& c, const auto&) { return std::vector{verify_suite(c)}; }}},
        {"classical-check", {"Poisson brackets and z = const restriction on sampled phase points",
                             [](const ExperimentConfig& c, const auto&) { return std::vector{classical_check(c)}; }}},
        {"nw-density", {"radial NW position density of the Gaussian state and its velocity",
                        [](const ExperimentConfig& c, const auto&) {
                            return std::vector{nw_density(c), nw_velocity_scan(c)};
                        }}},
        {"heg-leakage", {"out-of-ball probability of evolved compact NW states",
                         [](const ExperimentConfig& c, const auto&) {
                             std::vector<ExperimentReport> v{hegerfeldt_leakage(c)};
                             if (c.heg.spread) v.push_back(temporal_spread_report(c));
                             return v;
                         }}},
        {"time-povm", {"time-of-event density, mean, spread and completeness",
                       [](const ExperimentConfig& c, const auto&) { return std::vector{time_povm_report(c)}; }}},
        {"kijowski-arrival", {"arrival-time scan over z for a one-sided packet",
                              [](const ExperimentConfig& c, const auto&) { return std::vector{kijowski_arrival_scan(c)}; }}},
        {"state-io", {"save / load / round-trip a binary momentum state",
                      [](const ExperimentConfig& c, const std::filesystem::path& out) {
                          return std::vector{state_io_report(c, out)};
                      }}},
    };
    return table;
}

int run(const std::string& command, const Options& o) {
    try {
        io::Config user;
        if (!o.config_path.empty()) user = io::Config::load(o.config_path);
        for (const auto& s : o.sets) user.set(s);
        if (o.threads < 1) fail(ErrorKind::config, "--threads must be >= 1");
        thread_count() = o.threads;
        const ExperimentConfig cfg = make_config(user);
        const std::filesystem::path out = o.out_dir;

        // Everything is computed before anything is written, so a failed run leaves no files
        // (state-io excepted: its save step is the experiment).
        const auto reports = commands().at(command).second(cfg, out);

        json summary;
        summary["status"] = "ok";
        summary["command"] = command;
        summary["config_hash"] = cfg.raw.hash_hex();
        summary["outputs"] = json::array();
        bool ok = true;
        for (std::size_t i = 0; i < reports.size(); ++i) {
            const auto& r = reports[i];
            const std::string stem = i == 0 ? command : r.name;
            for (auto& f : write_report(out, stem, r, cfg.raw)) summary["outputs"].push_back(f);
            for (const auto& w : r.warnings) summary["warnings"].push_back(r.name + ": " + w);
            for (const auto& row : r.rows)
                if (!row.pass) summary["failed"].push_back(r.name + "/" + row.label);
            ok = ok && r.ok();
        }
        if (!ok) {
            summary["status"] = "invariant-failure";
            std::cout << summary.dump() << std::endl;
            diagnose(command, exit_invariant, "invariant-failure", "one or more rows failed; see " +
                                                                      summary["outputs"][0].get<std::string>());
            return exit_invariant;
        }
        std::cout << summary.dump() << std::endl;
        return exit_ok;
    } catch (const Error& e) {
        const int code = exit_for(e.kind());
        diagnose(command, code, to_string(e.kind()), e.what());
        return code;
    } catch (const std::exception& e) {
        diagnose(command, exit_numerical, "internal", e.what());
        return exit_numerical;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ptloc: relativistic localization and time-of-event experiments"};
    app.require_subcommand(1);
    Options o;
    std::string selected;
    for (const auto& [name, entry] : commands()) {
        auto* sub = app.add_subcommand(name, entry.first);
        sub->add_option("--config", o.config_path, "flat key = value config file");
        sub->add_option("--out", o.out_dir, "output directory")->capture_default_str();
        sub->add_option("--set", o.sets, "override a config key (key=value), repeatable")->take_all();
        sub->add_option("--threads", o.threads, "worker threads")->capture_default_str();
        sub->callback([&selected, n = name] { selected = n; });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        diagnose(selected, exit_usage, "usage", e.what());
        return exit_usage;
    }
    return run(selected, o);
}
