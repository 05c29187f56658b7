// picsim: experiment harness for the charging-station telemetry simulator.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "picsim/config.hpp"
#include "picsim/experiments.hpp"
#include "picsim/trace_io.hpp"

namespace fs = std::filesystem;
using namespace picsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitCheck = 3;

struct RunOptions {
    std::string config;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::string out = "picsim-out";
    std::string format = "csv";
    bool check = false;
};

void add_run_options(CLI::App* sub, RunOptions& o) {
    auto* config = sub->add_option("--config", o.config, "Experiment config file (JSON)");
    auto* preset = sub->add_option("--preset", o.preset, "Built-in config")
                       ->check(CLI::IsMember(cli::preset_names()));
    config->excludes(preset);
    sub->add_option("--seed", o.seed, "Override the config's master seed");
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    sub->add_option("--format", o.format, "Plot output format")
        ->check(CLI::IsMember({"csv", "svg"}))
        ->capture_default_str();
    sub->add_flag("--check", o.check, "Exit 3 if any acceptance check fails");
}

int run_command(cli::Command command, const RunOptions& o) {
    cli::ExperimentConfig config;
    try {
        config = o.config.empty() ? cli::preset(o.preset.empty() ? "default" : o.preset) : cli::load_config(o.config);
        if (o.seed) config.seed = *o.seed;
        cli::validate(config);
    } catch (const cli::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    const cli::RunResult run = cli::run_experiment(command, config);
    const fs::path out(o.out);
    fs::create_directories(out);
    const fs::path trace_path = out / (std::string(cli::to_string(command)) + ".trace.jsonl");
    {
        std::ofstream f(trace_path);
        sim::write_trace(f, run.trace, run.header);
        if (!f) {
            std::cerr << "cannot write " << trace_path << '\n';
            return kExitFailure;
        }
    }

    // Metrics come from the trace file, not from the run's memory.
    std::ifstream in(trace_path);
    const sim::TraceFile file = sim::read_trace(in);
    const cli::ExperimentConfig recorded = cli::config_from_json(file.header.at("config"));
    const cli::Report report = cli::build_report(command, file.trace, recorded);

    for (const auto& [stem, table] : report.tables) {
        std::ofstream f(out / (stem + ".csv"));
        cli::write_csv(f, table);
    }
    for (const auto& [stem, hist] : report.histograms) {
        std::ofstream csv(out / (stem + ".csv"));
        write_histogram_csv(csv, hist);
        if (o.format == "svg") {
            std::ofstream svg(out / (stem + ".svg"));
            write_histogram_svg(svg, hist, stem);
        }
    }

    std::cout << cli::to_string(command) << ": seed " << config.seed << ", config " << file.trace.config_digest
              << ", " << file.trace.records.size() << " records, digest " << file.recorded_digest << '\n';
    std::cout << "trace: " << trace_path.string() << '\n';
    std::cout << "summary: " << report.summary.dump() << '\n';
    for (const auto& c : report.checks) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
    }

    if (o.check && !report.all_passed()) return kExitCheck;
    return run.trace.failed ? kExitFailure : kExitOk;
}

int run_replay(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        std::cerr << "cannot open " << path << '\n';
        return kExitConfig;
    }
    try {
        const sim::TraceFile file = sim::read_trace(in);
        const cli::ReplayVerdict v = cli::replay(file);
        std::cout << "recorded " << v.recorded_digest << "\nfile     " << v.file_digest << "\nreplayed "
                  << v.replayed_digest << '\n'
                  << (v.identical ? "identical" : "diverged: " + v.reason) << '\n';
        return v.identical ? kExitOk : kExitFailure;
    } catch (const sim::TraceParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const cli::ConfigError& e) {
        std::cerr << "config error in trace header: " << e.what() << '\n';
        return kExitConfig;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Charging-station telemetry and control simulator"};
    app.require_subcommand(1);

    struct Sub {
        cli::Command command;
        const char* help;
    };
    const Sub subs[] = {
        {cli::Command::RttDist, "Week of round-trip probes per link; histograms and mode counts"},
        {cli::Command::CompareProtocols, "Legacy pull vs PIC pull vs PIC push on shared latency draws"},
        {cli::Command::DutyCycle, "Duty-cycle changes with adaptive vs fixed waiting"},
        {cli::Command::LocalSched, "Server-driven vs local round-robin scheduling"},
    };
    RunOptions options;
    std::optional<cli::Command> chosen;
    for (const auto& s : subs) {
        auto* sub = app.add_subcommand(std::string(cli::to_string(s.command)), s.help);
        add_run_options(sub, options);
        sub->callback([&chosen, c = s.command] { chosen = c; });
    }
    std::string trace_path;
    auto* replay = app.add_subcommand("replay", "Re-run a trace's (seed, config) and compare digests");
    replay->add_option("trace", trace_path, "Trace file (.trace.jsonl)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (replay->parsed()) return run_replay(trace_path);
        return run_command(*chosen, options);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}
