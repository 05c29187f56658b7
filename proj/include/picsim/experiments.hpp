#pragma once

// Experiment runners and trace-derived reports. A runner drives one engine
// and notes every measurement into the trace; reports read the trace back
// and never see the runner's internal state.

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "picsim/config.hpp"
#include "picsim/latency.hpp"
#include "picsim/sim.hpp"
#include "picsim/trace_io.hpp"

namespace picsim::cli {

enum class Command { RttDist, CompareProtocols, DutyCycle, LocalSched };

std::string_view to_string(Command command);
std::optional<Command> parse_command(std::string_view text);

struct RunResult {
    sim::EventTrace trace;
    /// Header for write_trace: command and embedded config.
    nlohmann::json header;
};

/// Deterministic in `config` (which carries the seed).
RunResult run_experiment(Command command, const ExperimentConfig& config);

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<nlohmann::json>> rows;
};

/// Numbers print with 17 significant digits at most; null prints empty.
void write_csv(std::ostream& out, const Table& table);

struct Check {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct Report {
    /// (file stem, table)
    std::vector<std::pair<std::string, Table>> tables;
    std::vector<std::pair<std::string, Histogram>> histograms;
    std::vector<Check> checks;
    /// Headline numbers printed by the CLI.
    nlohmann::json summary = nlohmann::json::object();

    bool all_passed() const;
};

Report build_report(Command command, const sim::EventTrace& trace, const ExperimentConfig& config);

struct ReplayVerdict {
    bool identical = false;
    std::string recorded_digest;
    /// Digest of the records as read from the file.
    std::string file_digest;
    /// Digest of a fresh run of the embedded (command, config).
    std::string replayed_digest;
    std::string reason;
};

/// Throws ConfigError if the embedded config is invalid, TraceParseError if
/// the header lacks a command.
ReplayVerdict replay(const sim::TraceFile& file);

}  // namespace picsim::cli
