#pragma once

// Experiment configuration: one versioned JSON document per run, shipped
// presets, and a digest recorded in every trace. The schema is documented in
// README.md.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "picsim/domain.hpp"
#include "picsim/latency.hpp"
#include "picsim/pic_fw.hpp"
#include "picsim/sched.hpp"
#include "picsim/store.hpp"

namespace picsim::cli {

inline constexpr int kConfigVersion = 1;

/// Invalid configuration. `path` locates the offending field, e.g.
/// "stations[0].evs[1].outlet".
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& what)
        : std::runtime_error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

struct EvSpec {
    std::size_t outlet = 0;
    EvModel ev{.plugged = true};
    Seconds plug_at = 0.0;
    std::optional<Seconds> unplug_at;
    /// >1 makes the physical EV settle slower than its model.
    double settle_scale = 1.0;
    /// Allocation set when the EV is plugged; the relay closes if positive.
    /// Ignored by local-sched, where the scheduler owns allocations.
    Amperes initial_current = 16.0;

    bool operator==(const EvSpec&) const = default;
};

struct StationSpec {
    ChargingStation::Options options;
    std::vector<EvSpec> evs;
    std::vector<std::size_t> dead_meters;

    bool operator==(const StationSpec&) const = default;
};

/// Four outlets on a 3G link, each with a 16 A EV plugged at t = 0.
StationSpec default_station_spec();

struct RttTarget {
    std::string name;
    LinkKind link = LinkKind::ThreeG;

    bool operator==(const RttTarget&) const = default;
};

/// Ethernet, WiFi and three 3G sites sharing the default 3G model.
std::vector<RttTarget> default_rtt_targets();

struct RttSpec {
    Seconds interval = 300.0;
    std::size_t probes = 2016;
    std::size_t bins = 90;
    std::vector<RttTarget> targets = default_rtt_targets();
    /// Ethernet probes count as "near the floor" inside center +/- band.
    Seconds ethernet_center = 0.2;
    Seconds ethernet_band = 0.05;
    double ethernet_fraction = 0.95;
    std::size_t min_modes = 4;

    bool operator==(const RttSpec&) const = default;
};

struct CompareSpec {
    std::size_t retrievals = 10000;
    Seconds interval = 60.0;
    /// Push-mode staleness run.
    Seconds push_duration = 86400.0;
    Seconds probe_interval = 300.0;
    /// Relative tolerance for empirical vs analytic savings.
    double savings_tolerance = 0.02;
    /// Optional reference ratios checked with --check.
    std::optional<double> expected_speedup_power;
    std::optional<double> expected_speedup_full;
    double speedup_tolerance = 0.05;

    bool operator==(const CompareSpec&) const = default;
};

struct DutySpec {
    std::size_t outlet = 0;
    Amperes i_init = 8.0;
    Amperes step_max = 32.0;
    Amperes step_increment = 1.0;
    std::size_t random_points = 500;
    Seconds spacing = 120.0;

    bool operator==(const DutySpec&) const = default;
};

struct LocalSpec {
    Seconds duration = 86400.0;
    /// Extra plug/unplug toggles at random times and outlets.
    std::size_t random_plug_events = 0;
    AlgorithmMode mode = AlgorithmMode::RoundRobin;

    bool operator==(const LocalSpec&) const = default;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    std::vector<StationSpec> stations = {default_station_spec()};
    NetworkModels models;
    /// When set, every link is a point mass at these values.
    std::optional<TimingBudget> budget;
    control::ProtocolMode protocol = control::ProtocolMode::PicPush;
    pic::PicConfig pic;
    sched::RoundRobinConfig round_robin;
    sched::ScheduleTimeConfig schedule;
    RttSpec rtt;
    CompareSpec compare;
    DutySpec duty;
    LocalSpec local;

    /// The budget for closed-form equations: `budget` if given, otherwise
    /// every model at its hard maximum.
    TimingBudget equation_budget() const;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Parse and validate. Unknown keys are errors.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Throws ConfigError. Checks circuit limits through sched::validate_config.
void validate(const ExperimentConfig& config);

/// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string config_digest(const ExperimentConfig& config);

std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown name.
ExperimentConfig preset(std::string_view name);

nlohmann::json to_json(const LatencyModel& model);
LatencyModel latency_model_from_json(const nlohmann::json& j, const std::string& path);

}  // namespace picsim::cli
