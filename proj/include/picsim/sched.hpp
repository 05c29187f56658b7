#pragma once

// Local charging algorithms for a station's control unit. Allocations are
// pure functions of (config, plugged set, time); the LocalController runs
// them at slot boundaries and applies the result to the station.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "picsim/domain.hpp"

namespace picsim::sched {

inline constexpr Seconds kSecondsPerDay = 86400.0;

/// Amperes per outlet, indexed by outlet.
using Allocation = std::vector<Amperes>;

struct RoundRobinConfig {
    Seconds slot_length = 900.0;
    std::size_t max_concurrent = 1;
    Amperes per_active_current = 16.0;

    bool operator==(const RoundRobinConfig&) const = default;
};

/// Daily window in seconds of day; start > end wraps past midnight.
struct TimeWindow {
    Seconds start = 0.0;
    Seconds end = 0.0;
    Amperes current = 0.0;

    bool operator==(const TimeWindow&) const = default;
};

struct ScheduleTimeConfig {
    /// windows[outlet] lists that outlet's windows.
    std::vector<std::vector<TimeWindow>> windows;

    bool operator==(const ScheduleTimeConfig&) const = default;
};

struct Violation {
    Seconds instant = 0.0;  // seconds of day for schedules; 0 for round-robin
    Amperes total = 0.0;
    std::string what;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

ValidationReport validate_config(const RoundRobinConfig& config, Amperes circuit_limit);
/// Sweeps every window start (and midnight) and reports each instant whose
/// summed window current exceeds the limit, plus malformed windows.
ValidationReport validate_config(const ScheduleTimeConfig& config, Amperes circuit_limit);

/// floor(now / slot_length).
std::int64_t slot_index(const RoundRobinConfig& config, Seconds now);

/// The next max_concurrent plugged outlets in cyclic order, chosen by slot
/// index; everyone else gets 0.
Allocation round_robin_step(const RoundRobinConfig& config, const std::set<std::size_t>& plugged,
                            std::size_t outlets, Seconds now);

bool window_contains(const TimeWindow& window, Seconds time_of_day);

Allocation schedule_time_step(const ScheduleTimeConfig& config, const std::set<std::size_t>& plugged,
                              std::size_t outlets, Seconds now);

/// Apply an allocation: every decrease (and relay opening) first, then every
/// increase, so the circuit total never passes through a higher value.
void apply_allocation(ChargingStation& station, const Allocation& allocation, Seconds now);

std::set<std::size_t> plugged_outlets(const ChargingStation& station);

class LocalController {
public:
    LocalController(RoundRobinConfig round_robin, ScheduleTimeConfig schedule,
                    AlgorithmMode mode = AlgorithmMode::None);

    AlgorithmMode mode() const { return mode_; }
    std::optional<AlgorithmMode> pending_mode() const { return pending_; }
    const RoundRobinConfig& round_robin() const { return round_robin_; }
    const ScheduleTimeConfig& schedule() const { return schedule_; }

    /// Queue a mode; it takes effect at the first slot boundary after `now`,
    /// which is returned.
    Seconds request_mode(AlgorithmMode mode, Seconds now);

    /// First instant after `now` at which on_boundary must run: the next slot
    /// boundary, or an earlier window edge in ScheduleTime mode.
    Seconds next_boundary(Seconds now) const;

    /// Activate a pending mode if its boundary has come, then allocate from
    /// the plugged set as of `now`. Returns the applied allocation, or
    /// nullopt in mode None (the station keeps its server-set allocation).
    std::optional<Allocation> on_boundary(ChargingStation& station, Seconds now);

private:
    RoundRobinConfig round_robin_;
    ScheduleTimeConfig schedule_;
    AlgorithmMode mode_;
    std::optional<AlgorithmMode> pending_;
    Seconds pending_at_ = 0.0;
};

}  // namespace picsim::sched
