#pragma once

// Stations, metered outlets, relays and plugged EVs.

#include <compare>
#include <cstddef>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "picsim/latency.hpp"

namespace picsim {

using Amperes = double;
using Volts = double;
using Watts = double;
using KilowattHours = double;

inline constexpr std::size_t kDefaultMetersPerStation = 4;

struct MeterId {
    std::size_t station = 0;
    std::size_t outlet = 0;

    auto operator<=>(const MeterId&) const = default;
};

enum class RelayState { Off, On };
std::string_view to_string(RelayState state);

struct MeterSnapshot {
    MeterId meter;
    Volts volts = 0.0;
    Amperes amps = 0.0;
    Watts watts = 0.0;
    KilowattHours energy = 0.0;
    RelayState relay = RelayState::Off;
    Seconds captured_at = 0.0;

    bool operator==(const MeterSnapshot&) const = default;
};

enum class AlgorithmMode { None, RoundRobin, ScheduleTime };
std::string_view to_string(AlgorithmMode mode);
AlgorithmMode parse_algorithm_mode(std::string_view text);

class NoEvError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CircuitLimitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Current-settling behaviour of a plugged EV. The defaults put the largest
/// step (the full 0..32 A swing) exactly at the 6 s cap.
struct EvModel {
    bool plugged = false;
    Amperes max_current = 40.0;
    Seconds settle_t0 = 1.0;
    double settle_rate = 0.15625;  // s per A
    Seconds settle_cap = 6.0;

    bool operator==(const EvModel&) const = default;
};

/// min(settle_cap, settle_t0 + settle_rate * |i_final - i_init|), and 0 for
/// a zero step. Throws NoEvError for an unplugged EV and std::out_of_range
/// for currents outside [0, max_current].
Seconds ev_settle_time(const EvModel& ev, Amperes i_init, Amperes i_final);

/// A multi-outlet station sharing one circuit. Meter readings are functions
/// of time: between state changes each outlet's draw ramps linearly from its
/// previous value to its target over the EV's settle time.
class ChargingStation {
public:
    struct Options {
        std::size_t meters = kDefaultMetersPerStation;
        Amperes circuit_limit = 80.0;
        Volts voltage = 208.0;
        LinkKind link = LinkKind::ThreeG;
        AlgorithmMode algorithm = AlgorithmMode::None;

        bool operator==(const Options&) const = default;
    };

    ChargingStation(std::size_t id, Options options);

    std::size_t id() const { return id_; }
    std::size_t meter_count() const { return outlets_.size(); }
    Amperes circuit_limit() const { return options_.circuit_limit; }
    Volts voltage() const { return options_.voltage; }
    LinkKind link() const { return options_.link; }
    AlgorithmMode local_algorithm() const { return options_.algorithm; }
    void set_local_algorithm(AlgorithmMode mode) { options_.algorithm = mode; }
    bool online() const { return online_; }
    void set_online(bool online) { online_ = online; }
    const Options& options() const { return options_; }

    MeterId meter_id(std::size_t outlet) const;

    void plug(std::size_t outlet, EvModel ev, Seconds now);
    void unplug(std::size_t outlet, Seconds now);
    bool plugged(std::size_t outlet) const;
    const EvModel& ev(std::size_t outlet) const;
    /// Fault injection: the physical EV settles `scale` times slower than
    /// its model predicts.
    void set_settle_scale(std::size_t outlet, double scale);

    /// Switch a relay. Opening it cuts the current at once; closing it ramps
    /// toward the allocation. Turning a relay on re-checks the circuit limit
    /// and throws CircuitLimitError without changing state if it would be
    /// exceeded. Returns the snapshot at `now` after the change.
    MeterSnapshot apply_relay(std::size_t outlet, RelayState state, Seconds now);

    /// Pilot allocation for an outlet. Counts toward the circuit total only
    /// while its relay is on; throws CircuitLimitError if the new total
    /// would exceed the limit.
    void set_allocation(std::size_t outlet, Amperes amps, Seconds now);
    Amperes allocation(std::size_t outlet) const;
    RelayState relay(std::size_t outlet) const;

    /// Sum of allocations over outlets whose relay is on.
    Amperes allocated_current_total() const;

    /// Current actually flowing at time t (t at or after the outlet's last change).
    Amperes current_draw(std::size_t outlet, Seconds t) const;
    /// Seconds until the outlet's draw reaches its target, measured from t.
    Seconds settle_remaining(std::size_t outlet, Seconds t) const;
    MeterSnapshot snapshot(std::size_t outlet, Seconds t) const;
    /// Time of the outlet's most recent state change.
    Seconds last_change(std::size_t outlet) const;

private:
    struct Outlet {
        RelayState relay = RelayState::Off;
        Amperes allocation = 0.0;
        EvModel ev;
        double settle_scale = 1.0;
        // Linear ramp of the draw, starting at ramp_start.
        Amperes ramp_from = 0.0;
        Amperes ramp_to = 0.0;
        Seconds ramp_start = 0.0;
        Seconds ramp_duration = 0.0;
        KilowattHours energy_at_start = 0.0;
    };

    Outlet& at(std::size_t outlet);
    const Outlet& at(std::size_t outlet) const;
    Amperes target_of(const Outlet& o) const;
    KilowattHours energy_until(const Outlet& o, Seconds t) const;
    void check_time(const Outlet& o, Seconds t) const;
    /// Freeze energy and start a new ramp toward the outlet's current target.
    void retarget(Outlet& o, Seconds now);

    std::size_t id_;
    Options options_;
    std::vector<Outlet> outlets_;
    bool online_ = true;
};

}  // namespace picsim
