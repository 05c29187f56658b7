#pragma once

// Server-side station control: duty-cycle changes with adaptive waiting
// before the verification read, and local algorithm mode selection.

#include <vector>

#include "picsim/domain.hpp"
#include "picsim/latency.hpp"
#include "picsim/message.hpp"
#include "picsim/sched.hpp"
#include "picsim/sim.hpp"
#include "picsim/store.hpp"

namespace picsim::control {

/// max(0, t_ev - t_3g_uplink). The uplink is half the 3G round trip.
Seconds compute_t_waiting(Seconds t_ev, const TimingBudget& budget);

inline constexpr double kMinPilotDuty = 10.0;
inline constexpr double kMaxPilotDuty = 85.0;

/// 0.6 A per percent of pilot duty on [10, 85] %. Throws std::out_of_range
/// outside that band.
Amperes duty_to_current(double duty_percent);
/// Inverse of duty_to_current on [6, 51] A.
double current_to_duty(Amperes amps);

enum class DutyOutcome { Confirmed, Unsettled, Failed };
std::string_view to_string(DutyOutcome outcome);

struct DutyCycleChange {
    MeterId meter;
    double duty_percent = 0.0;
    Amperes i_init = 0.0;
    Amperes i_final = 0.0;
    Seconds t_ev = 0.0;
    Seconds t_waiting = 0.0;
    DutyOutcome outcome = DutyOutcome::Failed;
    /// Verification reads issued (1, or 2 after an unsettled first read).
    std::size_t reads = 0;
    Amperes measured = 0.0;
    /// From sending DutyCycleSet to the final verification response.
    Seconds total_latency = 0.0;
    std::vector<proto::Message> messages;
};

struct DutyCycleOptions {
    Seconds timeout = 30.0;
    Amperes tolerance = 1.0;
    /// Wait t_waiting when true, the worst-case fixed wait otherwise.
    bool adaptive = true;
    std::uint64_t first_seq = 1;
};

/// Send DutyCycleSet, await the ack, wait, then read power to confirm the
/// new current. An unsettled first read is retried once after a further
/// t_ev. Throws NoEvError if nothing is plugged, std::out_of_range for an
/// invalid duty, std::logic_error if the outlet's relay is open.
DutyCycleChange change_duty_cycle(ServerStore& store, ChargingStation& station, std::size_t outlet,
                                  double duty_percent, const NetworkModels& models,
                                  const TimingBudget& budget, sim::RandomStream& rng, Seconds now,
                                  const DutyCycleOptions& options = {});

struct ModeSelection {
    bool delivered = false;
    Seconds delivered_at = 0.0;
    Seconds acked_at = 0.0;
    /// Slot boundary at which the station switches.
    Seconds effective_at = 0.0;
    std::vector<proto::Message> messages;
};

/// Deliver an algorithm mode to a station's local controller. An offline
/// station yields delivered == false and an Error message.
ModeSelection select_algorithm_mode(ServerStore& store, ChargingStation& station,
                                    sched::LocalController& controller, AlgorithmMode mode,
                                    const NetworkModels& models, sim::RandomStream& rng, Seconds now,
                                    std::uint64_t seq = 1);

}  // namespace picsim::control
