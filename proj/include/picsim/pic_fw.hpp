#pragma once

// Power Information Collector firmware, modelled as a main loop driven by
// flags that two interrupt handlers set:
//
//   startup_init        register every meter on the bus, arm interrupts
//   on_serial_interrupt decode and latch a gateway command (flags only)
//   on_timer_interrupt  set the push flag (flags only)
//   main_loop_step      serve latched commands, then collect and push
//
// Interrupt handlers never touch the cache, the meter bus or the phase.

#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "picsim/domain.hpp"
#include "picsim/latency.hpp"
#include "picsim/message.hpp"
#include "picsim/sim.hpp"

namespace picsim::pic {

enum class Opcode : std::uint8_t {
    PowerInfoRequest = 0x01,
    SetPushPeriod = 0x02,
    SetPushEnabled = 0x03,
    Reject = 0xFF,
};

/// A raw command as it arrives on the serial line.
struct SerialFrame {
    std::uint8_t opcode = 0;
    double argument = 0.0;
    std::uint64_t seq = 0;

    bool operator==(const SerialFrame&) const = default;
};

struct Command {
    Opcode op = Opcode::Reject;
    Seconds period = 0.0;
    bool enabled = false;
    std::uint64_t seq = 0;
    std::string reject_reason;

    bool operator==(const Command&) const = default;
};

/// Unknown opcodes and invalid arguments decode to a Reject command.
Command decode_frame(const SerialFrame& frame);

/// Serial frames travel as one JSON object per line: {"opcode","arg","seq"}.
std::string encode_frame(const SerialFrame& frame);
SerialFrame parse_frame(std::string_view line);

/// Frame for a server message (AggregateReq or PushConfigSet). A
/// PushConfigSet carrying both fields is split into two frames.
std::vector<SerialFrame> frames_for(const proto::Message& msg);

inline constexpr std::size_t kCommandQueueDepth = 4;

/// Everything an interrupt handler may write.
struct PicFlags {
    bool push_data = false;
    std::deque<Command> pending;
    /// Commands that arrived with the queue full; each gets an error reply.
    std::vector<Command> overflow;
    std::optional<std::uint64_t> last_seq;

    bool operator==(const PicFlags&) const = default;
};

enum class Phase { Init, Idle, Collecting, Pushing };
std::string_view to_string(Phase phase);

struct PicConfig {
    Seconds push_period = 10.0;
    bool push_enabled = true;
    /// Answer PowerInfoRequest from the cache instead of collecting fresh.
    bool serve_cache = false;

    bool operator==(const PicConfig&) const = default;
};

struct PicState {
    std::size_t station = 0;
    std::vector<MeterId> registered_meters;
    std::vector<proto::MeterReading> cache;
    PicFlags flags;
    Seconds push_period = 10.0;
    bool push_enabled = true;
    bool serve_cache = false;
    Phase phase = Phase::Init;
    std::uint64_t packet_seq = 0;
    std::vector<std::string> diagnostics;

    bool operator==(const PicState&) const = default;
};

class StartupError : public std::runtime_error {
public:
    explicit StartupError(std::size_t slot)
        : std::runtime_error("meter bus timeout: no meter answered in slot " + std::to_string(slot)),
          slot_(slot) {}
    std::size_t slot() const { return slot_; }

private:
    std::size_t slot_;
};

struct MeterRead {
    std::optional<MeterSnapshot> snapshot;  // empty on a bus timeout
    Seconds local_latency = 0.0;
    Seconds metering = 0.0;
};

/// The PIC-to-meter segment inside a station.
class MeterBus {
public:
    virtual ~MeterBus() = default;
    virtual std::size_t slot_count() const = 0;
    /// Meter ID in `slot`, or nullopt if the slot does not answer.
    virtual std::optional<MeterId> probe(std::size_t slot) = 0;
    /// Start a read at `at`; the snapshot is captured once the local hop and
    /// the metering time have elapsed.
    virtual MeterRead read(const MeterId& meter, Seconds at) = 0;
};

/// Meter bus backed by a simulated station with fault injection.
class StationMeterBus : public MeterBus {
public:
    StationMeterBus(const ChargingStation& station, const NetworkModels& models,
                    sim::RandomStream local_bus, sim::RandomStream metering);

    std::size_t slot_count() const override { return station_->meter_count(); }
    std::optional<MeterId> probe(std::size_t slot) override;
    MeterRead read(const MeterId& meter, Seconds at) override;

    void set_streams(sim::RandomStream local_bus, sim::RandomStream metering);
    void kill(std::size_t slot) { dead_.insert(slot); }
    void revive(std::size_t slot) { dead_.erase(slot); }
    /// Time a read to a dead meter costs before it is abandoned.
    Seconds read_timeout = 1.0;

private:
    const ChargingStation* station_;
    const NetworkModels* models_;
    sim::RandomStream local_rng_;
    sim::RandomStream metering_rng_;
    std::set<std::size_t> dead_;
};

/// Register every meter on the bus. Throws StartupError naming the first
/// slot that does not answer, std::invalid_argument for a non-positive
/// push period.
PicState startup_init(std::size_t station, MeterBus& bus, const PicConfig& config = {});

void on_serial_interrupt(PicState& state, const SerialFrame& frame);
void on_timer_interrupt(PicState& state);

/// Read every registered meter in order and refresh the cache. Returns the
/// summed local-bus and metering time; a duration at or above the push
/// period is recorded as a diagnostic.
Seconds collect_all(PicState& state, MeterBus& bus, Seconds now);

struct StepResult {
    std::vector<proto::Message> messages;  // sent_at = now + offset within the step
    Seconds duration = 0.0;
    std::size_t collections = 0;
};

/// One pass of the main loop: every latched command in arrival order, then
/// the overflow rejections, then a collection (and a push when enabled) if
/// the push flag is set.
StepResult main_loop_step(PicState& state, MeterBus& bus, Seconds now);

}  // namespace picsim::pic
