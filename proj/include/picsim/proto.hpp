#pragma once

// The three telemetry retrieval protocols and their closed-form budgets.
//
//   legacy_pull   one server round trip per meter (two with relay status)
//   pic_pull      one aggregate request answered by the PIC
//   push          the PIC collects and sends on its own timer; the server
//                 consumes packets with push_consume and never waits
//
// Protocol runs are synchronous over virtual time starting at `start`; the
// experiment engine calls them from event handlers.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "picsim/domain.hpp"
#include "picsim/latency.hpp"
#include "picsim/message.hpp"
#include "picsim/pic_fw.hpp"
#include "picsim/sim.hpp"
#include "picsim/store.hpp"

namespace picsim::proto {

/// Independent draws for each delay term, so two protocols can be run on
/// the same draws.
struct RetrievalStreams {
    sim::RandomStream network;
    sim::RandomStream metering;
    sim::RandomStream status;

    static RetrievalStreams derive(std::uint64_t seed, const std::string& prefix);
};

struct PullOptions {
    bool include_status = false;
    Seconds timeout = 30.0;
    /// Issue all legacy requests at once instead of one after another.
    bool pipelined = false;
    std::uint64_t first_seq = 1;
};

struct RetrievalResult {
    std::vector<MeterReading> snapshots;
    Seconds wall_time = 0.0;
    std::size_t request_count = 0;
    /// completion time - captured_at, per meter; empty when never read.
    std::vector<std::optional<Seconds>> staleness;
    std::size_t timeouts = 0;
    bool failed = false;
    /// Every request followed by its terminal response, timeout or reject.
    std::vector<Message> messages;
};

RetrievalResult legacy_pull(const ChargingStation& station, const NetworkModels& models,
                            RetrievalStreams& streams, Seconds start, const PullOptions& options = {});

/// One AggregateReq over `uplink`, delivered to the PIC's serial interrupt
/// and served by its main loop. A response later than the timeout fails the
/// whole request.
RetrievalResult pic_pull(pic::PicState& pic, pic::MeterBus& bus, const NetworkModels& models,
                         LinkKind uplink, sim::RandomStream& network, Seconds start,
                         const PullOptions& options = {});

/// meters * (t_3g + t_metering), plus meters * t_3g for the status requests,
/// plus the server/cloud terms once per request.
Seconds legacy_retrieval_time(const TimingBudget& budget, std::size_t meters, bool include_status);
Seconds pic_pull_time(const TimingBudget& budget);
/// meters * (t_ethernet + t_metering) + t_3g_uplink.
Seconds push_cycle_time(const TimingBudget& budget, std::size_t meters);
/// 3.5 * t_3g - 4 * t_ethernet.
Seconds t_save(const TimingBudget& budget);

struct StalenessReport {
    bool accepted = false;
    std::vector<std::optional<Seconds>> staleness;
    std::string diagnostic;
};

/// Store an aggregate packet. Packets whose seq is not newer than the
/// stored one are discarded with a diagnostic.
StalenessReport push_consume(control::ServerStore& store, const Message& packet, Seconds now);

/// now - captured_at for every reading of a stored station.
std::vector<std::optional<Seconds>> staleness_at(const control::StationRecord& record, Seconds now);

}  // namespace picsim::proto
