#pragma once

// Server-side record of the latest telemetry per station.

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "picsim/message.hpp"

namespace picsim::control {

enum class ProtocolMode { LegacyPull, PicPull, PicPush };
std::string_view to_string(ProtocolMode mode);
ProtocolMode parse_protocol_mode(std::string_view text);

struct StationRecord {
    std::vector<proto::MeterReading> readings;
    std::optional<std::uint64_t> last_seq;
    Seconds updated_at = 0.0;
    ProtocolMode protocol = ProtocolMode::LegacyPull;
    AlgorithmMode algorithm = AlgorithmMode::None;
};

/// Per-station records with atomic replace semantics. Every accessor takes
/// the store's lock and returns copies.
class ServerStore {
public:
    ServerStore() = default;
    ServerStore(const ServerStore&) = delete;
    ServerStore& operator=(const ServerStore&) = delete;

    /// Replace a station's readings if `seq` is newer than the stored one.
    /// Returns false (and records a diagnostic) for a stale or duplicate seq.
    bool update(std::size_t station, std::uint64_t seq, std::vector<proto::MeterReading> readings,
                Seconds now);
    /// Replace one meter's reading without sequencing (pull results).
    void record_reading(std::size_t station, const proto::MeterReading& reading, Seconds now);

    std::optional<StationRecord> find(std::size_t station) const;
    std::optional<proto::MeterReading> reading(const MeterId& meter) const;

    void set_protocol(std::size_t station, ProtocolMode mode);
    void set_algorithm(std::size_t station, AlgorithmMode mode);

    void add_diagnostic(std::string text);
    std::vector<std::string> diagnostics() const;

private:
    mutable std::mutex mutex_;
    std::map<std::size_t, StationRecord> stations_;
    std::vector<std::string> diagnostics_;
};

}  // namespace picsim::control
