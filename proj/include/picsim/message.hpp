#pragma once

// Wire messages between the server, the station gateway and the PIC. Each
// message serialises to one JSON object per line; field names are listed in
// docs/wire.md.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "picsim/domain.hpp"

namespace picsim::proto {

enum class MessageKind {
    MeterPowerReq,
    MeterStatusReq,
    MeterPowerResp,
    MeterStatusResp,
    AggregateReq,
    AggregatePacket,
    PushConfigSet,
    ConfigAck,
    DutyCycleSet,
    DutyCycleAck,
    ModeSelect,
    ModeAck,
    Error,
};

std::string_view to_string(MessageKind kind);
MessageKind parse_message_kind(std::string_view text);

enum class ReadingStatus { Ok, Stale, Error };
std::string_view to_string(ReadingStatus status);

/// One meter's entry in an aggregate packet or the PIC cache. A Stale entry
/// carries the last good snapshot; an Error entry never had one.
struct MeterReading {
    MeterId meter;
    std::optional<MeterSnapshot> snapshot;
    ReadingStatus status = ReadingStatus::Error;

    bool operator==(const MeterReading&) const = default;
};

struct DutyPayload {
    double duty_percent = 0.0;
    bool operator==(const DutyPayload&) const = default;
};

struct PushConfigPayload {
    std::optional<Seconds> period;
    std::optional<bool> enabled;
    bool operator==(const PushConfigPayload&) const = default;
};

struct ModePayload {
    AlgorithmMode mode = AlgorithmMode::None;
    bool operator==(const ModePayload&) const = default;
};

struct ErrorPayload {
    std::string reason;
    bool operator==(const ErrorPayload&) const = default;
};

using Payload = std::variant<std::monostate, MeterSnapshot, std::vector<MeterReading>, DutyPayload,
                             PushConfigPayload, ModePayload, ErrorPayload>;

struct Message {
    MessageKind kind = MessageKind::Error;
    std::size_t station = 0;
    std::optional<MeterId> meter;
    Payload payload;
    std::uint64_t seq = 0;
    std::optional<std::uint64_t> reply_to;
    Seconds sent_at = 0.0;
    Seconds received_at = 0.0;

    bool operator==(const Message&) const = default;
};

/// Throws std::invalid_argument when an AggregatePacket does not carry a
/// reading list or received_at precedes sent_at.
void validate(const Message& msg);

nlohmann::json to_json(const MeterSnapshot& snap);
MeterSnapshot snapshot_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Message& msg);
Message message_from_json(const nlohmann::json& j);

std::string encode_line(const Message& msg);
/// Throws std::invalid_argument on malformed input.
Message decode_line(std::string_view line);

}  // namespace picsim::proto
