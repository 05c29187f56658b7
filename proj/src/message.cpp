#include "picsim/message.hpp"

#include <stdexcept>

namespace picsim::proto {

namespace {

constexpr MessageKind kAllKinds[] = {
    MessageKind::MeterPowerReq, MessageKind::MeterStatusReq, MessageKind::MeterPowerResp,
    MessageKind::MeterStatusResp, MessageKind::AggregateReq, MessageKind::AggregatePacket,
    MessageKind::PushConfigSet, MessageKind::ConfigAck, MessageKind::DutyCycleSet,
    MessageKind::DutyCycleAck, MessageKind::ModeSelect, MessageKind::ModeAck, MessageKind::Error,
};

nlohmann::json meter_json(const MeterId& id) { return {{"station", id.station}, {"outlet", id.outlet}}; }

MeterId meter_from_json(const nlohmann::json& j) {
    return MeterId{j.at("station").get<std::size_t>(), j.at("outlet").get<std::size_t>()};
}

ReadingStatus parse_status(std::string_view text) {
    for (auto s : {ReadingStatus::Ok, ReadingStatus::Stale, ReadingStatus::Error}) {
        if (to_string(s) == text) return s;
    }
    throw std::invalid_argument("unknown reading status '" + std::string(text) + "'");
}

}  // namespace

std::string_view to_string(MessageKind kind) {
    switch (kind) {
        case MessageKind::MeterPowerReq: return "meter_power_req";
        case MessageKind::MeterStatusReq: return "meter_status_req";
        case MessageKind::MeterPowerResp: return "meter_power_resp";
        case MessageKind::MeterStatusResp: return "meter_status_resp";
        case MessageKind::AggregateReq: return "aggregate_req";
        case MessageKind::AggregatePacket: return "aggregate_packet";
        case MessageKind::PushConfigSet: return "push_config_set";
        case MessageKind::ConfigAck: return "config_ack";
        case MessageKind::DutyCycleSet: return "duty_cycle_set";
        case MessageKind::DutyCycleAck: return "duty_cycle_ack";
        case MessageKind::ModeSelect: return "mode_select";
        case MessageKind::ModeAck: return "mode_ack";
        case MessageKind::Error: return "error";
    }
    return "error";
}

MessageKind parse_message_kind(std::string_view text) {
    for (auto k : kAllKinds) {
        if (to_string(k) == text) return k;
    }
    throw std::invalid_argument("unknown message kind '" + std::string(text) + "'");
}

std::string_view to_string(ReadingStatus status) {
    switch (status) {
        case ReadingStatus::Ok: return "ok";
        case ReadingStatus::Stale: return "stale";
        case ReadingStatus::Error: return "error";
    }
    return "error";
}

void validate(const Message& msg) {
    if (msg.received_at < msg.sent_at) {
        throw std::invalid_argument("message received before it was sent");
    }
    if (msg.kind == MessageKind::AggregatePacket &&
        !std::holds_alternative<std::vector<MeterReading>>(msg.payload)) {
        throw std::invalid_argument("aggregate packet without readings");
    }
}

nlohmann::json to_json(const MeterSnapshot& s) {
    return {{"meter", meter_json(s.meter)}, {"volts", s.volts},   {"amps", s.amps},
            {"watts", s.watts},             {"energy", s.energy}, {"relay", to_string(s.relay)},
            {"captured_at", s.captured_at}};
}

MeterSnapshot snapshot_from_json(const nlohmann::json& j) {
    MeterSnapshot s;
    s.meter = meter_from_json(j.at("meter"));
    s.volts = j.at("volts").get<double>();
    s.amps = j.at("amps").get<double>();
    s.watts = j.at("watts").get<double>();
    s.energy = j.at("energy").get<double>();
    const auto relay = j.at("relay").get<std::string>();
    if (relay != "on" && relay != "off") throw std::invalid_argument("relay must be on|off");
    s.relay = relay == "on" ? RelayState::On : RelayState::Off;
    s.captured_at = j.at("captured_at").get<double>();
    return s;
}

nlohmann::json to_json(const Message& msg) {
    nlohmann::json j{{"kind", to_string(msg.kind)},
                     {"station", msg.station},
                     {"seq", msg.seq},
                     {"sent_at", msg.sent_at},
                     {"received_at", msg.received_at}};
    if (msg.meter) j["meter"] = meter_json(*msg.meter);
    if (msg.reply_to) j["reply_to"] = *msg.reply_to;

    std::visit(
        [&j](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, MeterSnapshot>) {
                j["snapshot"] = to_json(p);
            } else if constexpr (std::is_same_v<T, std::vector<MeterReading>>) {
                auto arr = nlohmann::json::array();
                for (const auto& r : p) {
                    nlohmann::json e{{"meter", meter_json(r.meter)}, {"status", to_string(r.status)}};
                    if (r.snapshot) e["snapshot"] = to_json(*r.snapshot);
                    arr.push_back(std::move(e));
                }
                j["readings"] = std::move(arr);
            } else if constexpr (std::is_same_v<T, DutyPayload>) {
                j["duty_percent"] = p.duty_percent;
            } else if constexpr (std::is_same_v<T, PushConfigPayload>) {
                if (p.period) j["push_period"] = *p.period;
                if (p.enabled) j["push_enabled"] = *p.enabled;
            } else if constexpr (std::is_same_v<T, ModePayload>) {
                j["mode"] = to_string(p.mode);
            } else if constexpr (std::is_same_v<T, ErrorPayload>) {
                j["reason"] = p.reason;
            }
        },
        msg.payload);
    return j;
}

Message message_from_json(const nlohmann::json& j) {
    try {
        Message m;
        m.kind = parse_message_kind(j.at("kind").get<std::string>());
        m.station = j.at("station").get<std::size_t>();
        m.seq = j.at("seq").get<std::uint64_t>();
        m.sent_at = j.at("sent_at").get<double>();
        m.received_at = j.at("received_at").get<double>();
        if (j.contains("meter")) m.meter = meter_from_json(j.at("meter"));
        if (j.contains("reply_to")) m.reply_to = j.at("reply_to").get<std::uint64_t>();

        if (j.contains("snapshot")) {
            m.payload = snapshot_from_json(j.at("snapshot"));
        } else if (j.contains("readings")) {
            std::vector<MeterReading> readings;
            for (const auto& e : j.at("readings")) {
                MeterReading r;
                r.meter = meter_from_json(e.at("meter"));
                r.status = parse_status(e.at("status").get<std::string>());
                if (e.contains("snapshot")) r.snapshot = snapshot_from_json(e.at("snapshot"));
                readings.push_back(std::move(r));
            }
            m.payload = std::move(readings);
        } else if (j.contains("duty_percent")) {
            m.payload = DutyPayload{j.at("duty_percent").get<double>()};
        } else if (j.contains("push_period") || j.contains("push_enabled")) {
            PushConfigPayload p;
            if (j.contains("push_period")) p.period = j.at("push_period").get<double>();
            if (j.contains("push_enabled")) p.enabled = j.at("push_enabled").get<bool>();
            m.payload = p;
        } else if (j.contains("mode")) {
            m.payload = ModePayload{parse_algorithm_mode(j.at("mode").get<std::string>())};
        } else if (j.contains("reason")) {
            m.payload = ErrorPayload{j.at("reason").get<std::string>()};
        }
        validate(m);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed message: ") + e.what());
    }
}

std::string encode_line(const Message& msg) { return to_json(msg).dump(); }

Message decode_line(std::string_view line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("malformed message line: ") + e.what());
    }
    return message_from_json(j);
}

}  // namespace picsim::proto
