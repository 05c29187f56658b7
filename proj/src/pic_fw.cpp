#include "picsim/pic_fw.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace picsim::pic {

Command decode_frame(const SerialFrame& frame) {
    Command c;
    c.seq = frame.seq;
    switch (frame.opcode) {
        case static_cast<std::uint8_t>(Opcode::PowerInfoRequest):
            c.op = Opcode::PowerInfoRequest;
            break;
        case static_cast<std::uint8_t>(Opcode::SetPushPeriod):
            if (frame.argument > 0.0 && std::isfinite(frame.argument)) {
                c.op = Opcode::SetPushPeriod;
                c.period = frame.argument;
            } else {
                c.reject_reason = "push period must be positive";
            }
            break;
        case static_cast<std::uint8_t>(Opcode::SetPushEnabled):
            c.op = Opcode::SetPushEnabled;
            c.enabled = frame.argument != 0.0;
            break;
        default: {
            std::ostringstream os;
            os << "unknown opcode 0x" << std::hex << static_cast<unsigned>(frame.opcode);
            c.reject_reason = os.str();
        }
    }
    return c;
}

std::string encode_frame(const SerialFrame& frame) {
    return nlohmann::json{{"opcode", frame.opcode}, {"arg", frame.argument}, {"seq", frame.seq}}.dump();
}

SerialFrame parse_frame(std::string_view line) {
    try {
        const auto j = nlohmann::json::parse(line);
        const auto op = j.at("opcode").get<unsigned>();
        if (op > 0xFF) throw std::invalid_argument("opcode does not fit in a byte");
        return SerialFrame{static_cast<std::uint8_t>(op), j.value("arg", 0.0),
                           j.at("seq").get<std::uint64_t>()};
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed serial frame: ") + e.what());
    }
}

std::vector<SerialFrame> frames_for(const proto::Message& msg) {
    using proto::MessageKind;
    if (msg.kind == MessageKind::AggregateReq) {
        return {SerialFrame{static_cast<std::uint8_t>(Opcode::PowerInfoRequest), 0.0, msg.seq}};
    }
    if (msg.kind == MessageKind::PushConfigSet) {
        const auto* cfg = std::get_if<proto::PushConfigPayload>(&msg.payload);
        if (cfg == nullptr) throw std::invalid_argument("push_config_set without payload");
        std::vector<SerialFrame> frames;
        if (cfg->period) {
            frames.push_back({static_cast<std::uint8_t>(Opcode::SetPushPeriod), *cfg->period, msg.seq});
        }
        if (cfg->enabled) {
            frames.push_back({static_cast<std::uint8_t>(Opcode::SetPushEnabled),
                              *cfg->enabled ? 1.0 : 0.0, msg.seq + (cfg->period ? 1 : 0)});
        }
        return frames;
    }
    throw std::invalid_argument("message kind has no serial command");
}

std::string_view to_string(Phase phase) {
    switch (phase) {
        case Phase::Init: return "init";
        case Phase::Idle: return "idle";
        case Phase::Collecting: return "collecting";
        case Phase::Pushing: return "pushing";
    }
    return "init";
}

// ---------------------------------------------------------------------------

StationMeterBus::StationMeterBus(const ChargingStation& station, const NetworkModels& models,
                                 sim::RandomStream local_bus, sim::RandomStream metering)
    : station_(&station), models_(&models), local_rng_(local_bus), metering_rng_(metering) {}

std::optional<MeterId> StationMeterBus::probe(std::size_t slot) {
    if (slot >= station_->meter_count() || dead_.contains(slot)) return std::nullopt;
    return station_->meter_id(slot);
}

MeterRead StationMeterBus::read(const MeterId& meter, Seconds at) {
    MeterRead r;
    r.local_latency = models_->local_bus.sample(local_rng_, at);
    if (dead_.contains(meter.outlet)) {
        r.metering = read_timeout;
        return r;
    }
    r.metering = models_->metering.sample(metering_rng_, at);
    r.snapshot = station_->snapshot(meter.outlet, at + r.local_latency + r.metering);
    return r;
}

void StationMeterBus::set_streams(sim::RandomStream local_bus, sim::RandomStream metering) {
    local_rng_ = local_bus;
    metering_rng_ = metering;
}

// ---------------------------------------------------------------------------

PicState startup_init(std::size_t station, MeterBus& bus, const PicConfig& config) {
    if (!(config.push_period > 0.0)) {
        throw std::invalid_argument("startup_init: push period must be positive");
    }
    PicState s;
    s.station = station;
    s.push_period = config.push_period;
    s.push_enabled = config.push_enabled;
    s.serve_cache = config.serve_cache;
    for (std::size_t slot = 0; slot < bus.slot_count(); ++slot) {
        const auto id = bus.probe(slot);
        if (!id) throw StartupError(slot);
        s.registered_meters.push_back(*id);
        s.cache.push_back(proto::MeterReading{*id, std::nullopt, proto::ReadingStatus::Error});
    }
    s.phase = Phase::Idle;
    return s;
}

void on_serial_interrupt(PicState& state, const SerialFrame& frame) {
    PicFlags& flags = state.flags;
    Command c = decode_frame(frame);
    if (flags.last_seq && frame.seq <= *flags.last_seq) {
        c = Command{Opcode::Reject, 0.0, false, frame.seq, "sequence number did not increase"};
    } else {
        flags.last_seq = frame.seq;
    }
    if (flags.pending.size() < kCommandQueueDepth) {
        flags.pending.push_back(std::move(c));
    } else {
        flags.overflow.push_back(Command{Opcode::Reject, 0.0, false, frame.seq, "command queue overflow"});
    }
}

void on_timer_interrupt(PicState& state) { state.flags.push_data = true; }

Seconds collect_all(PicState& state, MeterBus& bus, Seconds now) {
    Seconds elapsed = 0.0;
    for (std::size_t i = 0; i < state.registered_meters.size(); ++i) {
        const MeterId& id = state.registered_meters[i];
        const MeterRead r = bus.read(id, now + elapsed);
        elapsed += r.local_latency + r.metering;
        proto::MeterReading& entry = state.cache[i];
        if (r.snapshot) {
            entry.snapshot = r.snapshot;
            entry.status = proto::ReadingStatus::Ok;
        } else {
            entry.status = entry.snapshot ? proto::ReadingStatus::Stale : proto::ReadingStatus::Error;
            state.diagnostics.push_back("meter " + std::to_string(id.outlet) + " timed out at t=" +
                                        std::to_string(now + elapsed));
        }
    }
    if (!state.registered_meters.empty() && elapsed >= state.push_period) {
        state.diagnostics.push_back("collection took " + std::to_string(elapsed) +
                                    " s, not below the push period of " +
                                    std::to_string(state.push_period) + " s");
    }
    return elapsed;
}

namespace {

proto::Message packet(PicState& s, Seconds at, std::optional<std::uint64_t> reply_to) {
    proto::Message m;
    m.kind = proto::MessageKind::AggregatePacket;
    m.station = s.station;
    m.payload = s.cache;
    m.seq = ++s.packet_seq;
    m.reply_to = reply_to;
    m.sent_at = m.received_at = at;
    return m;
}

proto::Message reply(PicState& s, proto::MessageKind kind, Seconds at, std::uint64_t to,
                     proto::Payload payload = {}) {
    proto::Message m;
    m.kind = kind;
    m.station = s.station;
    m.payload = std::move(payload);
    m.seq = ++s.packet_seq;
    m.reply_to = to;
    m.sent_at = m.received_at = at;
    return m;
}

bool cache_complete(const PicState& s) {
    return std::all_of(s.cache.begin(), s.cache.end(),
                       [](const auto& r) { return r.status == proto::ReadingStatus::Ok; });
}

}  // namespace

StepResult main_loop_step(PicState& state, MeterBus& bus, Seconds now) {
    if (state.phase == Phase::Init) throw std::logic_error("main_loop_step before startup_init");
    StepResult r;
    Seconds elapsed = 0.0;

    while (!state.flags.pending.empty()) {
        Command c = std::move(state.flags.pending.front());
        state.flags.pending.pop_front();
        switch (c.op) {
            case Opcode::PowerInfoRequest:
                if (!state.serve_cache || !cache_complete(state)) {
                    state.phase = Phase::Collecting;
                    elapsed += collect_all(state, bus, now + elapsed);
                    ++r.collections;
                }
                r.messages.push_back(packet(state, now + elapsed, c.seq));
                break;
            case Opcode::SetPushPeriod:
                state.push_period = c.period;
                r.messages.push_back(reply(state, proto::MessageKind::ConfigAck, now + elapsed, c.seq,
                                           proto::PushConfigPayload{c.period, std::nullopt}));
                break;
            case Opcode::SetPushEnabled:
                state.push_enabled = c.enabled;
                r.messages.push_back(reply(state, proto::MessageKind::ConfigAck, now + elapsed, c.seq,
                                           proto::PushConfigPayload{std::nullopt, c.enabled}));
                break;
            case Opcode::Reject:
                state.diagnostics.push_back("rejected command " + std::to_string(c.seq) + ": " +
                                            c.reject_reason);
                r.messages.push_back(reply(state, proto::MessageKind::Error, now + elapsed, c.seq,
                                           proto::ErrorPayload{c.reject_reason}));
                break;
        }
    }
    for (const Command& c : state.flags.overflow) {
        state.diagnostics.push_back("command " + std::to_string(c.seq) + " overflowed the queue");
        r.messages.push_back(reply(state, proto::MessageKind::Error, now + elapsed, c.seq,
                                   proto::ErrorPayload{c.reject_reason}));
    }
    state.flags.overflow.clear();

    if (state.flags.push_data) {
        state.flags.push_data = false;
        state.phase = Phase::Collecting;
        elapsed += collect_all(state, bus, now + elapsed);
        ++r.collections;
        if (state.push_enabled) {
            state.phase = Phase::Pushing;
            r.messages.push_back(packet(state, now + elapsed, std::nullopt));
        }
    }

    state.phase = Phase::Idle;
    r.duration = elapsed;
    return r;
}

}  // namespace picsim::pic
