#include "picsim/proto.hpp"

#include <algorithm>
#include <stdexcept>

namespace picsim::proto {

RetrievalStreams RetrievalStreams::derive(std::uint64_t seed, const std::string& prefix) {
    return RetrievalStreams{sim::RandomStream::derive(seed, prefix + "/network"),
                            sim::RandomStream::derive(seed, prefix + "/metering"),
                            sim::RandomStream::derive(seed, prefix + "/status")};
}

namespace {

Message make(MessageKind kind, std::size_t station, std::optional<MeterId> meter, std::uint64_t seq,
             Seconds sent, Seconds received, Payload payload = {}) {
    Message m;
    m.kind = kind;
    m.station = station;
    m.meter = meter;
    m.seq = seq;
    m.sent_at = sent;
    m.received_at = received;
    m.payload = std::move(payload);
    return m;
}

}  // namespace

RetrievalResult legacy_pull(const ChargingStation& station, const NetworkModels& models,
                            RetrievalStreams& streams, Seconds start, const PullOptions& options) {
    RetrievalResult result;
    const std::size_t meters = station.meter_count();
    result.snapshots.reserve(meters);
    std::uint64_t seq = options.first_seq;
    Seconds elapsed = 0.0;  // sequential clock
    Seconds finish = 0.0;   // latest response, relative to start

    for (std::size_t outlet = 0; outlet < meters; ++outlet) {
        const MeterId id = station.meter_id(outlet);
        MeterReading reading{id, std::nullopt, ReadingStatus::Error};
        std::optional<RelayState> status_relay;

        const int requests = options.include_status ? 2 : 1;
        for (int k = 0; k < requests; ++k) {
            const bool power = k == 0;
            const Seconds issued = options.pipelined ? 0.0 : elapsed;
            const Seconds t = start + issued;
            const std::uint64_t req_seq = seq++;
            result.messages.push_back(make(power ? MessageKind::MeterPowerReq : MessageKind::MeterStatusReq,
                                           station.id(), id, req_seq, t, t));
            ++result.request_count;

            const Seconds net = network_time(models, station.link(), streams.network, t);
            const Seconds service = power ? models.metering.sample(streams.metering, t)
                                          : models.status_read.sample(streams.status, t);
            const Seconds rtt = net + service;
            if (rtt > options.timeout) {
                ++result.timeouts;
                Message err = make(MessageKind::Error, station.id(), id, seq++, t, t + options.timeout,
                                   ErrorPayload{"timeout"});
                err.reply_to = req_seq;
                result.messages.push_back(std::move(err));
                elapsed = issued + options.timeout;
                finish = std::max(finish, elapsed);
                continue;
            }
            const MeterSnapshot snap = station.snapshot(outlet, t + 0.5 * net + service);
            Message resp = make(power ? MessageKind::MeterPowerResp : MessageKind::MeterStatusResp,
                                station.id(), id, seq++, t + 0.5 * net + service, t + rtt, snap);
            resp.reply_to = req_seq;
            result.messages.push_back(std::move(resp));
            if (power) {
                reading.snapshot = snap;
                reading.status = ReadingStatus::Ok;
            } else {
                status_relay = snap.relay;
            }
            elapsed = issued + rtt;
            finish = std::max(finish, elapsed);
        }
        if (reading.snapshot && status_relay) reading.snapshot->relay = *status_relay;
        result.snapshots.push_back(std::move(reading));
    }

    result.wall_time = finish;
    const Seconds done = start + result.wall_time;
    for (const auto& r : result.snapshots) {
        result.staleness.push_back(r.snapshot ? std::optional<Seconds>(done - r.snapshot->captured_at)
                                              : std::nullopt);
    }
    return result;
}

RetrievalResult pic_pull(pic::PicState& pic, pic::MeterBus& bus, const NetworkModels& models,
                         LinkKind uplink, sim::RandomStream& network, Seconds start,
                         const PullOptions& options) {
    RetrievalResult result;
    result.request_count = 1;
    const std::uint64_t req_seq = options.first_seq;
    result.messages.push_back(make(MessageKind::AggregateReq, pic.station, std::nullopt, req_seq, start, start));

    const Seconds net = network_time(models, uplink, network, start);
    const Seconds arrival = start + 0.5 * net;
    pic::on_serial_interrupt(pic, pic::SerialFrame{static_cast<std::uint8_t>(pic::Opcode::PowerInfoRequest),
                                                   0.0, req_seq});
    pic::StepResult step = pic::main_loop_step(pic, bus, arrival);

    const Message* response = nullptr;
    for (auto& m : step.messages) {
        m.received_at = m.sent_at + 0.5 * net;
        if (m.reply_to == req_seq) response = &m;
    }
    if (response == nullptr) throw std::logic_error("PIC did not answer the aggregate request");

    const Seconds wall = response->received_at - start;
    if (wall > options.timeout || response->kind != MessageKind::AggregatePacket) {
        result.failed = true;
        result.timeouts = wall > options.timeout ? 1 : 0;
        result.wall_time = std::min(wall, options.timeout);
        Message err = make(MessageKind::Error, pic.station, std::nullopt, response->seq, start,
                           start + result.wall_time, ErrorPayload{wall > options.timeout ? "timeout" : "rejected"});
        err.reply_to = req_seq;
        result.messages.push_back(std::move(err));
        return result;
    }

    result.wall_time = wall;
    result.snapshots = std::get<std::vector<MeterReading>>(response->payload);
    for (const auto& r : result.snapshots) {
        result.staleness.push_back(r.snapshot ? std::optional<Seconds>(start + wall - r.snapshot->captured_at)
                                              : std::nullopt);
    }
    for (auto& m : step.messages) result.messages.push_back(std::move(m));
    return result;
}

Seconds legacy_retrieval_time(const TimingBudget& budget, std::size_t meters, bool include_status) {
    const double n = static_cast<double>(meters);
    const double requests = include_status ? 2.0 * n : n;
    Seconds t = n * (budget.t_3g + budget.t_metering);
    if (include_status) t += n * budget.t_3g;
    return t + requests * (budget.t_server_cloud + budget.t_cloud);
}

Seconds pic_pull_time(const TimingBudget& budget) {
    return budget.t_3g + budget.t_server_cloud + budget.t_cloud;
}

Seconds push_cycle_time(const TimingBudget& budget, std::size_t meters) {
    const double n = static_cast<double>(meters);
    return n * (budget.t_ethernet + budget.t_metering) + budget.t_3g_uplink;
}

Seconds t_save(const TimingBudget& budget) { return 3.5 * budget.t_3g - 4.0 * budget.t_ethernet; }

std::vector<std::optional<Seconds>> staleness_at(const control::StationRecord& record, Seconds now) {
    std::vector<std::optional<Seconds>> out;
    out.reserve(record.readings.size());
    for (const auto& r : record.readings) {
        out.push_back(r.snapshot ? std::optional<Seconds>(now - r.snapshot->captured_at) : std::nullopt);
    }
    return out;
}

StalenessReport push_consume(control::ServerStore& store, const Message& packet, Seconds now) {
    validate(packet);
    if (packet.kind != MessageKind::AggregatePacket) {
        throw std::invalid_argument("push_consume expects an aggregate packet");
    }
    StalenessReport report;
    const auto& readings = std::get<std::vector<MeterReading>>(packet.payload);
    const auto before = store.find(packet.station);
    report.accepted = store.update(packet.station, packet.seq, readings, now);
    if (!report.accepted) {
        report.diagnostic = "discarded packet seq " + std::to_string(packet.seq) + " from station " +
                            std::to_string(packet.station) + "; stored seq " +
                            std::to_string(before && before->last_seq ? *before->last_seq : 0);
        return report;
    }
    for (const auto& r : readings) {
        report.staleness.push_back(r.snapshot ? std::optional<Seconds>(now - r.snapshot->captured_at)
                                              : std::nullopt);
    }
    return report;
}

}  // namespace picsim::proto
