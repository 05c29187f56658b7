#include "picsim/control.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace picsim::control {

namespace {
constexpr double kAmpsPerPercent = 0.6;

proto::Message make(proto::MessageKind kind, const MeterId* meter, std::size_t station, std::uint64_t seq,
                    Seconds sent, Seconds received, proto::Payload payload = {}) {
    proto::Message m;
    m.kind = kind;
    m.station = station;
    if (meter != nullptr) m.meter = *meter;
    m.seq = seq;
    m.sent_at = sent;
    m.received_at = received;
    m.payload = std::move(payload);
    return m;
}
}  // namespace

Seconds compute_t_waiting(Seconds t_ev, const TimingBudget& budget) {
    if (!(t_ev >= 0.0)) throw std::invalid_argument("t_ev must be non-negative");
    return std::max(0.0, t_ev - budget.t_3g_uplink);
}

Amperes duty_to_current(double duty_percent) {
    if (!(duty_percent >= kMinPilotDuty && duty_percent <= kMaxPilotDuty)) {
        throw std::out_of_range("duty cycle " + std::to_string(duty_percent) + "% outside [10, 85]");
    }
    return kAmpsPerPercent * duty_percent;
}

double current_to_duty(Amperes amps) {
    const double duty = amps / kAmpsPerPercent;
    if (!(duty >= kMinPilotDuty - 1e-9 && duty <= kMaxPilotDuty + 1e-9)) {
        throw std::out_of_range("current " + std::to_string(amps) + " A outside the pilot range");
    }
    return std::clamp(duty, kMinPilotDuty, kMaxPilotDuty);
}

std::string_view to_string(DutyOutcome outcome) {
    switch (outcome) {
        case DutyOutcome::Confirmed: return "confirmed";
        case DutyOutcome::Unsettled: return "unsettled";
        case DutyOutcome::Failed: return "failed";
    }
    return "?";
}

DutyCycleChange change_duty_cycle(ServerStore& store, ChargingStation& station, std::size_t outlet,
                                  double duty_percent, const NetworkModels& models,
                                  const TimingBudget& budget, sim::RandomStream& rng, Seconds now,
                                  const DutyCycleOptions& options) {
    if (!station.plugged(outlet)) {
        throw NoEvError("no EV plugged at station " + std::to_string(station.id()) + " outlet " +
                        std::to_string(outlet));
    }
    const Amperes target = duty_to_current(duty_percent);
    if (station.relay(outlet) != RelayState::On) {
        throw std::logic_error("duty-cycle change on an outlet whose relay is off");
    }

    DutyCycleChange change;
    change.meter = station.meter_id(outlet);
    change.duty_percent = duty_percent;
    const EvModel& ev = station.ev(outlet);
    change.i_init = std::clamp(station.current_draw(outlet, now), 0.0, ev.max_current);
    change.i_final = std::min(target, ev.max_current);
    change.t_ev = ev_settle_time(ev, change.i_init, change.i_final);
    change.t_waiting = compute_t_waiting(options.adaptive ? change.t_ev : ev.settle_cap, budget);

    const MeterId id = change.meter;
    const std::size_t sid = station.id();
    std::uint64_t seq = options.first_seq;

    // Downlink DutyCycleSet, station applies it, ack comes back.
    const std::uint64_t set_seq = seq++;
    change.messages.push_back(
        make(proto::MessageKind::DutyCycleSet, &id, sid, set_seq, now, now, proto::DutyPayload{duty_percent}));
    const Seconds net = network_time(models, station.link(), rng, now);
    if (net > options.timeout) {
        auto err = make(proto::MessageKind::Error, &id, sid, seq++, now, now + options.timeout,
                        proto::ErrorPayload{"timeout"});
        err.reply_to = set_seq;
        change.messages.push_back(std::move(err));
        change.total_latency = options.timeout;
        return change;
    }
    const Seconds applied = now + 0.5 * net;
    change.messages.back().received_at = applied;
    try {
        station.set_allocation(outlet, target, applied);
    } catch (const CircuitLimitError& e) {
        auto err = make(proto::MessageKind::Error, &id, sid, seq++, applied, now + net, proto::ErrorPayload{e.what()});
        err.reply_to = set_seq;
        change.messages.push_back(std::move(err));
        change.total_latency = net;
        return change;
    }
    auto ack = make(proto::MessageKind::DutyCycleAck, &id, sid, seq++, applied, now + net,
                    proto::DutyPayload{duty_percent});
    ack.reply_to = set_seq;
    change.messages.push_back(std::move(ack));

    Seconds t = now + net + change.t_waiting;
    for (;;) {
        const std::uint64_t req_seq = seq++;
        change.messages.push_back(make(proto::MessageKind::MeterPowerReq, &id, sid, req_seq, t, t));
        const Seconds read_net = network_time(models, station.link(), rng, t);
        const Seconds metering = models.metering.sample(rng, t);
        ++change.reads;
        if (read_net + metering > options.timeout) {
            auto err = make(proto::MessageKind::Error, &id, sid, seq++, t, t + options.timeout,
                            proto::ErrorPayload{"timeout"});
            err.reply_to = req_seq;
            change.messages.push_back(std::move(err));
            change.outcome = DutyOutcome::Failed;
            change.total_latency = t + options.timeout - now;
            return change;
        }
        const Seconds captured = t + 0.5 * read_net + metering;
        const Seconds received = t + read_net + metering;
        const MeterSnapshot snap = station.snapshot(outlet, captured);
        auto resp = make(proto::MessageKind::MeterPowerResp, &id, sid, seq++, captured, received, snap);
        resp.reply_to = req_seq;
        change.messages.push_back(std::move(resp));
        store.record_reading(sid, proto::MeterReading{id, snap, proto::ReadingStatus::Ok}, received);

        change.measured = snap.amps;
        change.total_latency = received - now;
        if (std::abs(snap.amps - target) <= options.tolerance) {
            change.outcome = DutyOutcome::Confirmed;
            return change;
        }
        if (change.reads >= 2) {
            change.outcome = DutyOutcome::Unsettled;
            return change;
        }
        t = received + change.t_ev;
    }
}

ModeSelection select_algorithm_mode(ServerStore& store, ChargingStation& station,
                                    sched::LocalController& controller, AlgorithmMode mode,
                                    const NetworkModels& models, sim::RandomStream& rng, Seconds now,
                                    std::uint64_t seq) {
    ModeSelection sel;
    const std::size_t sid = station.id();
    const std::uint64_t req_seq = seq++;
    sel.messages.push_back(
        make(proto::MessageKind::ModeSelect, nullptr, sid, req_seq, now, now, proto::ModePayload{mode}));
    if (!station.online()) {
        auto err = make(proto::MessageKind::Error, nullptr, sid, seq, now, now, proto::ErrorPayload{"station offline"});
        err.reply_to = req_seq;
        sel.messages.push_back(std::move(err));
        return sel;
    }
    const Seconds net = network_time(models, station.link(), rng, now);
    sel.delivered = true;
    sel.delivered_at = now + 0.5 * net;
    sel.acked_at = now + net;
    sel.messages.back().received_at = sel.delivered_at;
    sel.effective_at = controller.request_mode(mode, sel.delivered_at);
    store.set_algorithm(sid, mode);
    auto ack = make(proto::MessageKind::ModeAck, nullptr, sid, seq, sel.delivered_at, sel.acked_at,
                    proto::ModePayload{mode});
    ack.reply_to = req_seq;
    sel.messages.push_back(std::move(ack));
    return sel;
}

}  // namespace picsim::control
