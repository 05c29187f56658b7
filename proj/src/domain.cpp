#include "picsim/domain.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace picsim {

namespace {
constexpr double kLimitSlack = 1e-9;
constexpr double kSecondsPerHour = 3600.0;
}  // namespace

std::string_view to_string(RelayState state) { return state == RelayState::On ? "on" : "off"; }

std::string_view to_string(AlgorithmMode mode) {
    switch (mode) {
        case AlgorithmMode::None: return "none";
        case AlgorithmMode::RoundRobin: return "round_robin";
        case AlgorithmMode::ScheduleTime: return "schedule_time";
    }
    return "none";
}

AlgorithmMode parse_algorithm_mode(std::string_view text) {
    for (auto m : {AlgorithmMode::None, AlgorithmMode::RoundRobin, AlgorithmMode::ScheduleTime}) {
        if (to_string(m) == text) return m;
    }
    throw std::invalid_argument("unknown algorithm mode '" + std::string(text) + "'");
}

Seconds ev_settle_time(const EvModel& ev, Amperes i_init, Amperes i_final) {
    if (!ev.plugged) throw NoEvError("ev_settle_time: no EV plugged");
    const auto in_range = [&](Amperes a) { return a >= 0.0 && a <= ev.max_current + kLimitSlack; };
    if (!in_range(i_init) || !in_range(i_final)) {
        throw std::out_of_range("ev_settle_time: current outside [0, max_current]");
    }
    const double step = std::abs(i_final - i_init);
    if (step == 0.0) return 0.0;
    return std::min(ev.settle_cap, ev.settle_t0 + ev.settle_rate * step);
}

ChargingStation::ChargingStation(std::size_t id, Options options)
    : id_(id), options_(options), outlets_(options.meters) {
    if (!(options_.circuit_limit >= 0.0)) {
        throw std::invalid_argument("ChargingStation: circuit_limit must be >= 0");
    }
    if (!(options_.voltage > 0.0)) throw std::invalid_argument("ChargingStation: voltage must be > 0");
}

ChargingStation::Outlet& ChargingStation::at(std::size_t outlet) {
    if (outlet >= outlets_.size()) {
        throw std::out_of_range("outlet " + std::to_string(outlet) + " out of range (station has " +
                                std::to_string(outlets_.size()) + ")");
    }
    return outlets_[outlet];
}

const ChargingStation::Outlet& ChargingStation::at(std::size_t outlet) const {
    return const_cast<ChargingStation*>(this)->at(outlet);
}

MeterId ChargingStation::meter_id(std::size_t outlet) const {
    (void)at(outlet);
    return MeterId{id_, outlet};
}

Amperes ChargingStation::target_of(const Outlet& o) const {
    if (o.relay == RelayState::Off || !o.ev.plugged) return 0.0;
    return std::min(o.allocation, o.ev.max_current);
}

void ChargingStation::check_time(const Outlet& o, Seconds t) const {
    if (t < o.ramp_start) {
        throw std::invalid_argument("time " + std::to_string(t) + " precedes the outlet's last change at " +
                                    std::to_string(o.ramp_start));
    }
}

Amperes ChargingStation::current_draw(std::size_t outlet, Seconds t) const {
    const Outlet& o = at(outlet);
    check_time(o, t);
    const double dt = t - o.ramp_start;
    if (o.ramp_duration <= 0.0 || dt >= o.ramp_duration) return o.ramp_to;
    return o.ramp_from + (o.ramp_to - o.ramp_from) * dt / o.ramp_duration;
}

Seconds ChargingStation::settle_remaining(std::size_t outlet, Seconds t) const {
    const Outlet& o = at(outlet);
    check_time(o, t);
    return std::max(0.0, o.ramp_start + o.ramp_duration - t);
}

KilowattHours ChargingStation::energy_until(const Outlet& o, Seconds t) const {
    const double dt = t - o.ramp_start;
    double amp_seconds = 0.0;
    if (o.ramp_duration > 0.0) {
        const double d = std::min(dt, o.ramp_duration);
        amp_seconds += o.ramp_from * d + (o.ramp_to - o.ramp_from) * d * d / (2.0 * o.ramp_duration);
        amp_seconds += std::max(0.0, dt - o.ramp_duration) * o.ramp_to;
    } else {
        amp_seconds = dt * o.ramp_to;
    }
    return o.energy_at_start + options_.voltage * amp_seconds / kSecondsPerHour / 1000.0;
}

void ChargingStation::retarget(Outlet& o, Seconds now) {
    check_time(o, now);
    const std::size_t idx = static_cast<std::size_t>(&o - outlets_.data());
    const Amperes from = o.relay == RelayState::On && o.ev.plugged ? current_draw(idx, now) : 0.0;
    o.energy_at_start = energy_until(o, now);
    o.ramp_from = from;
    o.ramp_to = target_of(o);
    o.ramp_start = now;
    o.ramp_duration = 0.0;
    if (o.ev.plugged && from != o.ramp_to) {
        o.ramp_duration = o.settle_scale * ev_settle_time(o.ev, std::min(from, o.ev.max_current), o.ramp_to);
    }
}

void ChargingStation::plug(std::size_t outlet, EvModel ev, Seconds now) {
    Outlet& o = at(outlet);
    check_time(o, now);
    // Close out the old ramp with the old EV before swapping it.
    o.energy_at_start = energy_until(o, now);
    o.ramp_from = o.ramp_to = 0.0;
    o.ramp_duration = 0.0;
    o.ramp_start = now;
    ev.plugged = true;
    o.ev = ev;
    retarget(o, now);
}

void ChargingStation::unplug(std::size_t outlet, Seconds now) {
    Outlet& o = at(outlet);
    check_time(o, now);
    o.energy_at_start = energy_until(o, now);
    o.ev.plugged = false;
    o.ramp_from = o.ramp_to = 0.0;
    o.ramp_duration = 0.0;
    o.ramp_start = now;
}

bool ChargingStation::plugged(std::size_t outlet) const { return at(outlet).ev.plugged; }

const EvModel& ChargingStation::ev(std::size_t outlet) const { return at(outlet).ev; }

void ChargingStation::set_settle_scale(std::size_t outlet, double scale) {
    if (!(scale > 0.0)) throw std::invalid_argument("settle scale must be > 0");
    at(outlet).settle_scale = scale;
}

MeterSnapshot ChargingStation::apply_relay(std::size_t outlet, RelayState state, Seconds now) {
    Outlet& o = at(outlet);
    check_time(o, now);
    if (o.relay != state) {
        if (state == RelayState::On &&
            allocated_current_total() + o.allocation > options_.circuit_limit + kLimitSlack) {
            throw CircuitLimitError("closing relay " + std::to_string(outlet) +
                                    " would exceed the circuit limit");
        }
        o.relay = state;
        retarget(o, now);
    }
    return snapshot(outlet, now);
}

void ChargingStation::set_allocation(std::size_t outlet, Amperes amps, Seconds now) {
    Outlet& o = at(outlet);
    check_time(o, now);
    if (!(amps >= 0.0) || !std::isfinite(amps)) {
        throw std::invalid_argument("allocation must be finite and >= 0");
    }
    if (o.relay == RelayState::On &&
        allocated_current_total() - o.allocation + amps > options_.circuit_limit + kLimitSlack) {
        throw CircuitLimitError("allocating " + std::to_string(amps) + " A to outlet " +
                                std::to_string(outlet) + " would exceed the circuit limit");
    }
    o.allocation = amps;
    retarget(o, now);
}

Amperes ChargingStation::allocation(std::size_t outlet) const { return at(outlet).allocation; }

RelayState ChargingStation::relay(std::size_t outlet) const { return at(outlet).relay; }

Amperes ChargingStation::allocated_current_total() const {
    Amperes total = 0.0;
    for (const auto& o : outlets_) {
        if (o.relay == RelayState::On) total += o.allocation;
    }
    return total;
}

MeterSnapshot ChargingStation::snapshot(std::size_t outlet, Seconds t) const {
    const Outlet& o = at(outlet);
    check_time(o, t);
    MeterSnapshot s;
    s.meter = MeterId{id_, outlet};
    s.volts = options_.voltage;
    s.amps = current_draw(outlet, t);
    s.watts = s.volts * s.amps;
    s.energy = energy_until(o, t);
    s.relay = o.relay;
    s.captured_at = t;
    return s;
}

Seconds ChargingStation::last_change(std::size_t outlet) const { return at(outlet).ramp_start; }

}  // namespace picsim
