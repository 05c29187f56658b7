#include "picsim/sched.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace picsim::sched {

namespace {
constexpr double kSlack = 1e-9;

Seconds time_of_day(Seconds t) {
    double tod = std::fmod(t, kSecondsPerDay);
    if (tod < 0) tod += kSecondsPerDay;
    return tod;
}
}  // namespace

ValidationReport validate_config(const RoundRobinConfig& config, Amperes circuit_limit) {
    ValidationReport report;
    if (!(config.slot_length > 0.0)) {
        report.violations.push_back({0.0, 0.0, "slot_length must be positive"});
    }
    if (config.max_concurrent == 0) {
        report.violations.push_back({0.0, 0.0, "max_concurrent must be at least 1"});
    }
    if (!(config.per_active_current >= 0.0)) {
        report.violations.push_back({0.0, 0.0, "per_active_current must be >= 0"});
    }
    const Amperes total = static_cast<double>(config.max_concurrent) * config.per_active_current;
    if (total > circuit_limit + kSlack) {
        report.violations.push_back({0.0, total, "max_concurrent * per_active_current exceeds the circuit limit"});
    }
    return report;
}

bool window_contains(const TimeWindow& w, Seconds tod) {
    if (w.start < w.end) return tod >= w.start && tod < w.end;
    if (w.start > w.end) return tod >= w.start || tod < w.end;
    return false;
}

ValidationReport validate_config(const ScheduleTimeConfig& config, Amperes circuit_limit) {
    ValidationReport report;
    std::vector<Seconds> instants{0.0};
    for (std::size_t outlet = 0; outlet < config.windows.size(); ++outlet) {
        const auto& ws = config.windows[outlet];
        for (std::size_t i = 0; i < ws.size(); ++i) {
            const TimeWindow& w = ws[i];
            const std::string where = "outlet " + std::to_string(outlet) + " window " + std::to_string(i);
            if (!(w.start >= 0.0 && w.start < kSecondsPerDay && w.end >= 0.0 && w.end < kSecondsPerDay)) {
                report.violations.push_back({w.start, 0.0, where + ": bounds outside [0, 86400)"});
                continue;
            }
            if (w.start == w.end) {
                report.violations.push_back({w.start, 0.0, where + ": zero-length window"});
                continue;
            }
            if (!(w.current > 0.0) || !std::isfinite(w.current)) {
                report.violations.push_back({w.start, 0.0, where + ": current must be positive"});
                continue;
            }
            instants.push_back(w.start);
            for (std::size_t j = 0; j < i; ++j) {
                const TimeWindow& o = ws[j];
                if (window_contains(o, w.start) || window_contains(w, o.start)) {
                    report.violations.push_back(
                        {w.start, 0.0, where + ": overlaps window " + std::to_string(j) + " of the same outlet"});
                }
            }
        }
    }
    if (!report.ok()) return report;

    // The summed current is piecewise constant and only rises at a window
    // start (or is already high at midnight), so those instants cover the peak.
    std::sort(instants.begin(), instants.end());
    instants.erase(std::unique(instants.begin(), instants.end()), instants.end());
    for (Seconds t : instants) {
        Amperes total = 0.0;
        for (const auto& ws : config.windows) {
            for (const auto& w : ws) {
                if (window_contains(w, t)) total += w.current;
            }
        }
        if (total > circuit_limit + kSlack) {
            report.violations.push_back({t, total, "overlapping windows exceed the circuit limit"});
        }
    }
    return report;
}

std::int64_t slot_index(const RoundRobinConfig& config, Seconds now) {
    return static_cast<std::int64_t>(std::floor(now / config.slot_length));
}

Allocation round_robin_step(const RoundRobinConfig& config, const std::set<std::size_t>& plugged,
                            std::size_t outlets, Seconds now) {
    Allocation alloc(outlets, 0.0);
    if (plugged.empty() || config.max_concurrent == 0) return alloc;
    const std::vector<std::size_t> order(plugged.begin(), plugged.end());
    if (order.back() >= outlets) throw std::out_of_range("plugged outlet index out of range");

    const std::size_t n = order.size();
    const std::size_t m = config.max_concurrent;
    if (n <= m) {
        for (auto o : order) alloc[o] = config.per_active_current;
        return alloc;
    }
    const auto sn = static_cast<std::int64_t>(n);
    const std::int64_t k = ((slot_index(config, now) % sn) + sn) % sn;
    const std::size_t first = static_cast<std::size_t>(k) * (m % n) % n;
    for (std::size_t j = 0; j < m; ++j) alloc[order[(first + j) % n]] = config.per_active_current;
    return alloc;
}

Allocation schedule_time_step(const ScheduleTimeConfig& config, const std::set<std::size_t>& plugged,
                              std::size_t outlets, Seconds now) {
    Allocation alloc(outlets, 0.0);
    const Seconds tod = time_of_day(now);
    for (std::size_t outlet : plugged) {
        if (outlet >= outlets) throw std::out_of_range("plugged outlet index out of range");
        if (outlet >= config.windows.size()) continue;
        for (const auto& w : config.windows[outlet]) {
            if (window_contains(w, tod)) {
                alloc[outlet] = w.current;
                break;
            }
        }
    }
    return alloc;
}

void apply_allocation(ChargingStation& station, const Allocation& allocation, Seconds now) {
    if (allocation.size() != station.meter_count()) {
        throw std::invalid_argument("allocation size does not match the station's outlets");
    }
    const auto effective = [&](std::size_t o) {
        return station.relay(o) == RelayState::On ? station.allocation(o) : 0.0;
    };
    for (std::size_t o = 0; o < allocation.size(); ++o) {
        if (allocation[o] >= effective(o)) continue;
        if (allocation[o] == 0.0) {
            station.apply_relay(o, RelayState::Off, now);
            station.set_allocation(o, 0.0, now);
        } else {
            station.set_allocation(o, allocation[o], now);
        }
    }
    for (std::size_t o = 0; o < allocation.size(); ++o) {
        if (allocation[o] <= effective(o)) continue;
        if (station.relay(o) == RelayState::Off) {
            station.set_allocation(o, allocation[o], now);
            station.apply_relay(o, RelayState::On, now);
        } else {
            station.set_allocation(o, allocation[o], now);
        }
    }
}

std::set<std::size_t> plugged_outlets(const ChargingStation& station) {
    std::set<std::size_t> out;
    for (std::size_t o = 0; o < station.meter_count(); ++o) {
        if (station.plugged(o)) out.insert(o);
    }
    return out;
}

LocalController::LocalController(RoundRobinConfig round_robin, ScheduleTimeConfig schedule,
                                 AlgorithmMode mode)
    : round_robin_(round_robin), schedule_(std::move(schedule)), mode_(mode) {
    if (!(round_robin_.slot_length > 0.0)) {
        throw std::invalid_argument("LocalController: slot_length must be positive");
    }
}

Seconds LocalController::request_mode(AlgorithmMode mode, Seconds now) {
    pending_ = mode;
    pending_at_ = (std::floor(now / round_robin_.slot_length) + 1.0) * round_robin_.slot_length;
    return pending_at_;
}

Seconds LocalController::next_boundary(Seconds now) const {
    Seconds next = (std::floor(now / round_robin_.slot_length) + 1.0) * round_robin_.slot_length;
    if (mode_ == AlgorithmMode::ScheduleTime) {
        const Seconds day_start = now - time_of_day(now);
        for (const auto& ws : schedule_.windows) {
            for (const auto& w : ws) {
                for (Seconds edge : {w.start, w.end}) {
                    Seconds t = day_start + edge;
                    if (t <= now) t += kSecondsPerDay;
                    next = std::min(next, t);
                }
            }
        }
    }
    return next;
}

std::optional<Allocation> LocalController::on_boundary(ChargingStation& station, Seconds now) {
    if (pending_ && now >= pending_at_) {
        mode_ = *pending_;
        pending_.reset();
        station.set_local_algorithm(mode_);
    }
    const auto plugged = plugged_outlets(station);
    Allocation alloc;
    switch (mode_) {
        case AlgorithmMode::None: return std::nullopt;
        case AlgorithmMode::RoundRobin:
            alloc = round_robin_step(round_robin_, plugged, station.meter_count(), now);
            break;
        case AlgorithmMode::ScheduleTime:
            alloc = schedule_time_step(schedule_, plugged, station.meter_count(), now);
            break;
    }
    apply_allocation(station, alloc, now);
    return alloc;
}

}  // namespace picsim::sched
