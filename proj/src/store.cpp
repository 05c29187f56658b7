#include "picsim/store.hpp"

#include <algorithm>
#include <stdexcept>

namespace picsim::control {

std::string_view to_string(ProtocolMode mode) {
    switch (mode) {
        case ProtocolMode::LegacyPull: return "legacy_pull";
        case ProtocolMode::PicPull: return "pic_pull";
        case ProtocolMode::PicPush: return "pic_push";
    }
    return "legacy_pull";
}

ProtocolMode parse_protocol_mode(std::string_view text) {
    for (auto m : {ProtocolMode::LegacyPull, ProtocolMode::PicPull, ProtocolMode::PicPush}) {
        if (to_string(m) == text) return m;
    }
    throw std::invalid_argument("unknown protocol mode '" + std::string(text) + "'");
}

bool ServerStore::update(std::size_t station, std::uint64_t seq,
                         std::vector<proto::MeterReading> readings, Seconds now) {
    std::lock_guard lock(mutex_);
    StationRecord& rec = stations_[station];
    if (rec.last_seq && seq <= *rec.last_seq) {
        diagnostics_.push_back("station " + std::to_string(station) + ": discarded packet seq " +
                               std::to_string(seq) + " (stored seq " + std::to_string(*rec.last_seq) +
                               ")");
        return false;
    }
    rec.readings = std::move(readings);
    rec.last_seq = seq;
    rec.updated_at = now;
    return true;
}

void ServerStore::record_reading(std::size_t station, const proto::MeterReading& reading,
                                 Seconds now) {
    std::lock_guard lock(mutex_);
    StationRecord& rec = stations_[station];
    auto it = std::find_if(rec.readings.begin(), rec.readings.end(),
                           [&](const auto& r) { return r.meter == reading.meter; });
    if (it == rec.readings.end()) {
        rec.readings.push_back(reading);
    } else {
        *it = reading;
    }
    rec.updated_at = now;
}

std::optional<StationRecord> ServerStore::find(std::size_t station) const {
    std::lock_guard lock(mutex_);
    auto it = stations_.find(station);
    if (it == stations_.end()) return std::nullopt;
    return it->second;
}

std::optional<proto::MeterReading> ServerStore::reading(const MeterId& meter) const {
    std::lock_guard lock(mutex_);
    auto it = stations_.find(meter.station);
    if (it == stations_.end()) return std::nullopt;
    for (const auto& r : it->second.readings) {
        if (r.meter == meter) return r;
    }
    return std::nullopt;
}

void ServerStore::set_protocol(std::size_t station, ProtocolMode mode) {
    std::lock_guard lock(mutex_);
    stations_[station].protocol = mode;
}

void ServerStore::set_algorithm(std::size_t station, AlgorithmMode mode) {
    std::lock_guard lock(mutex_);
    stations_[station].algorithm = mode;
}

void ServerStore::add_diagnostic(std::string text) {
    std::lock_guard lock(mutex_);
    diagnostics_.push_back(std::move(text));
}

std::vector<std::string> ServerStore::diagnostics() const {
    std::lock_guard lock(mutex_);
    return diagnostics_;
}

}  // namespace picsim::control
