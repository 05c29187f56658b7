#include "picsim/sim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace picsim::sim {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis) {
    std::uint64_t h = basis;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string to_hex(std::uint64_t value) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::string_view label) {
    return splitmix64(splitmix64(master_seed) ^ fnv1a(label));
}

double RandomStream::uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

std::size_t RandomStream::index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("RandomStream::index: empty range");
    // Rejection keeps the result unbiased for any n.
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
    std::uint64_t x = gen_();
    while (x >= limit) x = gen_();
    return static_cast<std::size_t>(x % n);
}

double RandomStream::normal(double mean, double stddev) {
    // Box-Muller; u1 is shifted into (0, 1] so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return mean + stddev * z;
}

double RandomStream::exponential(double mean) {
    return -mean * std::log(1.0 - uniform());
}

std::string_view to_string(EventKind kind) {
    switch (kind) {
        case EventKind::MessageDelivery: return "message";
        case EventKind::TimerTick: return "timer";
        case EventKind::Interrupt: return "interrupt";
        case EventKind::PlugChange: return "plug";
        case EventKind::Probe: return "probe";
        case EventKind::Control: return "control";
        case EventKind::Failure: return "failure";
    }
    return "control";
}

EventKind parse_event_kind(std::string_view text) {
    for (auto k : {EventKind::MessageDelivery, EventKind::TimerTick, EventKind::Interrupt,
                   EventKind::PlugChange, EventKind::Probe, EventKind::Control,
                   EventKind::Failure}) {
        if (to_string(k) == text) return k;
    }
    throw std::invalid_argument("unknown event kind '" + std::string(text) + "'");
}

std::uint64_t EventTrace::digest() const {
    std::uint64_t h = fnv1a("picsim-trace/1\n");
    h = fnv1a(std::to_string(seed) + "|" + config_digest + "\n", h);
    for (const auto& r : records) {
        std::string line = nlohmann::json(r.at).dump();
        line += '|';
        line += std::to_string(r.seq);
        line += '|';
        line += to_string(r.kind);
        line += '|';
        line += r.label;
        line += '|';
        line += r.data.dump();
        line += '\n';
        h = fnv1a(line, h);
    }
    if (failed) h = fnv1a("failed|" + failure + "\n", h);
    return h;
}

Engine::Engine(std::uint64_t seed, std::string config_digest) {
    trace_.seed = seed;
    trace_.config_digest = std::move(config_digest);
}

EventHandle Engine::schedule(Time delay, EventKind kind, std::string label, Handler handler) {
    if (!(delay >= 0.0) || !std::isfinite(delay)) {
        throw std::invalid_argument("Engine::schedule: delay must be finite and >= 0");
    }
    return schedule_at(clock_ + delay, kind, std::move(label), std::move(handler));
}

EventHandle Engine::schedule_at(Time at, EventKind kind, std::string label, Handler handler) {
    if (!(at >= clock_) || !std::isfinite(at)) {
        throw std::invalid_argument("Engine::schedule_at: time precedes the engine clock");
    }
    const std::uint64_t seq = next_seq_++;
    queue_.push(Scheduled{at, seq, kind, std::move(label), std::move(handler)});
    queued_.insert(seq);
    return EventHandle{seq, at};
}

bool Engine::cancel(const EventHandle& handle) {
    return queued_.erase(handle.seq) > 0;
}

void Engine::note(const nlohmann::json& fields) {
    if (current_ == nullptr) {
        throw std::logic_error("Engine::note called outside an event handler");
    }
    current_->data.update(fields);
}

const EventTrace& Engine::run_until(Time t_end) {
    if (!(t_end >= clock_)) {
        throw std::invalid_argument("Engine::run_until: t_end precedes the engine clock");
    }
    if (trace_.failed) return trace_;

    while (!queue_.empty() && queue_.top().at <= t_end) {
        Scheduled ev = queue_.top();
        queue_.pop();
        if (queued_.erase(ev.seq) == 0) continue;  // cancelled

        clock_ = ev.at;
        trace_.records.push_back(TraceRecord{ev.at, ev.seq, ev.kind, ev.label, nlohmann::json::object()});
        current_ = &trace_.records.back();
        try {
            if (ev.handler) ev.handler(*this);
        } catch (const std::exception& e) {
            current_ = nullptr;
            trace_.failed = true;
            trace_.failure = ev.label + ": " + e.what();
            trace_.records.push_back(TraceRecord{ev.at, ev.seq, EventKind::Failure, ev.label,
                                                 nlohmann::json{{"error", e.what()}}});
            queue_ = {};
            queued_.clear();
            return trace_;
        }
        current_ = nullptr;
    }
    clock_ = t_end;
    return trace_;
}

}  // namespace picsim::sim
