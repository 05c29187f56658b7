#pragma once

// Seeded discrete-event engine: virtual clock, (time, seq) ordered event
// queue, named random substreams and a digestible execution trace.

#include <cstdint>
#include <functional>
#include <queue>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "json.hpp"

namespace picsim::sim {

using Time = double;

std::uint64_t fnv1a(std::string_view bytes,
                    std::uint64_t basis = 14695981039346656037ULL);
std::string to_hex(std::uint64_t value);

/// Seed for the substream `label` of `master_seed`. Distinct labels give
/// distinct seeds (splitmix64 over an FNV-1a label hash).
std::uint64_t derive_stream_seed(std::uint64_t master_seed, std::string_view label);

/// Portable random stream. The standard distributions are implementation
/// defined, so every variate here is built directly from mt19937_64 output
/// to keep traces identical across standard libraries.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

    static RandomStream derive(std::uint64_t master_seed, std::string_view label) {
        return RandomStream(derive_stream_seed(master_seed, label));
    }

    std::uint64_t next_u64() { return gen_(); }
    /// Uniform on [0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer on [0, n).
    std::size_t index(std::size_t n);
    double normal(double mean, double stddev);
    double exponential(double mean);
    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 gen_;
};

enum class EventKind { MessageDelivery, TimerTick, Interrupt, PlugChange, Probe, Control, Failure };

std::string_view to_string(EventKind kind);
EventKind parse_event_kind(std::string_view text);

struct TraceRecord {
    Time at = 0.0;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::Control;
    std::string label;
    nlohmann::json data = nlohmann::json::object();

    bool operator==(const TraceRecord&) const = default;
};

struct EventTrace {
    std::uint64_t seed = 0;
    std::string config_digest;
    std::vector<TraceRecord> records;
    bool failed = false;
    std::string failure;

    /// FNV-1a over the canonical serialisation of every field above.
    std::uint64_t digest() const;
    std::string digest_hex() const { return to_hex(digest()); }
};

struct EventHandle {
    std::uint64_t seq = 0;
    Time at = 0.0;
};

class Engine;
using Handler = std::function<void(Engine&)>;

class Engine {
public:
    explicit Engine(std::uint64_t seed, std::string config_digest = {});

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;
    Engine(Engine&&) = default;
    Engine& operator=(Engine&&) = default;

    Time now() const { return clock_; }
    std::uint64_t seed() const { return trace_.seed; }

    /// Enqueue at now() + delay. Throws std::invalid_argument on a negative
    /// or non-finite delay.
    EventHandle schedule(Time delay, EventKind kind, std::string label, Handler handler);
    EventHandle schedule_at(Time at, EventKind kind, std::string label, Handler handler);
    /// Returns false when the event already ran or was cancelled.
    bool cancel(const EventHandle& handle);

    /// Merge fields into the data of the record of the executing event.
    void note(const nlohmann::json& fields);

    /// Execute every event with at <= t_end, then set the clock to t_end.
    /// A throwing handler truncates the run with a failure record.
    const EventTrace& run_until(Time t_end);

    const EventTrace& trace() const { return trace_; }
    std::size_t pending() const { return queued_.size(); }

    RandomStream stream(std::string_view label) const {
        return RandomStream::derive(trace_.seed, label);
    }

private:
    struct Scheduled {
        Time at;
        std::uint64_t seq;
        EventKind kind;
        std::string label;
        Handler handler;
    };
    struct Later {
        bool operator()(const Scheduled& a, const Scheduled& b) const {
            if (a.at != b.at) return a.at > b.at;
            return a.seq > b.seq;
        }
    };

    Time clock_ = 0.0;
    std::uint64_t next_seq_ = 0;
    std::priority_queue<Scheduled, std::vector<Scheduled>, Later> queue_;
    std::unordered_set<std::uint64_t> queued_;
    EventTrace trace_;
    TraceRecord* current_ = nullptr;
};

}  // namespace picsim::sim
