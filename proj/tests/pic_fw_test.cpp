#include <gtest/gtest.h>

#include <set>
#include <stdexcept>

#include "picsim/pic_fw.hpp"

using namespace picsim;
using namespace picsim::pic;

namespace {

// Scripted bus: every read costs `local + metering` and returns a snapshot
// stamped with its capture time, unless the slot is dead.
class FakeBus : public MeterBus {
public:
    explicit FakeBus(std::size_t n, Seconds local = 0.001, Seconds metering = 0.2)
        : n_(n), local_(local), metering_(metering) {}

    std::size_t slot_count() const override { return n_; }
    std::optional<MeterId> probe(std::size_t slot) override {
        if (unreachable.contains(slot)) return std::nullopt;
        return MeterId{0, slot};
    }
    MeterRead read(const MeterId& meter, Seconds at) override {
        ++reads;
        MeterRead r{std::nullopt, local_, metering_};
        if (dead.contains(meter.outlet)) return r;
        MeterSnapshot s;
        s.meter = meter;
        s.captured_at = at + local_ + metering_;
        r.snapshot = s;
        return r;
    }

    std::set<std::size_t> unreachable;
    std::set<std::size_t> dead;
    std::size_t reads = 0;

private:
    std::size_t n_;
    Seconds local_;
    Seconds metering_;
};

SerialFrame frame(Opcode op, double arg, std::uint64_t seq) {
    return SerialFrame{static_cast<std::uint8_t>(op), arg, seq};
}

// Everything except flags, for checking that ISRs touch nothing else.
PicState without_flags(PicState s) {
    s.flags = PicFlags{};
    return s;
}

}  // namespace

TEST(Frames, DecodeAndReject) {
    EXPECT_EQ(decode_frame(frame(Opcode::PowerInfoRequest, 0, 1)).op, Opcode::PowerInfoRequest);
    const auto p = decode_frame(frame(Opcode::SetPushPeriod, 30.0, 2));
    EXPECT_EQ(p.op, Opcode::SetPushPeriod);
    EXPECT_EQ(p.period, 30.0);
    EXPECT_EQ(decode_frame(frame(Opcode::SetPushPeriod, 0.0, 3)).op, Opcode::Reject);
    EXPECT_TRUE(decode_frame(frame(Opcode::SetPushEnabled, 1.0, 4)).enabled);
    const auto bad = decode_frame(SerialFrame{0x7E, 0.0, 5});
    EXPECT_EQ(bad.op, Opcode::Reject);
    EXPECT_NE(bad.reject_reason.find("0x7e"), std::string::npos);
}

TEST(Frames, EncodeParseAndFramesFor) {
    const SerialFrame f{0x02, 12.5, 9};
    EXPECT_EQ(parse_frame(encode_frame(f)), f);
    EXPECT_THROW(parse_frame("{\"opcode\":300,\"seq\":1}"), std::invalid_argument);
    EXPECT_THROW(parse_frame("nope"), std::invalid_argument);

    proto::Message req;
    req.kind = proto::MessageKind::AggregateReq;
    req.seq = 4;
    EXPECT_EQ(frames_for(req), (std::vector<SerialFrame>{frame(Opcode::PowerInfoRequest, 0, 4)}));

    proto::Message cfg;
    cfg.kind = proto::MessageKind::PushConfigSet;
    cfg.seq = 10;
    cfg.payload = proto::PushConfigPayload{20.0, false};
    EXPECT_EQ(frames_for(cfg), (std::vector<SerialFrame>{frame(Opcode::SetPushPeriod, 20.0, 10),
                                                         frame(Opcode::SetPushEnabled, 0.0, 11)}));
    proto::Message other;
    other.kind = proto::MessageKind::ModeSelect;
    EXPECT_THROW(frames_for(other), std::invalid_argument);
}

TEST(Startup, RegistersEveryMeter) {
    FakeBus bus(4);
    const PicState s = startup_init(0, bus);
    EXPECT_EQ(s.registered_meters.size(), 4u);
    EXPECT_EQ(s.phase, Phase::Idle);
    for (const auto& c : s.cache) EXPECT_EQ(c.status, proto::ReadingStatus::Error);

    FakeBus empty(0);
    EXPECT_EQ(startup_init(0, empty).phase, Phase::Idle);
}

TEST(Startup, DeadSlotIsNamed) {
    FakeBus bus(4);
    bus.unreachable.insert(2);
    try {
        startup_init(0, bus);
        FAIL() << "expected StartupError";
    } catch (const StartupError& e) {
        EXPECT_EQ(e.slot(), 2u);
    }
    EXPECT_THROW(startup_init(0, bus, PicConfig{.push_period = 0.0}), std::invalid_argument);
}

TEST(Interrupts, TouchOnlyFlags) {
    FakeBus bus(4);
    PicState s = startup_init(0, bus);
    main_loop_step(s, bus, 0.0);
    const PicState before = without_flags(s);
    const auto reads = bus.reads;
    on_serial_interrupt(s, frame(Opcode::PowerInfoRequest, 0, 1));
    on_serial_interrupt(s, frame(Opcode::SetPushPeriod, 30, 2));
    on_timer_interrupt(s);
    EXPECT_EQ(without_flags(s), before);
    EXPECT_EQ(bus.reads, reads);
    EXPECT_TRUE(s.flags.push_data);
    EXPECT_EQ(s.flags.pending.size(), 2u);
}

TEST(Interrupts, OverflowAndDuplicatesGetErrors) {
    FakeBus bus(4);
    PicState s = startup_init(0, bus);
    for (std::uint64_t q = 1; q <= 5; ++q) on_serial_interrupt(s, frame(Opcode::SetPushEnabled, 1, q));
    EXPECT_EQ(s.flags.pending.size(), kCommandQueueDepth);
    EXPECT_EQ(s.flags.overflow.size(), 1u);
    const auto step = main_loop_step(s, bus, 0.0);
    ASSERT_EQ(step.messages.size(), 5u);
    EXPECT_EQ(step.messages.back().kind, proto::MessageKind::Error);
    EXPECT_EQ(step.messages.back().reply_to, 5u);

    on_serial_interrupt(s, frame(Opcode::PowerInfoRequest, 0, 5));
    const auto dup = main_loop_step(s, bus, 1.0);
    ASSERT_EQ(dup.messages.size(), 1u);
    EXPECT_EQ(dup.messages[0].kind, proto::MessageKind::Error);
    EXPECT_EQ(dup.collections, 0u);
}

TEST(MainLoop, PushCollectsAndSends) {
    FakeBus bus(4);
    PicState s = startup_init(0, bus);
    on_timer_interrupt(s);
    const auto step = main_loop_step(s, bus, 100.0);
    EXPECT_EQ(step.collections, 1u);
    EXPECT_NEAR(step.duration, 0.804, 1e-12);
    ASSERT_EQ(step.messages.size(), 1u);
    const auto& pkt = step.messages[0];
    EXPECT_EQ(pkt.kind, proto::MessageKind::AggregatePacket);
    EXPECT_FALSE(pkt.reply_to);
    EXPECT_NEAR(pkt.sent_at, 100.804, 1e-9);
    const auto& readings = std::get<std::vector<proto::MeterReading>>(pkt.payload);
    ASSERT_EQ(readings.size(), 4u);
    // Cache timestamps lie within one collection cycle.
    for (const auto& r : readings) {
        EXPECT_EQ(r.status, proto::ReadingStatus::Ok);
        EXPECT_GE(r.snapshot->captured_at, 100.0);
        EXPECT_LE(r.snapshot->captured_at, 100.804 + 1e-9);
    }
    EXPECT_FALSE(s.flags.push_data);
    EXPECT_EQ(s.phase, Phase::Idle);
}

TEST(MainLoop, DisabledPushStillCollects) {
    FakeBus bus(4);
    PicState s = startup_init(0, bus, PicConfig{.push_enabled = false});
    on_timer_interrupt(s);
    const auto step = main_loop_step(s, bus, 0.0);
    EXPECT_EQ(step.collections, 1u);
    EXPECT_TRUE(step.messages.empty());
    EXPECT_EQ(s.cache[0].status, proto::ReadingStatus::Ok);
}

TEST(MainLoop, ConfigCommandsApplyAtNextStep) {
    FakeBus bus(2);
    PicState s = startup_init(0, bus);
    on_serial_interrupt(s, frame(Opcode::SetPushPeriod, 30, 1));
    EXPECT_EQ(s.push_period, 10.0);
    const auto step = main_loop_step(s, bus, 0.0);
    EXPECT_EQ(s.push_period, 30.0);
    ASSERT_EQ(step.messages.size(), 1u);
    EXPECT_EQ(step.messages[0].kind, proto::MessageKind::ConfigAck);
    PicState uninitialised;
    EXPECT_THROW(main_loop_step(uninitialised, bus, 0.0), std::logic_error);
}

TEST(MainLoop, DeadMeterGoesStale) {
    FakeBus bus(4);
    PicState s = startup_init(0, bus);
    collect_all(s, bus, 0.0);
    bus.dead.insert(1);
    collect_all(s, bus, 10.0);
    EXPECT_EQ(s.cache[1].status, proto::ReadingStatus::Stale);
    EXPECT_LT(s.cache[1].snapshot->captured_at, 10.0);
    EXPECT_EQ(s.cache[0].status, proto::ReadingStatus::Ok);
    EXPECT_FALSE(s.diagnostics.empty());

    FakeBus never(2);
    never.dead.insert(0);
    PicState t = startup_init(0, never);
    collect_all(t, never, 0.0);
    EXPECT_EQ(t.cache[0].status, proto::ReadingStatus::Error);
    EXPECT_FALSE(t.cache[0].snapshot);
}

TEST(MainLoop, SlowCollectionIsDiagnosed) {
    FakeBus bus(4, 0.001, 3.0);
    PicState s = startup_init(0, bus);
    collect_all(s, bus, 0.0);
    ASSERT_FALSE(s.diagnostics.empty());
    EXPECT_NE(s.diagnostics.back().find("push period"), std::string::npos);
}

TEST(MainLoop, ServeCacheSkipsCollectionOnceWarm) {
    FakeBus bus(4);
    PicState s = startup_init(0, bus, PicConfig{.serve_cache = true});
    on_serial_interrupt(s, frame(Opcode::PowerInfoRequest, 0, 1));
    EXPECT_EQ(main_loop_step(s, bus, 0.0).collections, 1u);  // cold cache
    on_serial_interrupt(s, frame(Opcode::PowerInfoRequest, 0, 2));
    const auto warm = main_loop_step(s, bus, 5.0);
    EXPECT_EQ(warm.collections, 0u);
    EXPECT_EQ(warm.duration, 0.0);
    ASSERT_EQ(warm.messages.size(), 1u);
    EXPECT_EQ(warm.messages[0].reply_to, 2u);
}

TEST(MainLoop, PacketSeqIsMonotone) {
    FakeBus bus(4);
    PicState s = startup_init(0, bus);
    std::uint64_t last = 0;
    for (std::uint64_t i = 1; i <= 20; ++i) {
        on_timer_interrupt(s);
        if (i % 3 == 0) on_serial_interrupt(s, frame(Opcode::PowerInfoRequest, 0, i));
        for (const auto& m : main_loop_step(s, bus, static_cast<double>(i) * 10.0).messages) {
            EXPECT_GT(m.seq, last);
            last = m.seq;
        }
    }
    EXPECT_EQ(last, s.packet_seq);
}
