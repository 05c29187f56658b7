#include <gtest/gtest.h>

#include "picsim/proto.hpp"

using namespace picsim;
using namespace picsim::proto;

namespace {

ChargingStation four_evs() {
    ChargingStation s(0, ChargingStation::Options{});
    for (std::size_t i = 0; i < 4; ++i) {
        s.plug(i, EvModel{.plugged = true}, 0.0);
        s.set_allocation(i, 16.0, 0.0);
        s.apply_relay(i, RelayState::On, 0.0);
    }
    return s;
}

const TimingBudget kWorst = TimingBudget::make(4.5, 0.5);

}  // namespace

TEST(LegacyPull, WorstCasePowerOnly) {
    const auto station = four_evs();
    const auto models = NetworkModels::fixed(kWorst);
    auto streams = RetrievalStreams::derive(1, "r");
    const auto r = legacy_pull(station, models, streams, 100.0);
    EXPECT_DOUBLE_EQ(r.wall_time, 20.0);
    EXPECT_EQ(r.request_count, 4u);
    EXPECT_EQ(r.messages.size(), 8u);
    ASSERT_EQ(r.snapshots.size(), 4u);
    for (const auto& s : r.snapshots) EXPECT_EQ(s.status, ReadingStatus::Ok);
    // First meter is captured at 100 + 2.25 + 0.5; the run ends at 120.
    ASSERT_TRUE(r.staleness[0]);
    EXPECT_DOUBLE_EQ(*r.staleness[0], 17.25);
    EXPECT_DOUBLE_EQ(legacy_retrieval_time(kWorst, 4, false), 20.0);
}

TEST(LegacyPull, WorstCaseWithStatus) {
    const auto station = four_evs();
    const auto models = NetworkModels::fixed(kWorst);
    auto streams = RetrievalStreams::derive(1, "r");
    const auto r = legacy_pull(station, models, streams, 0.0, PullOptions{.include_status = true});
    EXPECT_DOUBLE_EQ(r.wall_time, 38.0);
    EXPECT_EQ(r.request_count, 8u);
    EXPECT_DOUBLE_EQ(legacy_retrieval_time(kWorst, 4, true), 38.0);
    for (const auto& s : r.snapshots) EXPECT_EQ(s.snapshot->relay, RelayState::On);
}

TEST(LegacyPull, PipelinedTakesOneRoundTrip) {
    const auto station = four_evs();
    const auto models = NetworkModels::fixed(kWorst);
    auto streams = RetrievalStreams::derive(1, "r");
    EXPECT_DOUBLE_EQ(legacy_pull(station, models, streams, 0.0, PullOptions{.pipelined = true}).wall_time, 5.0);
}

TEST(LegacyPull, TimeoutsAreCountedPerRequest) {
    const auto station = four_evs();
    const auto models = NetworkModels::fixed(kWorst);
    auto streams = RetrievalStreams::derive(1, "r");
    const auto r = legacy_pull(station, models, streams, 0.0, PullOptions{.timeout = 3.0});
    EXPECT_EQ(r.timeouts, 4u);
    EXPECT_DOUBLE_EQ(r.wall_time, 12.0);
    for (const auto& s : r.snapshots) EXPECT_EQ(s.status, ReadingStatus::Error);
    for (const auto& s : r.staleness) EXPECT_FALSE(s);
}

TEST(PicPull, ServedFromWarmCache) {
    const auto station = four_evs();
    const auto models = NetworkModels::fixed(kWorst);
    pic::StationMeterBus bus(station, models, sim::RandomStream(1), sim::RandomStream(2));
    auto pic = pic::startup_init(0, bus, pic::PicConfig{.serve_cache = true});
    pic::collect_all(pic, bus, 0.0);
    auto net = sim::RandomStream(3);
    const auto r = pic_pull(pic, bus, models, LinkKind::ThreeG, net, 10.0);
    EXPECT_DOUBLE_EQ(r.wall_time, 4.5);
    EXPECT_DOUBLE_EQ(pic_pull_time(kWorst), 4.5);
    EXPECT_EQ(r.request_count, 1u);
    EXPECT_FALSE(r.failed);
    EXPECT_EQ(r.snapshots.size(), 4u);
    EXPECT_DOUBLE_EQ(20.0 / r.wall_time, 20.0 / 4.5);
}

TEST(PicPull, FreshCollectionAddsMetering) {
    const auto station = four_evs();
    const auto models = NetworkModels::fixed(kWorst);
    pic::StationMeterBus bus(station, models, sim::RandomStream(1), sim::RandomStream(2));
    auto pic = pic::startup_init(0, bus);
    auto net = sim::RandomStream(3);
    const auto r = pic_pull(pic, bus, models, LinkKind::ThreeG, net, 0.0);
    EXPECT_DOUBLE_EQ(r.wall_time, 4.5 + 4 * 0.5);
    auto late = pic_pull(pic, bus, models, LinkKind::ThreeG, net, 50.0, PullOptions{.timeout = 5.0, .first_seq = 2});
    EXPECT_TRUE(late.failed);
    EXPECT_EQ(late.timeouts, 1u);
    EXPECT_DOUBLE_EQ(late.wall_time, 5.0);
}

TEST(ClosedForms, BudgetEquations) {
    EXPECT_DOUBLE_EQ(t_save(TimingBudget::make(5.0, 0.5)), 17.5);
    EXPECT_DOUBLE_EQ(t_save(TimingBudget::make(2.0, 0.2, 0.001)), 6.996);
    EXPECT_DOUBLE_EQ(push_cycle_time(TimingBudget::make(4.5, 0.5, 0.001), 4), 4 * 0.501 + 2.25);
    const auto cloud = TimingBudget::make(4.5, 0.5, 0.0, 0.0, 0.1, 0.2);
    EXPECT_DOUBLE_EQ(legacy_retrieval_time(cloud, 4, false), 20.0 + 4 * 0.3);
    EXPECT_DOUBLE_EQ(legacy_retrieval_time(cloud, 4, true), 38.0 + 8 * 0.3);
    EXPECT_DOUBLE_EQ(pic_pull_time(cloud), 4.8);
    EXPECT_DOUBLE_EQ(legacy_retrieval_time(TimingBudget{}, 4, true), 0.0);
}

TEST(PushConsume, AcceptsNewerRejectsOlder) {
    control::ServerStore store;
    Message pkt;
    pkt.kind = MessageKind::AggregatePacket;
    pkt.seq = 3;
    MeterSnapshot snap;
    snap.captured_at = 8.0;
    pkt.payload = std::vector<MeterReading>{{{0, 0}, snap, ReadingStatus::Ok}, {{0, 1}, std::nullopt, ReadingStatus::Error}};
    const auto ok = push_consume(store, pkt, 10.0);
    EXPECT_TRUE(ok.accepted);
    ASSERT_EQ(ok.staleness.size(), 2u);
    EXPECT_DOUBLE_EQ(*ok.staleness[0], 2.0);
    EXPECT_FALSE(ok.staleness[1]);

    const auto dup = push_consume(store, pkt, 11.0);
    EXPECT_FALSE(dup.accepted);
    EXPECT_NE(dup.diagnostic.find("seq 3"), std::string::npos);

    const auto stored = staleness_at(*store.find(0), 15.0);
    EXPECT_DOUBLE_EQ(*stored[0], 7.0);

    Message notpkt;
    notpkt.kind = MessageKind::ModeAck;
    EXPECT_THROW(push_consume(store, notpkt, 1.0), std::invalid_argument);
}

TEST(SharedStreams, CopiesReplayTheSameDraws) {
    const auto station = four_evs();
    const NetworkModels models;
    const auto base = RetrievalStreams::derive(7, "retrieval/0");
    auto a = base;
    auto b = base;
    const auto ra = legacy_pull(station, models, a, 500.0);
    const auto rb = legacy_pull(station, models, b, 500.0);
    EXPECT_EQ(ra.wall_time, rb.wall_time);
    auto c = base;
    const auto full = legacy_pull(station, models, c, 500.0, PullOptions{.include_status = true});
    // Status reads cost nothing by default, so the extra time is the status round trips.
    EXPECT_GT(full.wall_time, ra.wall_time);
}
