#include <gtest/gtest.h>

#include <algorithm>
#include <stdexcept>

#include "picsim/sched.hpp"
#include "picsim/sim.hpp"

using namespace picsim;
using namespace picsim::sched;

namespace {

constexpr double kHour = 3600.0;

ChargingStation station_with(std::size_t outlets, Amperes limit, std::initializer_list<std::size_t> plugged) {
    ChargingStation s(0, ChargingStation::Options{.meters = outlets, .circuit_limit = limit});
    for (auto o : plugged) s.plug(o, EvModel{.plugged = true}, 0.0);
    return s;
}

// Naive rotation: a pointer walks the plugged list handing out m seats per slot.
std::vector<std::size_t> rotation_oracle(const std::vector<std::size_t>& order, std::size_t m, std::int64_t slot) {
    const std::size_t n = order.size();
    if (n <= m) return order;
    std::size_t p = 0;
    for (std::int64_t k = 0; k < slot; ++k) p = (p + m) % n;
    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < m; ++j) active.push_back(order[(p + j) % n]);
    std::sort(active.begin(), active.end());
    return active;
}

std::vector<std::size_t> active_of(const Allocation& a) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > 0.0) out.push_back(i);
    }
    return out;
}

}  // namespace

TEST(RoundRobin, ValidateConfig) {
    EXPECT_TRUE(validate_config(RoundRobinConfig{}, 80.0).ok());
    EXPECT_TRUE(validate_config(RoundRobinConfig{900, 2, 16}, 32.0).ok());
    EXPECT_FALSE(validate_config(RoundRobinConfig{900, 3, 16}, 32.0).ok());
    EXPECT_FALSE(validate_config(RoundRobinConfig{0, 1, 16}, 32.0).ok());
    EXPECT_FALSE(validate_config(RoundRobinConfig{900, 0, 16}, 32.0).ok());
}

TEST(RoundRobin, SlotIndex) {
    const RoundRobinConfig c{};
    EXPECT_EQ(slot_index(c, 0.0), 0);
    EXPECT_EQ(slot_index(c, 899.9), 0);
    EXPECT_EQ(slot_index(c, 900.0), 1);
}

TEST(RoundRobin, ThreeEvsOneAtATime) {
    const RoundRobinConfig c{900, 1, 16};
    const std::set<std::size_t> plugged{0, 2, 3};
    EXPECT_EQ(round_robin_step(c, plugged, 4, 0.0), (Allocation{16, 0, 0, 0}));
    EXPECT_EQ(round_robin_step(c, plugged, 4, 900.0), (Allocation{0, 0, 16, 0}));
    EXPECT_EQ(round_robin_step(c, plugged, 4, 1800.0), (Allocation{0, 0, 0, 16}));
    EXPECT_EQ(round_robin_step(c, plugged, 4, 2700.0), (Allocation{16, 0, 0, 0}));
    EXPECT_EQ(round_robin_step(c, {}, 4, 0.0), (Allocation{0, 0, 0, 0}));
    EXPECT_EQ(round_robin_step(RoundRobinConfig{900, 4, 10}, plugged, 4, 0.0), (Allocation{10, 0, 10, 10}));
    EXPECT_THROW(round_robin_step(c, {0, 7}, 4, 0.0), std::out_of_range);
}

TEST(RoundRobin, MatchesRotationOracle) {
    auto rng = sim::RandomStream(21);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t outlets = 1 + rng.index(8);
        std::set<std::size_t> plugged;
        for (std::size_t o = 0; o < outlets; ++o) {
            if (rng.bernoulli(0.6)) plugged.insert(o);
        }
        const RoundRobinConfig c{60.0, 1 + rng.index(4), 8.0};
        const std::vector<std::size_t> order(plugged.begin(), plugged.end());
        for (std::int64_t k = 0; k < 30; ++k) {
            const auto alloc = round_robin_step(c, plugged, outlets, static_cast<double>(k) * 60.0 + 5.0);
            ASSERT_EQ(active_of(alloc), rotation_oracle(order, c.max_concurrent, k));
        }
    }
}

TEST(ScheduleTime, WraparoundWindow) {
    const TimeWindow night{22 * kHour, 6 * kHour, 16.0};
    EXPECT_TRUE(window_contains(night, 23 * kHour));
    EXPECT_TRUE(window_contains(night, 5 * kHour + 59 * 60));
    EXPECT_FALSE(window_contains(night, 6 * kHour));
    EXPECT_FALSE(window_contains(night, 7 * kHour));
    EXPECT_TRUE(window_contains(night, 0.0));
    EXPECT_FALSE(window_contains(TimeWindow{kHour, kHour, 1.0}, kHour));

    ScheduleTimeConfig c;
    c.windows = {{night}, {{8 * kHour, 12 * kHour, 20.0}}};
    // Day 3, 23:00: outlet 0 active, outlet 1 unplugged is ignored anyway.
    EXPECT_EQ(schedule_time_step(c, {0, 1}, 3, 3 * 86400.0 + 23 * kHour), (Allocation{16, 0, 0}));
    EXPECT_EQ(schedule_time_step(c, {0, 1}, 3, 9 * kHour), (Allocation{0, 20, 0}));
    EXPECT_EQ(schedule_time_step(c, {1}, 3, 23 * kHour), (Allocation{0, 0, 0}));
}

TEST(ScheduleTime, ValidateRejectsMalformedWindows) {
    ScheduleTimeConfig c;
    c.windows = {{{kHour, kHour, 10}}};
    EXPECT_FALSE(validate_config(c, 80).ok());
    c.windows = {{{-1, kHour, 10}}};
    EXPECT_FALSE(validate_config(c, 80).ok());
    c.windows = {{{0, kHour, 0}}};
    EXPECT_FALSE(validate_config(c, 80).ok());
    c.windows = {{{0, 2 * kHour, 10}, {kHour, 3 * kHour, 10}}};
    const auto overlap = validate_config(c, 80);
    ASSERT_FALSE(overlap.ok());
    EXPECT_NE(overlap.violations[0].what.find("overlaps"), std::string::npos);
}

TEST(ScheduleTime, ValidateReportsExcessInstant) {
    ScheduleTimeConfig c;
    c.windows = {{{22 * kHour, 6 * kHour, 24}}, {{5 * kHour, 9 * kHour, 24}}, {{0, 12 * kHour, 10}}};
    const auto r = validate_config(c, 50.0);
    ASSERT_EQ(r.violations.size(), 1u);
    EXPECT_EQ(r.violations[0].instant, 5 * kHour);
    EXPECT_EQ(r.violations[0].total, 58.0);
    EXPECT_TRUE(validate_config(c, 58.0).ok());
}

TEST(ScheduleTime, ValidateMatchesMinuteSweepOracle) {
    auto rng = sim::RandomStream(33);
    for (int trial = 0; trial < 300; ++trial) {
        ScheduleTimeConfig c;
        const std::size_t outlets = 1 + rng.index(5);
        c.windows.resize(outlets);
        for (auto& ws : c.windows) {
            if (rng.bernoulli(0.2)) continue;
            const double start = 60.0 * static_cast<double>(rng.index(1440));
            double end = 60.0 * static_cast<double>(rng.index(1440));
            if (end == start) end = std::fmod(start + 60.0, 86400.0);
            ws.push_back({start, end, static_cast<double>(6 + rng.index(20))});
        }
        const double limit = static_cast<double>(20 + rng.index(60));

        double peak = 0.0;
        std::set<double> violating;
        for (int minute = 0; minute < 1440; ++minute) {
            double total = 0.0;
            for (const auto& ws : c.windows) {
                for (const auto& w : ws) {
                    if (window_contains(w, minute * 60.0)) total += w.current;
                }
            }
            peak = std::max(peak, total);
            if (total > limit) violating.insert(minute * 60.0);
        }
        const auto r = validate_config(c, limit);
        ASSERT_EQ(r.ok(), peak <= limit) << "trial " << trial;
        for (const auto& v : r.violations) ASSERT_TRUE(violating.contains(v.instant));
    }
}

TEST(ApplyAllocation, DecreasesBeforeIncreases) {
    // A naive in-order apply would close relay 0's replacement before
    // releasing outlet 1 and trip the 32 A limit.
    auto s = station_with(3, 32.0, {0, 1, 2});
    apply_allocation(s, {16, 16, 0}, 0.0);
    EXPECT_EQ(s.allocated_current_total(), 32.0);
    EXPECT_NO_THROW(apply_allocation(s, {24, 8, 0}, 10.0));
    EXPECT_NO_THROW(apply_allocation(s, {0, 16, 16}, 20.0));
    EXPECT_EQ(s.relay(0), RelayState::Off);
    EXPECT_EQ(s.relay(2), RelayState::On);
    EXPECT_EQ(s.allocation(0), 0.0);
    EXPECT_EQ(s.allocated_current_total(), 32.0);
    EXPECT_THROW(apply_allocation(s, {16, 16}, 30.0), std::invalid_argument);
    EXPECT_THROW(apply_allocation(s, {16, 16, 16}, 30.0), CircuitLimitError);
}

TEST(LocalController, ModeSwitchWaitsForSlotBoundary) {
    auto s = station_with(4, 40.0, {0, 1, 3});
    LocalController ctl(RoundRobinConfig{900, 1, 16}, ScheduleTimeConfig{});
    EXPECT_EQ(ctl.request_mode(AlgorithmMode::RoundRobin, 450.0), 900.0);
    EXPECT_FALSE(ctl.on_boundary(s, 450.0));
    EXPECT_EQ(ctl.mode(), AlgorithmMode::None);
    const auto a = ctl.on_boundary(s, 900.0);
    ASSERT_TRUE(a);
    EXPECT_EQ(ctl.mode(), AlgorithmMode::RoundRobin);
    EXPECT_EQ(s.local_algorithm(), AlgorithmMode::RoundRobin);
    EXPECT_EQ(*a, (Allocation{0, 16, 0, 0}));
    EXPECT_EQ(ctl.next_boundary(900.0), 1800.0);
    EXPECT_EQ(ctl.next_boundary(1000.0), 1800.0);
}

TEST(LocalController, ScheduleModeStopsAtWindowEdges) {
    ScheduleTimeConfig st;
    st.windows = {{{1000.0, 1300.0, 16}}};
    LocalController ctl(RoundRobinConfig{900, 1, 16}, st, AlgorithmMode::ScheduleTime);
    EXPECT_EQ(ctl.next_boundary(0.0), 900.0);
    EXPECT_EQ(ctl.next_boundary(900.0), 1000.0);
    EXPECT_EQ(ctl.next_boundary(1000.0), 1300.0);
    EXPECT_EQ(ctl.next_boundary(86400.0 + 950.0), 86400.0 + 1000.0);
    auto s = station_with(1, 40.0, {0});
    EXPECT_EQ(*ctl.on_boundary(s, 1000.0), (Allocation{16}));
    EXPECT_EQ(*ctl.on_boundary(s, 1300.0), (Allocation{0}));
    EXPECT_THROW(LocalController(RoundRobinConfig{0, 1, 16}, st), std::invalid_argument);
}
