#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "picsim/experiments.hpp"

using namespace picsim;
using namespace picsim::cli;

namespace {

ExperimentConfig small(Command command) {
    ExperimentConfig c = preset(command == Command::LocalSched ? "local-sched" : "default");
    c.rtt.probes = 300;
    c.compare.retrievals = 300;
    c.compare.push_duration = 3600.0;
    c.duty.random_points = 40;
    c.local.duration = 6 * 3600.0;
    return c;
}

sim::TraceFile round_trip(const RunResult& run) {
    std::stringstream ss;
    sim::write_trace(ss, run.trace, run.header);
    return sim::read_trace(ss);
}

const Command kAll[] = {Command::RttDist, Command::CompareProtocols, Command::DutyCycle, Command::LocalSched};

}  // namespace

TEST(Experiments, CommandNames) {
    for (auto c : kAll) EXPECT_EQ(parse_command(to_string(c)), c);
    EXPECT_FALSE(parse_command("replay"));
}

TEST(Experiments, DeterministicPerSeed) {
    for (auto cmd : kAll) {
        const auto c = small(cmd);
        const auto a = run_experiment(cmd, c);
        const auto b = run_experiment(cmd, c);
        EXPECT_FALSE(a.trace.failed) << to_string(cmd) << ": " << a.trace.failure;
        EXPECT_EQ(a.trace.digest(), b.trace.digest()) << to_string(cmd);
        EXPECT_EQ(a.trace.config_digest, config_digest(c));
        auto other = c;
        other.seed = c.seed + 1;
        EXPECT_NE(run_experiment(cmd, other).trace.digest(), a.trace.digest()) << to_string(cmd);
    }
}

TEST(Experiments, InvalidConfigIsRejectedBeforeRunning) {
    auto c = small(Command::CompareProtocols);
    c.pic.push_period = -1.0;
    EXPECT_THROW(run_experiment(Command::CompareProtocols, c), ConfigError);
}

TEST(Experiments, ReportFromFileEqualsReportFromMemory) {
    for (auto cmd : kAll) {
        const auto c = small(cmd);
        const auto run = run_experiment(cmd, c);
        const auto file = round_trip(run);
        const auto recorded = config_from_json(file.header.at("config"));
        EXPECT_EQ(recorded, c);
        const auto mem = build_report(cmd, run.trace, c);
        const auto disk = build_report(cmd, file.trace, recorded);
        EXPECT_EQ(mem.summary, disk.summary) << to_string(cmd);
        ASSERT_EQ(mem.tables.size(), disk.tables.size());
        for (std::size_t i = 0; i < mem.tables.size(); ++i) {
            std::ostringstream a, b;
            write_csv(a, mem.tables[i].second);
            write_csv(b, disk.tables[i].second);
            EXPECT_EQ(a.str(), b.str()) << mem.tables[i].first;
        }
        ASSERT_EQ(mem.checks.size(), disk.checks.size());
        for (std::size_t i = 0; i < mem.checks.size(); ++i) {
            EXPECT_EQ(mem.checks[i].passed, disk.checks[i].passed);
            EXPECT_EQ(mem.checks[i].detail, disk.checks[i].detail);
        }
    }
}

TEST(Experiments, SmallRunsPassTheirChecks) {
    for (auto cmd : {Command::CompareProtocols, Command::DutyCycle, Command::LocalSched}) {
        const auto c = small(cmd);
        const auto rep = build_report(cmd, run_experiment(cmd, c).trace, c);
        for (const auto& chk : rep.checks) EXPECT_TRUE(chk.passed) << to_string(cmd) << ": " << chk.name << " " << chk.detail;
    }
}

TEST(Experiments, WorstCaseCompareHitsClosedForms) {
    auto c = preset("worst-case-3g");
    c.compare.retrievals = 20;
    c.compare.push_duration = 600.0;
    const auto rep = build_report(Command::CompareProtocols, run_experiment(Command::CompareProtocols, c).trace, c);
    EXPECT_TRUE(rep.all_passed());
    const auto& summary = rep.tables.at(1).second;
    EXPECT_EQ(summary.rows.at(0).at(1).get<double>(), 20.0);
    EXPECT_EQ(summary.rows.at(1).at(1).get<double>(), 38.0);
    EXPECT_EQ(summary.rows.at(2).at(1).get<double>(), 4.5);
}

TEST(Experiments, ZeroLatencyRatiosAreUndefined) {
    auto c = preset("zero-latency");
    c.compare.retrievals = 10;
    c.compare.push_duration = 100.0;
    const auto rep = build_report(Command::CompareProtocols, run_experiment(Command::CompareProtocols, c).trace, c);
    const auto& summary = rep.tables.at(1).second;
    EXPECT_EQ(summary.rows.at(0).at(1).get<double>(), 0.0);
    EXPECT_EQ(summary.rows.at(2).at(1).get<double>(), 0.0);
    EXPECT_TRUE(summary.rows.at(5).at(1).is_null());
    EXPECT_TRUE(summary.rows.at(6).at(1).is_null());
}

TEST(Experiments, LocalTrafficAudit) {
    const auto c = small(Command::LocalSched);
    const auto run = run_experiment(Command::LocalSched, c);
    // Recount straight from the trace: no local-side scheduling traffic after the mode select.
    std::size_t local_selects = 0;
    std::size_t server_sets = 0;
    for (const auto& r : run.trace.records) {
        if (r.label == "local/mode_select") ++local_selects;
        if (r.label == "server/duty_set") ++server_sets;
    }
    EXPECT_EQ(local_selects, 1u);
    EXPECT_GT(server_sets, 0u);
    const auto rep = build_report(Command::LocalSched, run.trace, c);
    EXPECT_TRUE(rep.all_passed());
}

TEST(Replay, IdenticalAndDiverged) {
    const auto c = small(Command::LocalSched);
    const auto file = round_trip(run_experiment(Command::LocalSched, c));
    const auto ok = replay(file);
    EXPECT_TRUE(ok.identical) << ok.reason;
    EXPECT_EQ(ok.replayed_digest, ok.recorded_digest);

    auto edited = file;
    edited.trace.config_digest = "0000000000000000";
    EXPECT_FALSE(replay(edited).identical);

    auto tampered = file;
    tampered.trace.records.at(3).data["tampered"] = true;
    const auto t = replay(tampered);
    EXPECT_FALSE(t.identical);
    EXPECT_NE(t.file_digest, t.recorded_digest);

    auto reseeded = file;
    reseeded.header["config"]["seed"] = c.seed + 5;
    EXPECT_FALSE(replay(reseeded).identical);

    auto headless = file;
    headless.header.erase("command");
    EXPECT_THROW(replay(headless), sim::TraceParseError);
}

TEST(Replay, ReferenceTraceReproduces) {
    std::ifstream in(std::string(PICSIM_TEST_DATA_DIR) + "/reference.trace.jsonl");
    ASSERT_TRUE(in) << "missing reference trace";
    const auto file = sim::read_trace(in);
    const auto v = replay(file);
    EXPECT_TRUE(v.identical) << v.reason;
    std::ifstream digest(std::string(PICSIM_TEST_DATA_DIR) + "/reference.digest");
    std::string expected;
    digest >> expected;
    EXPECT_EQ(v.replayed_digest, expected);
}

TEST(Csv, QuotingAndNulls) {
    Table t{{"a", "b", "c"}, {{"plain", "x,y", nullptr}, {1.5, "say \"hi\"", true}}};
    std::ostringstream out;
    write_csv(out, t);
    EXPECT_EQ(out.str(), "a,b,c\nplain,\"x,y\",\n1.5,\"say \"\"hi\"\"\",true\n");
}
