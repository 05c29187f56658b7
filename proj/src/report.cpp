#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "picsim/control.hpp"
#include "picsim/experiments.hpp"
#include "picsim/proto.hpp"

namespace picsim::cli {

using nlohmann::json;

namespace {

std::string fmt(double v, const char* spec = "%.6g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string cell(const json& v) {
    if (v.is_null()) return "";
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
        return q + "\"";
    }
    return v.dump();
}

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

json ratio(double num, double den) { return den > 0.0 ? json(num / den) : json(nullptr); }

bool within_rel(double value, double reference, double tolerance) {
    if (reference == 0.0) return std::abs(value) <= 1e-9;
    return std::abs(value - reference) <= tolerance * std::abs(reference);
}

template <class Fn>
void for_label(const sim::EventTrace& trace, std::string_view label, Fn fn) {
    for (const auto& r : trace.records) {
        if (r.label == label) fn(r);
    }
}

// ---------------------------------------------------------------------------

Report report_rtt(const sim::EventTrace& trace, const ExperimentConfig& c) {
    struct Samples {
        std::vector<double> rtt, link, at;
    };
    std::map<std::string, Samples> by_target;
    for_label(trace, "rtt", [&](const sim::TraceRecord& r) {
        auto& s = by_target[r.data.at("target").get<std::string>()];
        s.rtt.push_back(r.data.at("rtt").get<double>());
        s.link.push_back(r.data.at("link_time").get<double>());
        s.at.push_back(r.at);
    });

    Report rep;
    Table summary{{"target", "link", "probes", "mean_rtt", "min_rtt", "max_rtt", "max_link_time", "link_hard_max",
                   "modes", "mode_locations"},
                  {}};
    Table daily{{"target", "day", "probes", "mean_rtt", "min_rtt", "max_rtt"}, {}};
    Table hourly{{"target", "hour_of_week", "probes", "mean_rtt"}, {}};
    Table chi{{"target_a", "target_b", "statistic", "dof", "p_value"}, {}};
    std::map<std::string, Histogram> hists;

    const NetworkModels& m = c.models;
    for (const auto& t : c.rtt.targets) {
        const Samples& s = by_target[t.name];
        const LatencyModel& model = m.link(t.link);
        const double hi = m.t_server_cloud + m.t_cloud + model.hard_max() + m.metering.hard_max();
        Histogram h = Histogram::of(s.rtt, 0.0, hi > 0.0 ? hi : 1.0, c.rtt.bins);
        const auto modes = detect_modes(h);
        std::string locs;
        for (double x : modes) locs += (locs.empty() ? "" : ";") + fmt(x, "%.3f");
        const double max_rtt = s.rtt.empty() ? 0.0 : *std::max_element(s.rtt.begin(), s.rtt.end());
        const double min_rtt = s.rtt.empty() ? 0.0 : *std::min_element(s.rtt.begin(), s.rtt.end());
        const double max_link = s.link.empty() ? 0.0 : *std::max_element(s.link.begin(), s.link.end());
        summary.rows.push_back({t.name, std::string(to_string(t.link)), s.rtt.size(), mean(s.rtt), min_rtt, max_rtt,
                                max_link, model.hard_max(), modes.size(), locs});

        std::map<std::size_t, std::vector<double>> days, hours;
        for (std::size_t i = 0; i < s.rtt.size(); ++i) {
            // A probe at exactly midnight closes the previous day.
            const double at = s.at[i] - 1e-9;
            days[static_cast<std::size_t>(std::floor(at / 86400.0)) % 7].push_back(s.rtt[i]);
            hours[DiurnalProfile::hour_of_week(at)].push_back(s.rtt[i]);
        }
        for (const auto& [day, v] : days) {
            daily.rows.push_back({t.name, day, v.size(), mean(v), *std::min_element(v.begin(), v.end()),
                                  *std::max_element(v.begin(), v.end())});
        }
        for (const auto& [hour, v] : hours) hourly.rows.push_back({t.name, hour, v.size(), mean(v)});

        if (t.link == LinkKind::ThreeG) {
            rep.checks.push_back({"modes " + t.name, modes.size() >= c.rtt.min_modes,
                                  std::to_string(modes.size()) + " modes at " + locs});
            rep.checks.push_back({"max link time " + t.name, max_link <= model.hard_max(),
                                  fmt(max_link) + " s <= " + fmt(model.hard_max()) + " s"});
        }
        if (t.link == LinkKind::Ethernet) {
            const auto near = std::count_if(s.rtt.begin(), s.rtt.end(), [&](double x) {
                return std::abs(x - c.rtt.ethernet_center) <= c.rtt.ethernet_band;
            });
            const double frac = s.rtt.empty() ? 0.0 : static_cast<double>(near) / static_cast<double>(s.rtt.size());
            rep.checks.push_back({"ethernet floor " + t.name, frac >= c.rtt.ethernet_fraction,
                                  fmt(100.0 * frac, "%.2f") + "% within " + fmt(c.rtt.ethernet_center) + " +/- " +
                                      fmt(c.rtt.ethernet_band) + " s"});
        }
        rep.checks.push_back({"probe count " + t.name, s.rtt.size() == c.rtt.probes,
                              std::to_string(s.rtt.size()) + " probes"});
        hists.emplace(t.name, h);
        rep.histograms.emplace_back("rtt_" + t.name, h);
    }

    // Targets sharing one link model should be statistically indistinguishable.
    for (std::size_t a = 0; a < c.rtt.targets.size(); ++a) {
        for (std::size_t b = a + 1; b < c.rtt.targets.size(); ++b) {
            const auto& ta = c.rtt.targets[a];
            const auto& tb = c.rtt.targets[b];
            if (ta.link != tb.link) continue;
            const auto r = chi_square_homogeneity(hists.at(ta.name), hists.at(tb.name));
            chi.rows.push_back({ta.name, tb.name, r.statistic, r.dof, r.p_value});
            rep.checks.push_back({"homogeneity " + ta.name + " vs " + tb.name, r.p_value >= 1e-3,
                                  "chi2 " + fmt(r.statistic) + ", dof " + std::to_string(r.dof) + ", p " +
                                      fmt(r.p_value)});
        }
    }
    rep.tables = {{"rtt_summary", summary}, {"rtt_daily", daily}, {"rtt_hourly", hourly}, {"rtt_chi_square", chi}};
    rep.summary["targets"] = json::array();
    for (const auto& row : summary.rows) {
        rep.summary["targets"].push_back({{"target", row[0]}, {"mean_rtt", row[3]}, {"max_rtt", row[5]},
                                          {"modes", row[8]}});
    }
    return rep;
}

// ---------------------------------------------------------------------------

Report report_compare(const sim::EventTrace& trace, const ExperimentConfig& c) {
    Report rep;
    Table rows{{"i", "time", "legacy_power", "legacy_full", "pull", "push", "savings", "analytic_savings",
                "legacy_power_requests", "legacy_full_requests", "pull_requests", "staleness_legacy",
                "staleness_pull", "staleness_push"},
               {}};
    std::vector<double> lp, lf, pull, push, sav, an;
    std::size_t pull_failed = 0;
    std::size_t timeouts = 0;
    for_label(trace, "retrieval", [&](const sim::TraceRecord& r) {
        const json& d = r.data;
        rows.rows.push_back({d.at("i"), r.at, d.at("legacy_power"), d.at("legacy_full"), d.at("pull"), d.at("push"),
                             d.at("savings"), d.at("analytic_savings"), d.at("legacy_power_requests"),
                             d.at("legacy_full_requests"), d.at("pull_requests"), d.at("staleness_legacy"),
                             d.at("staleness_pull"), d.at("staleness_push")});
        lp.push_back(d.at("legacy_power").get<double>());
        lf.push_back(d.at("legacy_full").get<double>());
        pull.push_back(d.at("pull").get<double>());
        push.push_back(d.at("push").get<double>());
        sav.push_back(d.at("savings").get<double>());
        an.push_back(d.at("analytic_savings").get<double>());
        pull_failed += d.at("pull_failed").get<bool>() ? 1 : 0;
        timeouts += d.at("legacy_timeouts").get<std::size_t>();
    });

    Table stale{{"time", "meter", "staleness", "bound"}, {}};
    std::size_t probes = 0;
    std::size_t violations = 0;
    double worst = 0.0;
    double bound = 0.0;
    for_label(trace, "push/probe", [&](const sim::TraceRecord& r) {
        ++probes;
        bound = r.data.at("bound").get<double>();
        const auto& values = r.data.at("staleness");
        const std::size_t meters = r.data.at("meters").get<std::size_t>();
        for (std::size_t k = 0; k < meters; ++k) {
            const json v = k < values.size() ? values[k] : json(nullptr);
            stale.rows.push_back({r.at, k, v, bound});
            if (v.is_null() || v.get<double>() > bound) {
                ++violations;
            } else {
                worst = std::max(worst, v.get<double>());
            }
        }
    });

    const std::size_t n = c.stations.front().options.meters;
    const TimingBudget b = c.equation_budget();
    const double m_lp = mean(lp), m_lf = mean(lf), m_pull = mean(pull), m_push = mean(push);
    const double m_sav = mean(sav), m_an = mean(an);
    Table summary{{"metric", "empirical_mean", "closed_form"}, {}};
    summary.rows.push_back({"legacy_power_only", m_lp, proto::legacy_retrieval_time(b, n, false)});
    summary.rows.push_back({"legacy_with_status", m_lf, proto::legacy_retrieval_time(b, n, true)});
    summary.rows.push_back({"pic_pull", m_pull, proto::pic_pull_time(b)});
    summary.rows.push_back({"push_cycle", m_push, proto::push_cycle_time(b, n)});
    summary.rows.push_back({"savings", m_sav, m_an});
    summary.rows.push_back({"speedup_power", ratio(m_lp, m_pull), ratio(proto::legacy_retrieval_time(b, n, false),
                                                                        proto::pic_pull_time(b))});
    summary.rows.push_back({"speedup_full", ratio(m_lf, m_pull), ratio(proto::legacy_retrieval_time(b, n, true),
                                                                       proto::pic_pull_time(b))});
    summary.rows.push_back({"t_save_worst_case", nullptr, proto::t_save(b)});
    summary.rows.push_back({"staleness_max", worst, bound});
    rep.tables = {{"retrievals", rows}, {"compare_summary", summary}, {"staleness", stale}};

    rep.checks.push_back({"retrievals recorded", lp.size() == c.compare.retrievals, std::to_string(lp.size())});
    rep.checks.push_back({"savings vs analytic", within_rel(m_sav, m_an, c.compare.savings_tolerance),
                          "empirical " + fmt(m_sav) + " s, analytic " + fmt(m_an) + " s"});
    rep.checks.push_back({"no failed requests", pull_failed == 0 && timeouts == 0,
                          std::to_string(pull_failed) + " failed pulls, " + std::to_string(timeouts) + " timeouts"});
    rep.checks.push_back({"push staleness bound", probes > 0 && violations == 0,
                          std::to_string(violations) + " violations over " + std::to_string(probes) +
                              " probes; max " + fmt(worst) + " s <= " + fmt(bound) + " s"});
    if (c.budget) {
        const auto exact = [&](const char* name, double got, double want) {
            rep.checks.push_back({name, std::abs(got - want) <= 1e-9, fmt(got, "%.9g") + " s vs " + fmt(want, "%.9g") + " s"});
        };
        exact("legacy power-only closed form", m_lp, proto::legacy_retrieval_time(b, n, false));
        exact("legacy with status closed form", m_lf, proto::legacy_retrieval_time(b, n, true));
        exact("push cycle closed form", m_push, proto::push_cycle_time(b, n));
        if (c.pic.serve_cache) exact("pic pull closed form", m_pull, proto::pic_pull_time(b));
    }
    const auto expect = [&](const char* name, const std::optional<double>& want, double num) {
        if (!want) return;
        const json r = ratio(num, m_pull);
        const bool ok = r.is_number() && within_rel(r.get<double>(), *want, c.compare.speedup_tolerance);
        rep.checks.push_back({name, ok, (r.is_number() ? fmt(r.get<double>(), "%.4g") : std::string("undefined")) +
                                            "x vs " + fmt(*want) + "x +/- " + fmt(100 * c.compare.speedup_tolerance) + "%"});
    };
    expect("speedup power-only", c.compare.expected_speedup_power, m_lp);
    expect("speedup with status", c.compare.expected_speedup_full, m_lf);

    rep.summary = {{"legacy_power_only", m_lp},  {"legacy_with_status", m_lf}, {"pic_pull", m_pull},
                   {"push_cycle", m_push},       {"savings", m_sav},           {"analytic_savings", m_an},
                   {"speedup_power", ratio(m_lp, m_pull)}, {"speedup_full", ratio(m_lf, m_pull)},
                   {"staleness_max", worst},     {"staleness_bound", bound}};
    return rep;
}

// ---------------------------------------------------------------------------

Report report_duty(const sim::EventTrace& trace, const ExperimentConfig& c) {
    Report rep;
    Table rows{{"sweep", "i_init", "target", "delta", "i_final", "t_ev", "mode", "t_waiting", "outcome", "reads",
                "measured", "latency", "messages"},
               {}};
    std::size_t step_points = 0, step_confirmed = 0, wait_violations = 0;
    std::vector<double> rand_adaptive, rand_fixed, rand_lat_adaptive, rand_lat_fixed;
    double max_adaptive_wait = 0.0, fixed_wait = 0.0;
    for (const auto& r : trace.records) {
        if (r.label != "duty/step" && r.label != "duty/random") continue;
        const json& d = r.data;
        const bool step = d.at("sweep") == "step";
        const json& a = d.at("adaptive");
        const json& f = d.at("fixed");
        for (const auto* mode : {"adaptive", "fixed"}) {
            const json& x = d.at(mode);
            rows.rows.push_back({d.at("sweep"), d.at("i_init"), d.at("target"),
                                 d.at("target").get<double>() - d.at("i_init").get<double>(), d.at("i_final"),
                                 d.at("t_ev"), mode, x.at("t_waiting"), x.at("outcome"), x.at("reads"),
                                 x.at("measured"), x.at("latency"), x.at("messages")});
        }
        const double wa = a.at("t_waiting").get<double>();
        const double wf = f.at("t_waiting").get<double>();
        if (wa > wf + 1e-12) ++wait_violations;
        if (step) {
            ++step_points;
            step_confirmed += a.at("outcome") == "confirmed" ? 1 : 0;
            max_adaptive_wait = std::max(max_adaptive_wait, wa);
            fixed_wait = wf;
        } else {
            rand_adaptive.push_back(wa);
            rand_fixed.push_back(wf);
            rand_lat_adaptive.push_back(a.at("latency").get<double>());
            rand_lat_fixed.push_back(f.at("latency").get<double>());
        }
    }
    rep.tables = {{"duty_cycle", rows}};
    rep.checks.push_back({"step sweep confirmed", step_points > 0 && step_confirmed == step_points,
                          std::to_string(step_confirmed) + "/" + std::to_string(step_points) + " confirmed"});
    rep.checks.push_back({"adaptive wait <= fixed wait", wait_violations == 0,
                          "max adaptive " + fmt(max_adaptive_wait) + " s, fixed " + fmt(fixed_wait) + " s"});
    if (!rand_adaptive.empty()) {
        rep.checks.push_back({"random sweep adaptive mean < fixed mean", mean(rand_adaptive) < mean(rand_fixed),
                              fmt(mean(rand_adaptive)) + " s vs " + fmt(mean(rand_fixed)) + " s"});
    }
    rep.summary = {{"fixed_wait", fixed_wait},
                   {"max_adaptive_wait", max_adaptive_wait},
                   {"step_points", step_points},
                   {"step_confirmed", step_confirmed},
                   {"random_mean_wait_adaptive", mean(rand_adaptive)},
                   {"random_mean_wait_fixed", mean(rand_fixed)},
                   {"random_mean_latency_adaptive", mean(rand_lat_adaptive)},
                   {"random_mean_latency_fixed", mean(rand_lat_fixed)}};
    (void)c;
    return rep;
}

// ---------------------------------------------------------------------------

Report report_local(const sim::EventTrace& trace, const ExperimentConfig& c) {
    Report rep;
    const double limit = c.stations.front().options.circuit_limit;
    std::size_t server_messages = 0, slot_changes = 0, local_sched_messages = 0, mode_selects = 0;
    std::size_t local_boundaries = 0, violations = 0, audited = 0;
    double max_server = 0.0, max_local = 0.0;
    Table alloc{{"time", "run", "allocation", "total"}, {}};

    for (const auto& r : trace.records) {
        const json& d = r.data;
        if (d.contains("violation")) ++violations;
        if (d.contains("server_total")) {
            ++audited;
            const double s = d.at("server_total").get<double>();
            const double l = d.at("local_total").get<double>();
            max_server = std::max(max_server, s);
            max_local = std::max(max_local, l);
            if (s > limit + 1e-9 || l > limit + 1e-9) ++violations;
        }
        if (r.label == "server/duty_set") ++server_messages;
        if (r.label.starts_with("local/") && d.contains("duty_percent")) ++local_sched_messages;
        if (r.label == "local/mode_select") mode_selects += d.at("delivered").get<bool>() ? 1 : 0;
        if (r.label == "server/slot" && d.at("changes").get<std::size_t>() > 0) ++slot_changes;
        const bool server_slot = r.label == "server/slot";
        if (server_slot || r.label == "local/boundary") {
            if (!server_slot) ++local_boundaries;
            const json& a = d.at("allocation");
            std::string text;
            double total = 0.0;
            if (a.is_array()) {
                for (const auto& x : a) {
                    text += (text.empty() ? "" : ";") + fmt(x.get<double>());
                    total += x.get<double>();
                }
            }
            alloc.rows.push_back({r.at, server_slot ? "server" : "local", text, a.is_array() ? json(total) : json(nullptr)});
        }
    }
    Table traffic{{"run", "scheduling_messages", "mode_selections", "slot_changes", "max_total", "circuit_limit"}, {}};
    traffic.rows.push_back({"server", server_messages, 0, slot_changes, max_server, limit});
    traffic.rows.push_back({"local", local_sched_messages, mode_selects, nullptr, max_local, limit});
    rep.tables = {{"local_sched_traffic", traffic}, {"local_sched_allocations", alloc}};

    rep.checks.push_back({"local mode sends no scheduling messages", local_sched_messages == 0 && mode_selects == 1,
                          std::to_string(local_sched_messages) + " messages after " + std::to_string(mode_selects) +
                              " mode selection"});
    rep.checks.push_back({"server sends >= 1 message per slot change", server_messages >= slot_changes,
                          std::to_string(server_messages) + " messages for " + std::to_string(slot_changes) +
                              " slot changes"});
    rep.checks.push_back({"circuit limit respected", violations == 0 && audited > 0,
                          std::to_string(violations) + " violations over " + std::to_string(audited) +
                              " audited events"});
    rep.summary = {{"server_messages", server_messages}, {"slot_changes", slot_changes},
                   {"local_messages", local_sched_messages}, {"local_boundaries", local_boundaries},
                   {"max_server_total", max_server},   {"max_local_total", max_local},
                   {"violations", violations}};
    return rep;
}

}  // namespace

void write_csv(std::ostream& out, const Table& table) {
    for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << cell(row[i]);
        out << '\n';
    }
}

bool Report::all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

Report build_report(Command command, const sim::EventTrace& trace, const ExperimentConfig& config) {
    Report rep;
    switch (command) {
        case Command::RttDist: rep = report_rtt(trace, config); break;
        case Command::CompareProtocols: rep = report_compare(trace, config); break;
        case Command::DutyCycle: rep = report_duty(trace, config); break;
        case Command::LocalSched: rep = report_local(trace, config); break;
    }
    rep.checks.insert(rep.checks.begin(), Check{"run completed", !trace.failed,
                                                trace.failed ? trace.failure : std::string("no failure record")});
    return rep;
}

ReplayVerdict replay(const sim::TraceFile& file) {
    ReplayVerdict v;
    v.recorded_digest = file.recorded_digest;
    v.file_digest = file.trace.digest_hex();

    const auto cmd_it = file.header.find("command");
    const auto cfg_it = file.header.find("config");
    if (cmd_it == file.header.end() || !cmd_it->is_string() || cfg_it == file.header.end()) {
        throw sim::TraceParseError(1, "header lacks command or config");
    }
    const auto command = parse_command(cmd_it->get<std::string>());
    if (!command) throw sim::TraceParseError(1, "unknown command " + cmd_it->get<std::string>());
    const ExperimentConfig config = config_from_json(*cfg_it);

    const RunResult rerun = run_experiment(*command, config);
    v.replayed_digest = rerun.trace.digest_hex();

    if (config_digest(config) != file.trace.config_digest) {
        v.reason = "config digest in the header does not match the embedded config";
    } else if (config.seed != file.trace.seed) {
        v.reason = "seed in the header does not match the embedded config";
    } else if (v.file_digest != v.recorded_digest) {
        v.reason = "trace records do not match the recorded digest";
    } else if (v.replayed_digest != v.recorded_digest) {
        v.reason = "re-run produced a different digest";
    } else {
        v.identical = true;
        v.reason = "identical";
    }
    return v;
}

}  // namespace picsim::cli
