#include "picsim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "picsim/control.hpp"
#include "picsim/pic_fw.hpp"
#include "picsim/proto.hpp"
#include "picsim/sched.hpp"
#include "picsim/store.hpp"

namespace picsim::cli {

using nlohmann::json;
using sim::EventKind;

std::string_view to_string(Command command) {
    switch (command) {
        case Command::RttDist: return "rtt-dist";
        case Command::CompareProtocols: return "compare-protocols";
        case Command::DutyCycle: return "duty-cycle";
        case Command::LocalSched: return "local-sched";
    }
    return "?";
}

std::optional<Command> parse_command(std::string_view text) {
    for (Command c : {Command::RttDist, Command::CompareProtocols, Command::DutyCycle, Command::LocalSched}) {
        if (to_string(c) == text) return c;
    }
    return std::nullopt;
}

namespace {

json opt(const std::optional<Seconds>& v) { return v ? json(*v) : json(nullptr); }

json max_staleness(const std::vector<std::optional<Seconds>>& values) {
    std::optional<Seconds> worst;
    for (const auto& v : values) {
        if (v && (!worst || *v > *worst)) worst = v;
    }
    return opt(worst);
}

const EvSpec* ev_for_outlet(const StationSpec& spec, std::size_t outlet) {
    for (const auto& e : spec.evs) {
        if (e.outlet == outlet) return &e;
    }
    return nullptr;
}

void plug_ev(ChargingStation& st, const EvSpec& e, Seconds now, bool allocate) {
    st.plug(e.outlet, e.ev, now);
    st.set_settle_scale(e.outlet, e.settle_scale);
    if (allocate && e.initial_current > 0.0) {
        st.set_allocation(e.outlet, e.initial_current, now);
        st.apply_relay(e.outlet, RelayState::On, now);
    }
}

void unplug_ev(ChargingStation& st, std::size_t outlet, Seconds now, bool allocate) {
    if (!st.plugged(outlet)) return;
    st.unplug(outlet, now);
    if (allocate) {
        st.apply_relay(outlet, RelayState::Off, now);
        st.set_allocation(outlet, 0.0, now);
    }
}

/// Apply EVs plugged at t = 0 directly and schedule every later plug and
/// unplug as an event on all `stations`.
void schedule_ev_events(sim::Engine& engine, const StationSpec& spec, std::vector<ChargingStation*> stations,
                        bool allocate) {
    for (const auto& e : spec.evs) {
        if (e.plug_at == 0.0) {
            for (auto* st : stations) plug_ev(*st, e, 0.0, allocate);
        } else {
            engine.schedule_at(e.plug_at, EventKind::PlugChange, "plug", [&e, stations, allocate](sim::Engine& en) {
                for (auto* st : stations) plug_ev(*st, e, en.now(), allocate);
                en.note({{"outlet", e.outlet}, {"plugged", true}});
            });
        }
        if (e.unplug_at) {
            engine.schedule_at(*e.unplug_at, EventKind::PlugChange, "plug", [&e, stations, allocate](sim::Engine& en) {
                for (auto* st : stations) unplug_ev(*st, e.outlet, en.now(), allocate);
                en.note({{"outlet", e.outlet}, {"plugged", false}});
            });
        }
    }
}

// ---------------------------------------------------------------------------

void run_rtt(const ExperimentConfig& c, sim::Engine& engine) {
    struct Target {
        const RttTarget* spec;
        sim::RandomStream link;
        sim::RandomStream metering;
    };
    std::vector<Target> targets;
    for (const auto& t : c.rtt.targets) {
        targets.push_back({&t, engine.stream("rtt/" + t.name + "/link"), engine.stream("rtt/" + t.name + "/metering")});
    }
    const NetworkModels& m = c.models;
    for (std::size_t k = 1; k <= c.rtt.probes; ++k) {
        for (auto& t : targets) {
            engine.schedule_at(static_cast<double>(k) * c.rtt.interval, EventKind::Probe, "rtt",
                               [&t, &m](sim::Engine& en) {
                                   const Seconds link = m.link(t.spec->link).sample(t.link, en.now());
                                   const Seconds meter = m.metering.sample(t.metering, en.now());
                                   en.note({{"target", t.spec->name},
                                            {"link", std::string(to_string(t.spec->link))},
                                            {"link_time", link},
                                            {"metering", meter},
                                            {"rtt", m.t_server_cloud + m.t_cloud + link + meter}});
                               });
        }
    }
    engine.run_until(static_cast<double>(c.rtt.probes) * c.rtt.interval);
}

// ---------------------------------------------------------------------------

void run_compare(const ExperimentConfig& c, sim::Engine& engine) {
    const StationSpec& spec = c.stations.front();
    const NetworkModels& models = c.models;
    const LinkKind link = spec.options.link;
    const std::uint64_t seed = c.seed;

    ChargingStation station(0, spec.options);
    schedule_ev_events(engine, spec, {&station}, true);
    control::ServerStore store;
    store.set_protocol(station.id(), c.protocol);

    pic::StationMeterBus bus_cmp(station, models, engine.stream("compare/local_bus"), engine.stream("compare/metering"));
    pic::PicState pic_cmp = pic::startup_init(station.id(), bus_cmp, c.pic);
    pic::StationMeterBus bus_push(station, models, engine.stream("push/local_bus"), engine.stream("push/metering"));
    pic::PicState pic_push = pic::startup_init(station.id(), bus_push, c.pic);
    for (std::size_t slot : spec.dead_meters) {
        bus_cmp.kill(slot);
        bus_push.kill(slot);
    }
    pic::collect_all(pic_cmp, bus_cmp, 0.0);  // warm cache

    // Paired retrievals: every protocol starts at the same instant on the
    // same per-retrieval substreams.
    std::size_t next_retrieval = 0;
    std::function<void(sim::Engine&)> retrieval = [&](sim::Engine& en) {
        const std::size_t i = next_retrieval++;
        const Seconds t = en.now();
        const std::string prefix = "retrieval/" + std::to_string(i);
        const auto base = proto::RetrievalStreams::derive(seed, prefix);

        auto s_power = base;
        const auto power = proto::legacy_pull(station, models, s_power, t, {.include_status = false});
        auto s_full = base;
        const auto full = proto::legacy_pull(station, models, s_full, t, {.include_status = true});

        bus_cmp.set_streams(sim::RandomStream::derive(seed, prefix + "/pull_bus"), base.metering);
        sim::RandomStream pull_net = base.network;
        const auto pull = proto::pic_pull(pic_cmp, bus_cmp, models, link, pull_net, t, {.first_seq = i + 1});

        bus_cmp.set_streams(sim::RandomStream::derive(seed, prefix + "/local_bus"), base.metering);
        pic::on_timer_interrupt(pic_cmp);
        const auto step = pic::main_loop_step(pic_cmp, bus_cmp, t);
        sim::RandomStream up_net = base.network;
        const Seconds uplink = 0.5 * network_time(models, link, up_net, t);
        const Seconds push = step.duration + uplink;
        std::vector<std::optional<Seconds>> push_stale;
        for (const auto& r : pic_cmp.cache) {
            push_stale.push_back(r.snapshot ? std::optional<Seconds>(t + push - r.snapshot->captured_at) : std::nullopt);
        }

        const Seconds mean_net = models.t_server_cloud + models.t_cloud + models.link(link).mean(t);
        const Seconds analytic = 3.5 * mean_net - 4.0 * models.local_bus.mean(t);
        en.note({{"i", i},
                 {"legacy_power", power.wall_time},
                 {"legacy_power_requests", power.request_count},
                 {"legacy_full", full.wall_time},
                 {"legacy_full_requests", full.request_count},
                 {"legacy_timeouts", power.timeouts + full.timeouts},
                 {"pull", pull.wall_time},
                 {"pull_requests", pull.request_count},
                 {"pull_failed", pull.failed},
                 {"push", push},
                 {"push_collect", step.duration},
                 {"savings", power.wall_time - push},
                 {"analytic_savings", analytic},
                 {"staleness_legacy", max_staleness(power.staleness)},
                 {"staleness_pull", max_staleness(pull.staleness)},
                 {"staleness_push", max_staleness(push_stale)}});
        if (next_retrieval < c.compare.retrievals) {
            en.schedule(c.compare.interval, EventKind::Probe, "retrieval", retrieval);
        }
    };
    engine.schedule_at(0.0, EventKind::Probe, "retrieval", retrieval);

    // Push-mode run: timer ticks set the flag, the main loop collects and
    // pushes, packets are consumed on arrival, probes sample staleness.
    const TimingBudget worst = models.worst_case();
    const Seconds link_up = 0.5 * (models.link(link).hard_max() + models.t_server_cloud + models.t_cloud);
    const double meters = static_cast<double>(station.meter_count());
    const Seconds bound = c.pic.push_period + meters * (worst.t_ethernet + worst.t_metering) + link_up;
    const Seconds end = c.compare.push_duration;
    sim::RandomStream uplink_rng = engine.stream("push/uplink");
    bool loop_pending = false;
    Seconds busy_until = 0.0;

    std::function<void(sim::Engine&)> main_loop = [&](sim::Engine& en) {
        loop_pending = false;
        auto step = pic::main_loop_step(pic_push, bus_push, en.now());
        busy_until = en.now() + step.duration;
        std::size_t packets = 0;
        for (auto& msg : step.messages) {
            if (msg.kind != proto::MessageKind::AggregatePacket) continue;
            msg.received_at = msg.sent_at + 0.5 * network_time(models, link, uplink_rng, msg.sent_at);
            ++packets;
            en.schedule_at(msg.received_at, EventKind::MessageDelivery, "push/delivery",
                           [&store, msg](sim::Engine& e2) {
                               const auto r = proto::push_consume(store, msg, e2.now());
                               e2.note({{"seq", msg.seq}, {"accepted", r.accepted},
                                        {"staleness_max", max_staleness(r.staleness)}});
                           });
        }
        en.note({{"duration", step.duration}, {"collections", step.collections}, {"packets", packets}});
    };
    std::function<void(sim::Engine&)> tick = [&](sim::Engine& en) {
        pic::on_timer_interrupt(pic_push);
        if (!loop_pending) {
            loop_pending = true;
            en.schedule_at(std::max(en.now(), busy_until), EventKind::Interrupt, "push/main_loop", main_loop);
        }
        if (en.now() + c.pic.push_period <= end) en.schedule(c.pic.push_period, EventKind::TimerTick, "push/timer", tick);
    };
    std::function<void(sim::Engine&)> probe = [&](sim::Engine& en) {
        json values = json::array();
        if (const auto rec = store.find(station.id())) {
            for (const auto& s : proto::staleness_at(*rec, en.now())) values.push_back(opt(s));
        }
        en.note({{"staleness", std::move(values)}, {"bound", bound}, {"meters", station.meter_count()}});
        if (en.now() + c.compare.probe_interval <= end) {
            en.schedule(c.compare.probe_interval, EventKind::Probe, "push/probe", probe);
        }
    };
    if (c.pic.push_period <= end) engine.schedule_at(c.pic.push_period, EventKind::TimerTick, "push/timer", tick);
    if (c.compare.probe_interval <= end) {
        engine.schedule_at(c.compare.probe_interval, EventKind::Probe, "push/probe", probe);
    }

    const Seconds last_retrieval = static_cast<double>(c.compare.retrievals - 1) * c.compare.interval;
    engine.run_until(std::max(last_retrieval, end));
}

// ---------------------------------------------------------------------------

void run_duty(const ExperimentConfig& c, sim::Engine& engine) {
    const StationSpec& spec = c.stations.front();
    const std::size_t outlet = c.duty.outlet;
    EvSpec ev;
    ev.outlet = outlet;
    if (const EvSpec* configured = ev_for_outlet(spec, outlet)) ev = *configured;
    const TimingBudget budget = c.equation_budget();

    struct Point {
        std::string sweep;
        Amperes i_init;
        Amperes target;
    };
    std::vector<Point> points;
    for (std::size_t k = 0;; ++k) {
        const Amperes delta = static_cast<double>(k) * c.duty.step_increment;
        if (delta > c.duty.step_max + 1e-9) break;
        points.push_back({"step", c.duty.i_init, c.duty.i_init + delta});
    }
    sim::RandomStream pick = engine.stream("duty/random");
    const Amperes lo = control::duty_to_current(control::kMinPilotDuty);
    const Amperes hi = std::min(control::duty_to_current(control::kMaxPilotDuty), ev.ev.max_current);
    for (std::size_t j = 0; j < c.duty.random_points; ++j) {
        const Amperes a = pick.uniform(lo, hi);
        const Amperes b = pick.uniform(lo, hi);
        points.push_back({"random", a, b});
    }

    constexpr Seconds kLead = 60.0;  // settle time before each change
    for (std::size_t idx = 0; idx < points.size(); ++idx) {
        const Seconds at = kLead + static_cast<double>(idx) * c.duty.spacing;
        engine.schedule_at(at, EventKind::Control, "duty/" + points[idx].sweep, [&, idx](sim::Engine& en) {
            const Point& p = points[idx];
            const auto rng = en.stream("duty/point/" + std::to_string(idx));
            control::DutyCycleChange last;
            const auto run = [&](bool adaptive) {
                ChargingStation st(0, spec.options);
                const Seconds t0 = en.now() - kLead;
                st.plug(outlet, ev.ev, t0);
                st.set_settle_scale(outlet, ev.settle_scale);
                st.set_allocation(outlet, p.i_init, t0);
                st.apply_relay(outlet, RelayState::On, t0);
                control::ServerStore store;
                sim::RandomStream r = rng;
                last = control::change_duty_cycle(store, st, outlet, control::current_to_duty(p.target), c.models,
                                                  budget, r, en.now(), {.adaptive = adaptive});
                return json{{"t_waiting", last.t_waiting},
                            {"outcome", std::string(control::to_string(last.outcome))},
                            {"reads", last.reads},
                            {"measured", last.measured},
                            {"latency", last.total_latency},
                            {"messages", last.messages.size()}};
            };
            json adaptive = run(true);
            json fixed = run(false);
            en.note({{"sweep", p.sweep},
                     {"i_init", last.i_init},
                     {"target", p.target},
                     {"i_final", last.i_final},
                     {"t_ev", last.t_ev},
                     {"adaptive", std::move(adaptive)},
                     {"fixed", std::move(fixed)}});
        });
    }
    engine.run_until(kLead + static_cast<double>(points.size()) * c.duty.spacing);
}

// ---------------------------------------------------------------------------

void run_local(const ExperimentConfig& c, sim::Engine& engine) {
    const StationSpec& spec = c.stations.front();
    const NetworkModels& models = c.models;
    const std::size_t n = spec.options.meters;
    const Seconds duration = c.local.duration;
    const AlgorithmMode mode = c.local.mode;

    ChargingStation srv(0, spec.options);
    ChargingStation loc(0, spec.options);
    srv.set_local_algorithm(AlgorithmMode::None);
    loc.set_local_algorithm(AlgorithmMode::None);
    sched::LocalController controller(c.round_robin, c.schedule, AlgorithmMode::None);
    control::ServerStore store_srv;
    control::ServerStore store_loc;
    sim::RandomStream srv_net = engine.stream("local/server_network");
    sim::RandomStream loc_net = engine.stream("local/mode_network");

    const auto audit = [&](sim::Engine& en) {
        en.note({{"server_total", srv.allocated_current_total()}, {"local_total", loc.allocated_current_total()}});
    };

    schedule_ev_events(engine, spec, {&srv, &loc}, false);
    sim::RandomStream plugs = engine.stream("local/plugs");
    for (std::size_t k = 0; k < c.local.random_plug_events; ++k) {
        const Seconds at = plugs.uniform(0.0, duration);
        const std::size_t outlet = plugs.index(n);
        engine.schedule_at(at, EventKind::PlugChange, "plug", [&, outlet](sim::Engine& en) {
            const bool now_plugged = !srv.plugged(outlet);
            for (auto* st : {&srv, &loc}) {
                if (now_plugged) {
                    st->plug(outlet, EvModel{.plugged = true}, en.now());
                } else {
                    st->unplug(outlet, en.now());
                }
            }
            en.note({{"outlet", outlet}, {"plugged", now_plugged}});
            audit(en);
        });
    }

    const auto allocate = [&](const std::set<std::size_t>& plugged, Seconds now) -> std::optional<sched::Allocation> {
        switch (mode) {
            case AlgorithmMode::RoundRobin: return sched::round_robin_step(c.round_robin, plugged, n, now);
            case AlgorithmMode::ScheduleTime: return sched::schedule_time_step(c.schedule, plugged, n, now);
            case AlgorithmMode::None: break;
        }
        return std::nullopt;
    };

    // Server-driven: the server runs the algorithm and sends one DutyCycleSet
    // per changed outlet, decreases first, increases once those are acked.
    sched::Allocation commanded(n, 0.0);
    const auto send = [&](sim::Engine& en, std::size_t outlet, Amperes amps) {
        const Seconds net = network_time(models, spec.options.link, srv_net, en.now());
        const double duty = amps == 0.0 ? 0.0 : control::current_to_duty(amps);
        en.schedule(0.5 * net, EventKind::MessageDelivery, "server/duty_set",
                    [&, outlet, amps, duty](sim::Engine& e2) {
                        try {
                            if (amps == 0.0) {
                                srv.apply_relay(outlet, RelayState::Off, e2.now());
                                srv.set_allocation(outlet, 0.0, e2.now());
                            } else {
                                srv.set_allocation(outlet, amps, e2.now());
                                if (srv.relay(outlet) == RelayState::Off) srv.apply_relay(outlet, RelayState::On, e2.now());
                            }
                        } catch (const CircuitLimitError& err) {
                            e2.note({{"violation", err.what()}});
                        }
                        e2.note({{"outlet", outlet}, {"amps", amps}, {"duty_percent", duty}});
                        audit(e2);
                    });
        return en.now() + net;
    };
    std::size_t slot = 0;
    std::function<void(sim::Engine&)> server_slot = [&](sim::Engine& en) {
        const auto alloc = allocate(sched::plugged_outlets(srv), en.now());
        std::size_t changes = 0;
        if (alloc) {
            Seconds acked = en.now();
            std::vector<std::size_t> increases;
            for (std::size_t o = 0; o < n; ++o) {
                if ((*alloc)[o] < commanded[o]) {
                    acked = std::max(acked, send(en, o, (*alloc)[o]));
                    ++changes;
                } else if ((*alloc)[o] > commanded[o]) {
                    increases.push_back(o);
                    ++changes;
                }
            }
            if (!increases.empty()) {
                const sched::Allocation target = *alloc;
                en.schedule_at(acked, EventKind::Control, "server/increase", [&, increases, target](sim::Engine& e2) {
                    for (std::size_t o : increases) send(e2, o, target[o]);
                    audit(e2);
                });
            }
            commanded = *alloc;
        }
        en.note({{"slot", slot}, {"changes", changes}, {"allocation", alloc ? json(*alloc) : json(nullptr)}});
        audit(en);
        ++slot;
        const Seconds next = static_cast<double>(slot) * c.round_robin.slot_length;
        if (next < duration) en.schedule_at(next, EventKind::Control, "server/slot", server_slot);
    };
    engine.schedule_at(0.0, EventKind::Control, "server/slot", server_slot);

    // Local: one ModeSelect, then the station allocates on its own.
    std::function<void(sim::Engine&)> boundary = [&](sim::Engine& en) {
        std::optional<sched::Allocation> alloc;
        try {
            alloc = controller.on_boundary(loc, en.now());
        } catch (const CircuitLimitError& err) {
            en.note({{"violation", err.what()}});
        }
        en.note({{"mode", std::string(to_string(controller.mode()))}, {"allocation", alloc ? json(*alloc) : json(nullptr)}});
        audit(en);
        const Seconds next = controller.next_boundary(en.now());
        if (next < duration) en.schedule_at(next, EventKind::Control, "local/boundary", boundary);
    };
    engine.schedule_at(0.0, EventKind::Control, "local/mode_select", [&](sim::Engine& en) {
        const auto sel = control::select_algorithm_mode(store_loc, loc, controller, mode, models, loc_net, en.now());
        en.note({{"mode", std::string(to_string(mode))},
                 {"delivered", sel.delivered},
                 {"delivered_at", sel.delivered_at},
                 {"effective_at", sel.effective_at},
                 {"messages", sel.messages.size()}});
        if (sel.delivered && sel.effective_at < duration) {
            en.schedule_at(sel.effective_at, EventKind::Control, "local/boundary", boundary);
        }
    });

    engine.run_until(duration);
}

}  // namespace

RunResult run_experiment(Command command, const ExperimentConfig& config) {
    validate(config);
    sim::Engine engine(config.seed, config_digest(config));
    switch (command) {
        case Command::RttDist: run_rtt(config, engine); break;
        case Command::CompareProtocols: run_compare(config, engine); break;
        case Command::DutyCycle: run_duty(config, engine); break;
        case Command::LocalSched: run_local(config, engine); break;
    }
    RunResult r;
    r.trace = engine.trace();
    r.header = json{{"command", std::string(to_string(command))}, {"config", to_json(config)}};
    return r;
}

}  // namespace picsim::cli
