#include "picsim/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "picsim/control.hpp"

namespace picsim::cli {

using nlohmann::json;

namespace {

std::string join(const std::string& path, std::string_view key) {
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}

std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

double as_number(const json& j, const std::string& path) {
    if (!j.is_number()) throw ConfigError(path, "expected a number");
    const double v = j.get<double>();
    if (!std::isfinite(v)) throw ConfigError(path, "must be finite");
    return v;
}

std::uint64_t as_unsigned(const json& j, const std::string& path) {
    if (j.is_number_unsigned()) return j.get<std::uint64_t>();
    if (j.is_number_integer()) {
        const auto v = j.get<std::int64_t>();
        if (v < 0) throw ConfigError(path, "must be >= 0");
        return static_cast<std::uint64_t>(v);
    }
    throw ConfigError(path, "expected a non-negative integer");
}

bool as_bool(const json& j, const std::string& path) {
    if (!j.is_boolean()) throw ConfigError(path, "expected true or false");
    return j.get<bool>();
}

std::string as_string(const json& j, const std::string& path) {
    if (!j.is_string()) throw ConfigError(path, "expected a string");
    return j.get<std::string>();
}

const json& as_array(const json& j, const std::string& path) {
    if (!j.is_array()) throw ConfigError(path, "expected an array");
    return j;
}

/// Field reader for one JSON object. Every key must be consumed.
class Fields {
public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) throw ConfigError(path_, "expected an object");
    }

    const json* find(std::string_view key) {
        auto it = j_.find(std::string(key));
        if (it == j_.end()) return nullptr;
        seen_.insert(std::string(key));
        return &*it;
    }
    std::string at(std::string_view key) const { return join(path_, key); }

    void number(std::string_view key, double& out) {
        if (const json* v = find(key)) out = as_number(*v, at(key));
    }
    void count(std::string_view key, std::size_t& out) {
        if (const json* v = find(key)) out = static_cast<std::size_t>(as_unsigned(*v, at(key)));
    }
    void flag(std::string_view key, bool& out) {
        if (const json* v = find(key)) out = as_bool(*v, at(key));
    }
    void optional_number(std::string_view key, std::optional<double>& out) {
        if (const json* v = find(key)) out = v->is_null() ? std::nullopt : std::optional(as_number(*v, at(key)));
    }
    template <class Enum, class Parse>
    void choice(std::string_view key, Enum& out, Parse parse) {
        const json* v = find(key);
        if (v == nullptr) return;
        const std::string text = as_string(*v, at(key));
        try {
            out = parse(text);
        } catch (const std::exception&) {
            throw ConfigError(at(key), "unknown value \"" + text + "\"");
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.contains(it.key())) throw ConfigError(at(it.key()), "unknown field");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

LinkKind parse_link(std::string_view text) {
    const auto kind = parse_link_kind(text);
    if (!kind) throw std::invalid_argument("unknown link");
    return *kind;
}

template <class Fn>
auto wrap_invalid(const std::string& path, Fn fn) {
    try {
        return fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
    }
}

// ---------------------------------------------------------------------------

json ev_to_json(const EvSpec& e) {
    json j{{"outlet", e.outlet},
           {"plug_at", e.plug_at},
           {"settle_scale", e.settle_scale},
           {"initial_current", e.initial_current},
           {"max_current", e.ev.max_current},
           {"settle_t0", e.ev.settle_t0},
           {"settle_rate", e.ev.settle_rate},
           {"settle_cap", e.ev.settle_cap}};
    if (e.unplug_at) j["unplug_at"] = *e.unplug_at;
    return j;
}

EvSpec ev_from_json(const json& j, const std::string& path) {
    Fields f(j, path);
    EvSpec e;
    f.count("outlet", e.outlet);
    f.number("plug_at", e.plug_at);
    f.optional_number("unplug_at", e.unplug_at);
    f.number("settle_scale", e.settle_scale);
    f.number("initial_current", e.initial_current);
    f.number("max_current", e.ev.max_current);
    f.number("settle_t0", e.ev.settle_t0);
    f.number("settle_rate", e.ev.settle_rate);
    f.number("settle_cap", e.ev.settle_cap);
    f.finish();
    return e;
}

json station_to_json(const StationSpec& s) {
    json evs = json::array();
    for (const auto& e : s.evs) evs.push_back(ev_to_json(e));
    return json{{"meters", s.options.meters},
                {"circuit_limit", s.options.circuit_limit},
                {"voltage", s.options.voltage},
                {"link", std::string(to_string(s.options.link))},
                {"algorithm", std::string(to_string(s.options.algorithm))},
                {"evs", std::move(evs)},
                {"dead_meters", s.dead_meters}};
}

StationSpec station_from_json(const json& j, const std::string& path) {
    Fields f(j, path);
    StationSpec s;
    s.evs.clear();
    f.count("meters", s.options.meters);
    f.number("circuit_limit", s.options.circuit_limit);
    f.number("voltage", s.options.voltage);
    f.choice("link", s.options.link, parse_link);
    f.choice("algorithm", s.options.algorithm, parse_algorithm_mode);
    if (const json* evs = f.find("evs")) {
        const std::string p = f.at("evs");
        for (std::size_t i = 0; i < as_array(*evs, p).size(); ++i) s.evs.push_back(ev_from_json((*evs)[i], index(p, i)));
    }
    if (const json* dead = f.find("dead_meters")) {
        const std::string p = f.at("dead_meters");
        for (std::size_t i = 0; i < as_array(*dead, p).size(); ++i) {
            s.dead_meters.push_back(static_cast<std::size_t>(as_unsigned((*dead)[i], index(p, i))));
        }
    }
    f.finish();
    return s;
}

json models_to_json(const NetworkModels& m) {
    return json{{"ethernet", to_json(m.ethernet)},   {"wifi", to_json(m.wifi)},
                {"three_g", to_json(m.three_g)},     {"local_bus", to_json(m.local_bus)},
                {"metering", to_json(m.metering)},   {"status_read", to_json(m.status_read)},
                {"t_server_cloud", m.t_server_cloud}, {"t_cloud", m.t_cloud}};
}

NetworkModels models_from_json(const json& j, const std::string& path) {
    Fields f(j, path);
    NetworkModels m;
    const auto model = [&](std::string_view key, LatencyModel& out) {
        if (const json* v = f.find(key)) out = latency_model_from_json(*v, f.at(key));
    };
    model("ethernet", m.ethernet);
    model("wifi", m.wifi);
    model("three_g", m.three_g);
    model("local_bus", m.local_bus);
    model("metering", m.metering);
    model("status_read", m.status_read);
    f.number("t_server_cloud", m.t_server_cloud);
    f.number("t_cloud", m.t_cloud);
    f.finish();
    return m;
}

json budget_to_json(const TimingBudget& b) {
    return json{{"t_3g", b.t_3g},         {"t_metering", b.t_metering},         {"t_ethernet", b.t_ethernet},
                {"t_wifi", b.t_wifi},     {"t_server_cloud", b.t_server_cloud}, {"t_cloud", b.t_cloud}};
}

TimingBudget budget_from_json(const json& j, const std::string& path) {
    Fields f(j, path);
    double t_3g = 0, t_metering = 0, t_ethernet = 0, t_wifi = 0, t_sc = 0, t_cloud = 0;
    f.number("t_3g", t_3g);
    f.number("t_metering", t_metering);
    f.number("t_ethernet", t_ethernet);
    f.number("t_wifi", t_wifi);
    f.number("t_server_cloud", t_sc);
    f.number("t_cloud", t_cloud);
    f.finish();
    return wrap_invalid(path, [&] { return TimingBudget::make(t_3g, t_metering, t_ethernet, t_wifi, t_sc, t_cloud); });
}

json windows_to_json(const sched::ScheduleTimeConfig& c) {
    json outlets = json::array();
    for (const auto& ws : c.windows) {
        json list = json::array();
        for (const auto& w : ws) list.push_back(json{{"start", w.start}, {"end", w.end}, {"current", w.current}});
        outlets.push_back(std::move(list));
    }
    return json{{"windows", std::move(outlets)}};
}

sched::ScheduleTimeConfig windows_from_json(const json& j, const std::string& path) {
    Fields f(j, path);
    sched::ScheduleTimeConfig c;
    if (const json* outlets = f.find("windows")) {
        const std::string p = f.at("windows");
        for (std::size_t o = 0; o < as_array(*outlets, p).size(); ++o) {
            const std::string po = index(p, o);
            std::vector<sched::TimeWindow> list;
            for (std::size_t i = 0; i < as_array((*outlets)[o], po).size(); ++i) {
                Fields w((*outlets)[o][i], index(po, i));
                sched::TimeWindow tw;
                w.number("start", tw.start);
                w.number("end", tw.end);
                w.number("current", tw.current);
                w.finish();
                list.push_back(tw);
            }
            c.windows.push_back(std::move(list));
        }
    }
    f.finish();
    return c;
}

}  // namespace

// ---------------------------------------------------------------------------

json to_json(const LatencyModel& model) {
    json comps = json::array();
    for (const auto& c : model.components()) {
        comps.push_back(json{{"weight", c.weight}, {"location", c.location}, {"spread", c.spread}});
    }
    json j{{"kind", std::string(to_string(model.kind()))}, {"components", std::move(comps)},
           {"hard_max", model.hard_max()}};
    if (!model.diurnal().is_flat()) j["diurnal"] = model.diurnal().scale();
    return j;
}

LatencyModel latency_model_from_json(const json& j, const std::string& path) {
    Fields f(j, path);
    LinkKind kind = LinkKind::ThreeG;
    f.choice("kind", kind, parse_link);
    if (const json* fixed = f.find("fixed")) {
        const double v = as_number(*fixed, f.at("fixed"));
        f.finish();
        return wrap_invalid(path, [&] { return LatencyModel::fixed(kind, v); });
    }
    std::vector<MixtureComponent> comps;
    const json* cs = f.find("components");
    if (cs == nullptr) throw ConfigError(f.at("components"), "required (or give \"fixed\")");
    const std::string p = f.at("components");
    for (std::size_t i = 0; i < as_array(*cs, p).size(); ++i) {
        Fields c((*cs)[i], index(p, i));
        MixtureComponent mc;
        c.number("weight", mc.weight);
        c.number("location", mc.location);
        c.number("spread", mc.spread);
        c.finish();
        comps.push_back(mc);
    }
    double hard_max = 0.0;
    if (f.find("hard_max") == nullptr) throw ConfigError(f.at("hard_max"), "required");
    f.number("hard_max", hard_max);
    DiurnalProfile diurnal;
    if (const json* d = f.find("diurnal")) {
        const std::string pd = f.at("diurnal");
        if (!d->is_array() || d->size() != DiurnalProfile::kHours) {
            throw ConfigError(pd, "expected 168 hourly multipliers");
        }
        std::array<double, DiurnalProfile::kHours> scale{};
        for (std::size_t h = 0; h < scale.size(); ++h) scale[h] = as_number((*d)[h], index(pd, h));
        diurnal = wrap_invalid(pd, [&] { return DiurnalProfile(scale); });
    }
    f.finish();
    return wrap_invalid(path, [&] { return LatencyModel(kind, std::move(comps), hard_max, diurnal); });
}

StationSpec default_station_spec() {
    StationSpec s;
    for (std::size_t o = 0; o < s.options.meters; ++o) {
        EvSpec e;
        e.outlet = o;
        s.evs.push_back(e);
    }
    return s;
}

std::vector<RttTarget> default_rtt_targets() {
    return {{"ethernet", LinkKind::Ethernet},
            {"wifi", LinkKind::WiFi},
            {"3g-site-a", LinkKind::ThreeG},
            {"3g-site-b", LinkKind::ThreeG},
            {"3g-site-c", LinkKind::ThreeG}};
}

TimingBudget ExperimentConfig::equation_budget() const { return budget ? *budget : models.worst_case(); }

json to_json(const ExperimentConfig& c) {
    json stations = json::array();
    for (const auto& s : c.stations) stations.push_back(station_to_json(s));
    json targets = json::array();
    for (const auto& t : c.rtt.targets) targets.push_back(json{{"name", t.name}, {"link", std::string(to_string(t.link))}});
    const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };

    json j{{"version", kConfigVersion},
           {"seed", c.seed},
           {"stations", std::move(stations)},
           {"protocol", std::string(control::to_string(c.protocol))},
           {"pic", {{"push_period", c.pic.push_period}, {"push_enabled", c.pic.push_enabled},
                    {"serve_cache", c.pic.serve_cache}}},
           {"round_robin", {{"slot_length", c.round_robin.slot_length},
                            {"max_concurrent", c.round_robin.max_concurrent},
                            {"per_active_current", c.round_robin.per_active_current}}},
           {"schedule", windows_to_json(c.schedule)},
           {"rtt", {{"interval", c.rtt.interval}, {"probes", c.rtt.probes}, {"bins", c.rtt.bins},
                    {"targets", std::move(targets)}, {"ethernet_center", c.rtt.ethernet_center},
                    {"ethernet_band", c.rtt.ethernet_band}, {"ethernet_fraction", c.rtt.ethernet_fraction},
                    {"min_modes", c.rtt.min_modes}}},
           {"compare", {{"retrievals", c.compare.retrievals}, {"interval", c.compare.interval},
                        {"push_duration", c.compare.push_duration}, {"probe_interval", c.compare.probe_interval},
                        {"savings_tolerance", c.compare.savings_tolerance},
                        {"expected_speedup_power", opt(c.compare.expected_speedup_power)},
                        {"expected_speedup_full", opt(c.compare.expected_speedup_full)},
                        {"speedup_tolerance", c.compare.speedup_tolerance}}},
           {"duty", {{"outlet", c.duty.outlet}, {"i_init", c.duty.i_init}, {"step_max", c.duty.step_max},
                     {"step_increment", c.duty.step_increment}, {"random_points", c.duty.random_points},
                     {"spacing", c.duty.spacing}}},
           {"local", {{"duration", c.local.duration}, {"random_plug_events", c.local.random_plug_events},
                      {"mode", std::string(to_string(c.local.mode))}}}};
    if (c.budget) {
        j["budget"] = budget_to_json(*c.budget);
    } else {
        j["models"] = models_to_json(c.models);
    }
    return j;
}

ExperimentConfig config_from_json(const json& j) {
    Fields f(j, "");
    ExperimentConfig c;

    std::size_t version = kConfigVersion;
    f.count("version", version);
    if (version != static_cast<std::size_t>(kConfigVersion)) {
        throw ConfigError("version", "unsupported version " + std::to_string(version));
    }
    if (const json* seed = f.find("seed")) c.seed = as_unsigned(*seed, "seed");

    if (const json* st = f.find("stations")) {
        c.stations.clear();
        for (std::size_t i = 0; i < as_array(*st, "stations").size(); ++i) {
            c.stations.push_back(station_from_json((*st)[i], index("stations", i)));
        }
    }
    const json* models = f.find("models");
    const json* budget = f.find("budget");
    if (models != nullptr && budget != nullptr) {
        throw ConfigError("budget", "\"budget\" and \"models\" are mutually exclusive");
    }
    if (models != nullptr) c.models = models_from_json(*models, "models");
    if (budget != nullptr) {
        c.budget = budget_from_json(*budget, "budget");
        c.models = NetworkModels::fixed(*c.budget);
    }
    f.choice("protocol", c.protocol, control::parse_protocol_mode);

    if (const json* p = f.find("pic")) {
        Fields g(*p, "pic");
        g.number("push_period", c.pic.push_period);
        g.flag("push_enabled", c.pic.push_enabled);
        g.flag("serve_cache", c.pic.serve_cache);
        g.finish();
    }
    if (const json* rr = f.find("round_robin")) {
        Fields g(*rr, "round_robin");
        g.number("slot_length", c.round_robin.slot_length);
        g.count("max_concurrent", c.round_robin.max_concurrent);
        g.number("per_active_current", c.round_robin.per_active_current);
        g.finish();
    }
    if (const json* s = f.find("schedule")) c.schedule = windows_from_json(*s, "schedule");
    if (const json* r = f.find("rtt")) {
        Fields g(*r, "rtt");
        g.number("interval", c.rtt.interval);
        g.count("probes", c.rtt.probes);
        g.count("bins", c.rtt.bins);
        if (const json* t = g.find("targets")) {
            c.rtt.targets.clear();
            for (std::size_t i = 0; i < as_array(*t, "rtt.targets").size(); ++i) {
                Fields h((*t)[i], index("rtt.targets", i));
                RttTarget target;
                const json* name = h.find("name");
                if (name == nullptr) throw ConfigError(h.at("name"), "required");
                target.name = as_string(*name, h.at("name"));
                h.choice("link", target.link, parse_link);
                h.finish();
                c.rtt.targets.push_back(std::move(target));
            }
        }
        g.number("ethernet_center", c.rtt.ethernet_center);
        g.number("ethernet_band", c.rtt.ethernet_band);
        g.number("ethernet_fraction", c.rtt.ethernet_fraction);
        g.count("min_modes", c.rtt.min_modes);
        g.finish();
    }
    if (const json* cmp = f.find("compare")) {
        Fields g(*cmp, "compare");
        g.count("retrievals", c.compare.retrievals);
        g.number("interval", c.compare.interval);
        g.number("push_duration", c.compare.push_duration);
        g.number("probe_interval", c.compare.probe_interval);
        g.number("savings_tolerance", c.compare.savings_tolerance);
        g.optional_number("expected_speedup_power", c.compare.expected_speedup_power);
        g.optional_number("expected_speedup_full", c.compare.expected_speedup_full);
        g.number("speedup_tolerance", c.compare.speedup_tolerance);
        g.finish();
    }
    if (const json* d = f.find("duty")) {
        Fields g(*d, "duty");
        g.count("outlet", c.duty.outlet);
        g.number("i_init", c.duty.i_init);
        g.number("step_max", c.duty.step_max);
        g.number("step_increment", c.duty.step_increment);
        g.count("random_points", c.duty.random_points);
        g.number("spacing", c.duty.spacing);
        g.finish();
    }
    if (const json* l = f.find("local")) {
        Fields g(*l, "local");
        g.number("duration", c.local.duration);
        g.count("random_plug_events", c.local.random_plug_events);
        g.choice("mode", c.local.mode, parse_algorithm_mode);
        g.finish();
    }
    f.finish();
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("", path.string() + ": " + e.what());
    }
    return config_from_json(j);
}

void validate(const ExperimentConfig& c) {
    if (c.stations.empty()) throw ConfigError("stations", "at least one station is required");
    for (std::size_t si = 0; si < c.stations.size(); ++si) {
        const StationSpec& s = c.stations[si];
        const std::string p = index("stations", si);
        if (s.options.meters == 0) throw ConfigError(p + ".meters", "must be at least 1");
        if (!(s.options.circuit_limit > 0.0)) throw ConfigError(p + ".circuit_limit", "must be positive");
        if (!(s.options.voltage > 0.0)) throw ConfigError(p + ".voltage", "must be positive");
        for (std::size_t d = 0; d < s.dead_meters.size(); ++d) {
            if (s.dead_meters[d] >= s.options.meters) {
                throw ConfigError(index(p + ".dead_meters", d), "no such outlet");
            }
        }
        // Plug intervals per outlet must not overlap, and the initial
        // allocations of simultaneously plugged EVs must fit the circuit.
        std::vector<std::pair<Seconds, Seconds>> spans;
        for (std::size_t ei = 0; ei < s.evs.size(); ++ei) {
            const EvSpec& e = s.evs[ei];
            const std::string pe = index(p + ".evs", ei);
            if (e.outlet >= s.options.meters) throw ConfigError(pe + ".outlet", "no such outlet");
            if (!(e.plug_at >= 0.0)) throw ConfigError(pe + ".plug_at", "must be >= 0");
            if (e.unplug_at && !(*e.unplug_at > e.plug_at)) throw ConfigError(pe + ".unplug_at", "must follow plug_at");
            if (!(e.settle_scale > 0.0)) throw ConfigError(pe + ".settle_scale", "must be positive");
            if (!(e.ev.max_current > 0.0)) throw ConfigError(pe + ".max_current", "must be positive");
            if (!(e.ev.settle_t0 >= 0.0 && e.ev.settle_rate >= 0.0 && e.ev.settle_cap >= 0.0)) {
                throw ConfigError(pe, "settle parameters must be >= 0");
            }
            if (!(e.initial_current >= 0.0 && e.initial_current <= e.ev.max_current)) {
                throw ConfigError(pe + ".initial_current", "must lie in [0, max_current]");
            }
            const Seconds end = e.unplug_at.value_or(INFINITY);
            for (std::size_t k = 0; k < ei; ++k) {
                const EvSpec& o = s.evs[k];
                if (o.outlet == e.outlet && e.plug_at < spans[k].second && o.plug_at < end) {
                    throw ConfigError(pe, "overlaps EV " + std::to_string(k) + " on the same outlet");
                }
            }
            spans.emplace_back(e.plug_at, end);
        }
        for (std::size_t ei = 0; ei < s.evs.size(); ++ei) {
            const Seconds t = s.evs[ei].plug_at;
            Amperes total = 0.0;
            for (std::size_t k = 0; k < s.evs.size(); ++k) {
                if (spans[k].first <= t && t < spans[k].second) total += s.evs[k].initial_current;
            }
            if (total > s.options.circuit_limit) {
                throw ConfigError(p + ".evs", "initial currents total " + num(total) + " A at t=" + num(t) +
                                                  " s, above the circuit limit");
            }
        }
        const auto rr = sched::validate_config(c.round_robin, s.options.circuit_limit);
        if (!rr.ok()) throw ConfigError("round_robin", rr.violations.front().what + " (" + p + ")");
        const auto st = sched::validate_config(c.schedule, s.options.circuit_limit);
        if (!st.ok()) {
            const auto& v = st.violations.front();
            throw ConfigError("schedule.windows", v.what + " at " + num(v.instant) +
                                                      " s of day (" + p + ")");
        }
        if (c.schedule.windows.size() > s.options.meters) {
            throw ConfigError("schedule.windows", "more window lists than outlets on " + p);
        }
    }
    // Scheduled currents travel as pilot duty cycles.
    const auto in_pilot = [](Amperes a) {
        return a >= control::duty_to_current(control::kMinPilotDuty) &&
               a <= control::duty_to_current(control::kMaxPilotDuty);
    };
    if (!in_pilot(c.round_robin.per_active_current)) {
        throw ConfigError("round_robin.per_active_current", "must lie in the pilot range [6, 51] A");
    }
    for (std::size_t o = 0; o < c.schedule.windows.size(); ++o) {
        for (std::size_t i = 0; i < c.schedule.windows[o].size(); ++i) {
            if (!in_pilot(c.schedule.windows[o][i].current)) {
                throw ConfigError(index(index("schedule.windows", o), i) + ".current",
                                  "must lie in the pilot range [6, 51] A");
            }
        }
    }
    if (!(c.pic.push_period > 0.0)) throw ConfigError("pic.push_period", "must be positive");
    if (!(c.rtt.interval > 0.0)) throw ConfigError("rtt.interval", "must be positive");
    if (c.rtt.probes == 0) throw ConfigError("rtt.probes", "must be at least 1");
    if (c.rtt.bins < 2) throw ConfigError("rtt.bins", "must be at least 2");
    std::set<std::string> names;
    for (std::size_t i = 0; i < c.rtt.targets.size(); ++i) {
        const auto& name = c.rtt.targets[i].name;
        if (name.empty() || !names.insert(name).second) {
            throw ConfigError(index("rtt.targets", i) + ".name", "must be non-empty and unique");
        }
    }
    if (c.compare.retrievals == 0) throw ConfigError("compare.retrievals", "must be at least 1");
    if (!(c.compare.interval > 0.0)) throw ConfigError("compare.interval", "must be positive");
    if (!(c.compare.push_duration >= 0.0)) throw ConfigError("compare.push_duration", "must be >= 0");
    if (!(c.compare.probe_interval > 0.0)) throw ConfigError("compare.probe_interval", "must be positive");
    const auto& duty_station = c.stations.front().options;
    if (c.duty.outlet >= duty_station.meters) throw ConfigError("duty.outlet", "no such outlet on stations[0]");
    const Amperes lo = control::duty_to_current(control::kMinPilotDuty);
    const Amperes hi = control::duty_to_current(control::kMaxPilotDuty);
    if (!(c.duty.i_init >= lo && c.duty.i_init + c.duty.step_max <= hi)) {
        throw ConfigError("duty", "i_init .. i_init + step_max must stay inside the pilot range [6, 51] A");
    }
    if (!(c.duty.step_max >= 0.0)) throw ConfigError("duty.step_max", "must be >= 0");
    if (!(c.duty.step_increment > 0.0)) throw ConfigError("duty.step_increment", "must be positive");
    if (!(c.duty.spacing > 0.0)) throw ConfigError("duty.spacing", "must be positive");
    if (!(c.local.duration > 0.0)) throw ConfigError("local.duration", "must be positive");
}

std::string config_digest(const ExperimentConfig& config) {
    return sim::to_hex(sim::fnv1a(to_json(config).dump()));
}

std::vector<std::string> preset_names() {
    return {"default", "worst-case-3g", "duty-cycle-3g", "zero-latency", "local-sched"};
}

ExperimentConfig preset(std::string_view name) {
    ExperimentConfig c;
    if (name == "default") {
        // nothing to change
    } else if (name == "worst-case-3g") {
        c.budget = TimingBudget::make(4.5, 0.5);
        c.models = NetworkModels::fixed(*c.budget);
        c.pic.serve_cache = true;
        c.compare.expected_speedup_power = 4.4;
        c.compare.expected_speedup_full = 8.4;
    } else if (name == "duty-cycle-3g") {
        c.budget = TimingBudget::make(5.0, 0.5);
        c.models = NetworkModels::fixed(*c.budget);
        c.pic.serve_cache = true;
    } else if (name == "zero-latency") {
        c.budget = TimingBudget::make(0.0, 0.0);
        c.models = NetworkModels::fixed(*c.budget);
        c.pic.serve_cache = true;
    } else if (name == "local-sched") {
        StationSpec s;
        s.options.circuit_limit = 40.0;
        for (std::size_t o = 0; o < 3; ++o) {
            EvSpec e;
            e.outlet = o;
            e.initial_current = 0.0;
            s.evs.push_back(e);
        }
        c.stations = {s};
        c.round_robin = sched::RoundRobinConfig{900.0, 1, 16.0};
        c.local.random_plug_events = 40;
    } else {
        std::string known;
        for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
        throw ConfigError("preset", "unknown preset \"" + std::string(name) + "\" (known: " + known + ")");
    }
    validate(c);
    return c;
}

}  // namespace picsim::cli
