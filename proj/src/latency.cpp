#include "picsim/latency.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include <boost/math/distributions/chi_squared.hpp>

namespace picsim {

std::string_view to_string(LinkKind kind) {
    switch (kind) {
        case LinkKind::Ethernet: return "ethernet";
        case LinkKind::WiFi: return "wifi";
        case LinkKind::ThreeG: return "3g";
        case LinkKind::LocalBus: return "local_bus";
    }
    return "ethernet";
}

std::optional<LinkKind> parse_link_kind(std::string_view text) {
    for (auto k : {LinkKind::Ethernet, LinkKind::WiFi, LinkKind::ThreeG, LinkKind::LocalBus}) {
        if (to_string(k) == text) return k;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// DiurnalProfile

DiurnalProfile::DiurnalProfile() { scale_.fill(1.0); }

DiurnalProfile::DiurnalProfile(const std::array<double, kHours>& scale) : scale_(scale) {
    for (double s : scale_) {
        if (!(s > 0.0 && s <= 1.0)) {
            throw std::invalid_argument("DiurnalProfile: multipliers must lie in (0, 1]");
        }
    }
}

std::size_t DiurnalProfile::hour_of_week(Seconds t) {
    const double hours = std::floor(t / 3600.0);
    double wrapped = std::fmod(hours, static_cast<double>(kHours));
    if (wrapped < 0) wrapped += static_cast<double>(kHours);
    return static_cast<std::size_t>(wrapped);
}

bool DiurnalProfile::is_flat() const {
    return std::all_of(scale_.begin(), scale_.end(), [](double s) { return s == 1.0; });
}

// ---------------------------------------------------------------------------
// LatencyModel

LatencyModel::LatencyModel(LinkKind kind, std::vector<MixtureComponent> components,
                           Seconds hard_max, DiurnalProfile diurnal)
    : kind_(kind), components_(std::move(components)), hard_max_(hard_max),
      diurnal_(std::move(diurnal)) {
    if (components_.empty()) throw std::invalid_argument("LatencyModel: no mixture components");
    if (!(hard_max_ >= 0.0) || !std::isfinite(hard_max_)) {
        throw std::invalid_argument("LatencyModel: hard_max must be finite and >= 0");
    }
    double total = 0.0;
    for (const auto& c : components_) {
        if (!(c.weight > 0.0)) throw std::invalid_argument("LatencyModel: weights must be positive");
        if (!(c.spread >= 0.0)) throw std::invalid_argument("LatencyModel: spread must be >= 0");
        if (!(c.location >= 0.0 && c.location <= hard_max_)) {
            throw std::invalid_argument("LatencyModel: location outside [0, hard_max]");
        }
        if (c.location == 0.0 && c.spread > 0.0) {
            throw std::invalid_argument("LatencyModel: a spread component needs a positive location");
        }
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw std::invalid_argument("LatencyModel: weights must sum to 1");
    }
}

LatencyModel LatencyModel::fixed(LinkKind kind, Seconds value) {
    return LatencyModel(kind, {{1.0, value, 0.0}}, value);
}

LatencyModel LatencyModel::default_ethernet() {
    // Same-gateway Ethernet: a few hundred microseconds.
    return LatencyModel(LinkKind::Ethernet, {{1.0, 200e-6, 50e-6}}, 1e-3);
}

LatencyModel LatencyModel::default_wifi() {
    // Ethernet shifted by a placeholder +20 ms.
    return LatencyModel(LinkKind::WiFi, {{1.0, 0.020 + 200e-6, 50e-6}}, 0.021);
}

LatencyModel LatencyModel::default_three_g() {
    // Synthetic four-peak fit; peaks are not ground truth.
    std::array<double, DiurnalProfile::kHours> scale;
    scale.fill(1.0);
    for (std::size_t day : {0U, 1U}) {       // Sunday, Monday
        for (std::size_t h = 2; h < 7; ++h) {  // 02:00-06:59
            scale[day * 24 + h] = 0.85;
        }
    }
    return LatencyModel(LinkKind::ThreeG,
                        {{0.4, 0.8, 0.15}, {0.3, 1.5, 0.15}, {0.2, 2.5, 0.15}, {0.1, 4.0, 0.15}},
                        4.5, DiurnalProfile(scale));
}

LatencyModel LatencyModel::default_local_bus() {
    return LatencyModel(LinkKind::LocalBus, {{1.0, 200e-6, 50e-6}}, 1e-3);
}

LatencyModel LatencyModel::default_metering() {
    return LatencyModel(LinkKind::LocalBus, {{1.0, 0.2, 0.01}}, 0.5);
}

LatencyModel LatencyModel::default_for(LinkKind kind) {
    switch (kind) {
        case LinkKind::Ethernet: return default_ethernet();
        case LinkKind::WiFi: return default_wifi();
        case LinkKind::ThreeG: return default_three_g();
        case LinkKind::LocalBus: return default_local_bus();
    }
    return default_ethernet();
}

bool LatencyModel::deterministic() const {
    return components_.size() == 1 && components_.front().spread == 0.0;
}

Seconds LatencyModel::sample(sim::RandomStream& rng, Seconds at) const {
    const double u = rng.uniform();
    const MixtureComponent* chosen = &components_.back();
    double acc = 0.0;
    for (const auto& c : components_) {
        acc += c.weight;
        if (u < acc) {
            chosen = &c;
            break;
        }
    }
    const double loc = chosen->location * diurnal_.at(at);
    if (chosen->spread == 0.0) return std::min(loc, hard_max_);

    for (int attempt = 0; attempt < 256; ++attempt) {
        const double x = rng.normal(loc, chosen->spread);
        if (x > 0.0 && x <= hard_max_) return x;
    }
    return std::clamp(loc, std::nextafter(0.0, 1.0), hard_max_);
}

namespace {

double std_normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }
double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

Seconds LatencyModel::mean(Seconds at) const {
    const double scale = diurnal_.at(at);
    double m = 0.0;
    for (const auto& c : components_) {
        const double loc = c.location * scale;
        double cm = loc;
        if (c.spread > 0.0) {
            const double a = (0.0 - loc) / c.spread;
            const double b = (hard_max_ - loc) / c.spread;
            const double z = std_normal_cdf(b) - std_normal_cdf(a);
            if (z > 0.0) cm = loc + c.spread * (std_normal_pdf(a) - std_normal_pdf(b)) / z;
        } else {
            cm = std::min(loc, hard_max_);
        }
        m += c.weight * cm;
    }
    return m;
}

Seconds LatencyModel::nominal_mean(Seconds at) const {
    const double scale = diurnal_.at(at);
    double m = 0.0;
    for (const auto& c : components_) m += c.weight * c.location * scale;
    return m;
}

// ---------------------------------------------------------------------------
// TimingBudget / NetworkModels

TimingBudget TimingBudget::make(Seconds t_3g, Seconds t_metering, Seconds t_ethernet,
                                Seconds t_wifi, Seconds t_server_cloud, Seconds t_cloud) {
    TimingBudget b;
    b.t_server_cloud = t_server_cloud;
    b.t_cloud = t_cloud;
    b.t_ethernet = t_ethernet;
    b.t_wifi = t_wifi;
    b.t_3g = t_3g;
    b.t_3g_uplink = 0.5 * t_3g;
    b.t_metering = t_metering;
    b.validate();
    return b;
}

void TimingBudget::validate() const {
    for (double v : {t_server_cloud, t_cloud, t_ethernet, t_wifi, t_3g, t_3g_uplink, t_metering}) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("TimingBudget: every field must be finite and >= 0");
        }
    }
    if (t_3g_uplink != 0.5 * t_3g) {
        throw std::invalid_argument("TimingBudget: t_3g_uplink must equal 0.5 * t_3g");
    }
}

const LatencyModel& NetworkModels::link(LinkKind kind) const {
    switch (kind) {
        case LinkKind::Ethernet: return ethernet;
        case LinkKind::WiFi: return wifi;
        case LinkKind::ThreeG: return three_g;
        case LinkKind::LocalBus: return local_bus;
    }
    return ethernet;
}

NetworkModels NetworkModels::fixed(const TimingBudget& budget) {
    budget.validate();
    NetworkModels m;
    m.ethernet = LatencyModel::fixed(LinkKind::Ethernet, budget.t_ethernet);
    m.wifi = LatencyModel::fixed(LinkKind::WiFi, budget.t_wifi);
    m.three_g = LatencyModel::fixed(LinkKind::ThreeG, budget.t_3g);
    m.local_bus = LatencyModel::fixed(LinkKind::LocalBus, budget.t_ethernet);
    m.metering = LatencyModel::fixed(LinkKind::LocalBus, budget.t_metering);
    m.status_read = LatencyModel::fixed(LinkKind::LocalBus, 0.0);
    m.t_server_cloud = budget.t_server_cloud;
    m.t_cloud = budget.t_cloud;
    return m;
}

TimingBudget NetworkModels::worst_case() const {
    return TimingBudget::make(three_g.hard_max(), metering.hard_max(), local_bus.hard_max(),
                              wifi.hard_max(), t_server_cloud, t_cloud);
}

Seconds network_time(const NetworkModels& models, LinkKind link, sim::RandomStream& rng,
                     Seconds at) {
    return models.t_server_cloud + models.t_cloud + models.link(link).sample(rng, at);
}

Seconds round_trip_time(const NetworkModels& models, LinkKind link, sim::RandomStream& rng,
                        Seconds at) {
    const Seconds net = network_time(models, link, rng, at);
    return net + models.metering.sample(rng, at);
}

// ---------------------------------------------------------------------------
// Histograms

Histogram::Histogram(double lo, double hi, std::size_t bins) : low(lo), high(hi) {
    if (bins == 0) throw std::invalid_argument("Histogram: zero bins");
    if (!(hi > lo)) throw std::invalid_argument("Histogram: empty range");
    counts.assign(bins, 0);
}

std::uint64_t Histogram::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

void Histogram::add(double value) {
    const double pos = (value - low) / bin_width();
    std::size_t idx = 0;
    if (pos >= static_cast<double>(counts.size())) {
        idx = counts.size() - 1;
    } else if (pos > 0.0) {
        idx = static_cast<std::size_t>(pos);
    }
    ++counts[idx];
}

Histogram Histogram::of(std::span<const double> values, double lo, double hi, std::size_t bins) {
    Histogram h(lo, hi, bins);
    for (double v : values) h.add(v);
    return h;
}

Histogram empirical_histogram(const LatencyModel& model, std::size_t n, std::size_t bins,
                              sim::RandomStream& rng, Seconds at) {
    if (n == 0) throw std::invalid_argument("empirical_histogram: n must be >= 1");
    if (bins == 0) throw std::invalid_argument("empirical_histogram: zero bins");
    const double hi = model.hard_max() > 0.0 ? model.hard_max() : 1e-9;
    Histogram h(0.0, hi, bins);
    for (std::size_t i = 0; i < n; ++i) h.add(model.sample(rng, at));
    return h;
}

std::vector<double> detect_modes(const Histogram& hist, double smoothing_bins,
                                 double min_prominence) {
    const std::size_t n = hist.counts.size();
    std::vector<double> s(n, 0.0);
    if (smoothing_bins > 0.0) {
        const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * smoothing_bins));
        std::vector<double> kernel;
        for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
            const double x = static_cast<double>(k) / smoothing_bins;
            kernel.push_back(std::exp(-0.5 * x * x));
        }
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
                const auto j = static_cast<std::ptrdiff_t>(i) + k;
                if (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) continue;
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       static_cast<double>(hist.counts[static_cast<std::size_t>(j)]);
            }
            s[i] = acc;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<double>(hist.counts[i]);
    }

    const double top = *std::max_element(s.begin(), s.end());
    if (!(top > 0.0)) return {};

    std::vector<double> modes;
    for (std::size_t i = 0; i < n; ++i) {
        const bool rises = i == 0 || s[i] > s[i - 1];
        const bool holds = i + 1 == n || s[i] >= s[i + 1];
        if (!rises || !holds || s[i] <= 0.0) continue;
        // Plateau: the peak must eventually fall on the right, or reach the edge.
        std::size_t end = i;
        while (end + 1 < n && s[end + 1] == s[i]) ++end;
        if (end + 1 < n && s[end + 1] > s[i]) continue;

        std::optional<double> left_min;
        for (std::size_t j = i; j-- > 0;) {
            if (s[j] > s[i]) break;
            left_min = left_min ? std::min(*left_min, s[j]) : s[j];
        }
        std::optional<double> right_min;
        for (std::size_t j = end + 1; j < n; ++j) {
            if (s[j] > s[i]) break;
            right_min = right_min ? std::min(*right_min, s[j]) : s[j];
        }
        double base = 0.0;
        if (left_min && right_min) base = std::max(*left_min, *right_min);
        else if (left_min) base = *left_min;
        else if (right_min) base = *right_min;
        if (s[i] - base >= min_prominence * top) {
            modes.push_back(0.5 * (hist.bin_center(i) + hist.bin_center(end)));
        }
    }
    return modes;
}

ChiSquareResult chi_square_homogeneity(const Histogram& a, const Histogram& b) {
    if (a.counts.size() != b.counts.size() || a.low != b.low || a.high != b.high) {
        throw std::invalid_argument("chi_square_homogeneity: histograms must share bins");
    }
    const double na = static_cast<double>(a.total());
    const double nb = static_cast<double>(b.total());
    if (na == 0.0 || nb == 0.0) throw std::invalid_argument("chi_square_homogeneity: empty sample");
    const double fa = na / (na + nb);
    const double fb = nb / (na + nb);

    std::vector<std::pair<double, double>> groups;
    double ga = 0.0;
    double gb = 0.0;
    for (std::size_t i = 0; i < a.counts.size(); ++i) {
        ga += static_cast<double>(a.counts[i]);
        gb += static_cast<double>(b.counts[i]);
        const double pooled = ga + gb;
        if (pooled * fa >= 5.0 && pooled * fb >= 5.0) {
            groups.emplace_back(ga, gb);
            ga = gb = 0.0;
        }
    }
    if (ga + gb > 0.0) {
        if (groups.empty()) {
            groups.emplace_back(ga, gb);
        } else {
            groups.back().first += ga;
            groups.back().second += gb;
        }
    }

    ChiSquareResult r;
    for (const auto& [oa, ob] : groups) {
        const double pooled = oa + ob;
        const double ea = pooled * fa;
        const double eb = pooled * fb;
        r.statistic += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
    }
    r.dof = groups.size() > 1 ? groups.size() - 1 : 0;
    if (r.dof > 0) {
        boost::math::chi_squared dist(static_cast<double>(r.dof));
        r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
    }
    return r;
}

void write_histogram_csv(std::ostream& out, const Histogram& hist) {
    out << "bin_low,bin_high,count\n";
    const double w = hist.bin_width();
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        const double lo = hist.bin_low(i);
        out << lo << ',' << lo + w << ',' << hist.counts[i] << '\n';
    }
}

namespace {

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

}  // namespace

void write_histogram_svg(std::ostream& out, const Histogram& hist, std::string_view title) {
    constexpr double width = 640.0;
    constexpr double height = 320.0;
    constexpr double margin = 40.0;
    const auto peak = std::max<std::uint64_t>(
        1, *std::max_element(hist.counts.begin(), hist.counts.end()));
    const double bar_w = (width - 2 * margin) / static_cast<double>(hist.counts.size());
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    out << "<text x=\"" << margin << "\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
        << xml_escape(title) << "</text>\n";
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        const double h = (height - 2 * margin) * static_cast<double>(hist.counts[i]) /
                         static_cast<double>(peak);
        out << "<rect x=\"" << margin + bar_w * static_cast<double>(i) << "\" y=\""
            << height - margin - h << "\" width=\"" << bar_w << "\" height=\"" << h
            << "\" fill=\"steelblue\"/>\n";
    }
    out << "<text x=\"" << margin << "\" y=\"" << height - 10 << "\" font-size=\"11\">"
        << hist.low << " s</text>\n";
    out << "<text x=\"" << width - margin - 40 << "\" y=\"" << height - 10
        << "\" font-size=\"11\">" << hist.high << " s</text>\n";
    out << "</svg>\n";
}

}  // namespace picsim
